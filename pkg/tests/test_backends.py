import os
import subprocess
import sys

import numpy as np

import wienerpath
from wienerpath.backends import (_reference, antidevelop_sphere,
                                 develop_sphere, sphere_heat_series)


def _increments(seed, count, n):
    rng = np.random.default_rng(seed)
    return rng.normal(scale=np.sqrt(1.0 / n), size=(count, n, 2))


def test_backend_name_exported():
    assert wienerpath.BACKEND_NAME in ("numba", "numpy")


def test_heat_series_matches_reference():
    rng = np.random.default_rng(0)
    u = rng.uniform(-1.0, 1.0, 5000)
    t = 0.2
    decay = t / 2.0
    active = sphere_heat_series(u, decay, 1.0 / (4 * np.pi), 80)
    ref = _reference.sphere_heat_series(u, decay, 1.0 / (4 * np.pi), 80)
    assert np.max(np.abs(active - ref)) < 1e-12 * np.max(np.abs(ref))


def test_develop_matches_reference():
    deltas = _increments(1, 50, 32)
    x0 = np.array([0.0, 0.0, 1.0])
    e1 = np.array([1.0, 0.0, 0.0])
    e2 = np.array([0.0, 1.0, 0.0])
    a = develop_sphere(deltas, x0, e1, e2, 1.0)
    b = _reference.develop_sphere(deltas, x0, e1, e2, 1.0)
    for lhs, rhs in zip(a, b):
        assert np.max(np.abs(lhs - rhs)) < 1e-13


def test_antidevelop_matches_reference():
    deltas = _increments(2, 50, 32)
    x0 = np.array([0.0, 0.0, 1.0])
    e1 = np.array([1.0, 0.0, 0.0])
    e2 = np.array([0.0, 1.0, 0.0])
    verts, _, _ = develop_sphere(deltas, x0, e1, e2, 1.0)
    a, ok_a = antidevelop_sphere(verts, e1, e2, 1.0)
    b, ok_b = _reference.antidevelop_sphere(verts, e1, e2, 1.0)
    assert np.array_equal(ok_a, ok_b) and ok_a.all()
    assert np.max(np.abs(a - b)) < 1e-13


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, WIENERPATH_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c",
         "import wienerpath; print(wienerpath.BACKEND_NAME)"],
        capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "numpy"


def test_same_backend_rerun_is_bitwise():
    deltas = _increments(3, 20, 16)
    x0 = np.array([0.0, 0.0, 1.0])
    e1 = np.array([1.0, 0.0, 0.0])
    e2 = np.array([0.0, 1.0, 0.0])
    a, _, _ = develop_sphere(deltas, x0, e1, e2, 1.0)
    b, _, _ = develop_sphere(deltas, x0, e1, e2, 1.0)
    assert np.array_equal(a, b)
