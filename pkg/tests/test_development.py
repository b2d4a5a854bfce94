import os

import numpy as np
import pytest

from wienerpath.cylinder import Partition
from wienerpath.development import (CurvedPiecewisePath, FlatPiecewisePath,
                                    GeometricMeasureSampler, antidevelop,
                                    antidevelop_vertices, develop,
                                    develop_batch, energy_curved, energy_flat,
                                    flat_path_from_increments,
                                    geometric_expectation_mc,
                                    lambda0_density, lambda0_log_density,
                                    read_path_file, sample_lambda0,
                                    sample_lambda0_increments, sample_nu,
                                    transfer_to_curved, transfer_to_flat,
                                    write_path_file)
from wienerpath.limits import make_path_functional
from wienerpath.manifolds import Circle, Euclidean, GeometryError, Sphere2

SX0 = np.array([0.0, 0.0, 1.0])


def _random_flat(part, dim, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    deltas = sample_lambda0_increments(part, dim, rng, 1)[0] * scale
    return flat_path_from_increments(part, deltas)


def test_flat_path_validation():
    part = Partition.uniform(4)
    with pytest.raises(GeometryError):
        FlatPiecewisePath(part, np.ones((5, 2)))   # must start at 0
    p = _random_flat(part, 2, 0)
    assert p.increments.shape == (4, 2)
    assert np.allclose(p.velocities * part.gaps[:, None], p.increments)


def test_develop_preserves_energy_sphere():
    part = Partition.uniform(64)
    flat = _random_flat(part, 2, 1)
    curved = develop(flat, Sphere2(1.0), SX0)
    ef, ec = energy_flat(flat), energy_curved(curved)
    assert abs(ec - ef) / ef < 1e-12


def test_develop_antidevelop_roundtrip_sphere():
    part = Partition.uniform(64)
    flat = _random_flat(part, 2, 2)
    curved = develop(flat, Sphere2(1.0), SX0)
    back = antidevelop(curved)
    assert np.max(np.abs(back.vertices - flat.vertices)) < 1e-12


def test_vertex_roundtrip_sphere_batch():
    part = Partition.uniform(64)
    rng = np.random.default_rng(3)
    m = Sphere2(1.0)
    deltas = sample_lambda0_increments(part, 2, rng, 200)
    verts = develop_batch(m, part, deltas, SX0)
    assert np.allclose(np.linalg.norm(verts, axis=-1), 1.0, atol=1e-12)
    back, ok = antidevelop_vertices(m, part, verts, SX0)
    assert ok.all()
    assert np.max(np.abs(back - deltas)) < 1e-9


def test_develop_circle_is_wrapped_cumsum():
    part = Partition.uniform(8)
    m = Circle(1.0)
    flat = _random_flat(part, 1, 4)
    curved = develop(flat, m, np.array([0.5]))
    expect = np.mod(0.5 + np.concatenate([[0.0], np.cumsum(flat.increments)]),
                    2 * np.pi)
    assert np.max(np.abs(curved.vertices[:, 0] - expect)) < 1e-12
    back = antidevelop(curved)
    assert np.max(np.abs(back.vertices - flat.vertices)) < 1e-12


def test_curved_frames_orthonormal():
    part = Partition.uniform(32)
    flat = _random_flat(part, 2, 5)
    curved = develop(flat, Sphere2(1.0), SX0)
    f = curved.frames
    gram = np.einsum("nik,njk->nij", f, f)
    assert np.max(np.abs(gram - np.eye(2))) < 1e-10
    # frames stay tangent
    dots = np.einsum("nik,nk->ni", f, curved.vertices)
    assert np.max(np.abs(dots)) < 1e-10


def test_lambda0_density_identity():
    part = Partition(np.array([0.0, 0.25, 0.6, 1.0]))
    rng = np.random.default_rng(6)
    deltas = sample_lambda0_increments(part, 2, rng, 10)
    logd = lambda0_log_density(part, deltas)
    energy = np.array([energy_flat(flat_path_from_increments(part, d))
                       for d in deltas])
    expect = -0.5 * energy - 0.5 * 2 * np.sum(np.log(2 * np.pi * part.gaps))
    assert np.max(np.abs(logd - expect)) < 1e-12
    assert np.allclose(lambda0_density(part, deltas), np.exp(logd))


def test_sample_lambda0_moments():
    part = Partition.uniform(4)
    rng = np.random.default_rng(7)
    deltas = sample_lambda0_increments(part, 1, rng, 200000)
    var = np.var(deltas, axis=0)[:, 0]
    assert np.max(np.abs(var - 0.25)) < 5e-3


def test_sampler_and_nu():
    m = Sphere2(1.0)
    part = Partition.uniform(16)
    sampler = GeometricMeasureSampler(m, SX0, part)
    path = sample_nu(sampler, np.random.default_rng(8))
    assert isinstance(path, CurvedPiecewisePath)
    assert path.vertices.shape == (17, 3)
    flat = sample_lambda0(part, 2, np.random.default_rng(8))
    assert isinstance(flat, FlatPiecewisePath)
    assert flat.vertices.shape == (17, 2)
    a = sampler.sample_vertices(np.random.default_rng(9), 50)
    b = sampler.sample_vertices(np.random.default_rng(9), 50)
    assert np.array_equal(a, b)


def test_transfer_roundtrip():
    m = Sphere2(1.0)
    part = Partition.uniform(16)
    rng = np.random.default_rng(10)
    deltas = sample_lambda0_increments(part, 2, rng, 40)
    flat_verts = np.concatenate([np.zeros((40, 1, 2)),
                                 np.cumsum(deltas, axis=1)], axis=1)

    def flat_fn(v):
        return np.sum(v[:, -1, :] ** 2, axis=-1)

    curved_fn = transfer_to_curved(flat_fn, m, part, SX0)
    flat_again = transfer_to_flat(curved_fn, m, part, SX0)
    assert np.max(np.abs(flat_again(flat_verts) - flat_fn(flat_verts))) < 1e-9


def test_geometric_expectation_reproducible():
    m = Sphere2(1.0)
    part = Partition.uniform(8)
    pf = make_path_functional("endpoint_legendre", degree=1)
    a = geometric_expectation_mc(m, SX0, part, pf, 5000, seed=11, workers=2)
    b = geometric_expectation_mc(m, SX0, part, pf, 5000, seed=11, workers=2)
    assert a.same_numbers(b)
    assert a.extra["rejected"] == 0


def test_geometric_endpoint_moves_toward_heat_law():
    m = Sphere2(1.0)
    pf = make_path_functional("endpoint_legendre", degree=1)
    rep = geometric_expectation_mc(m, SX0, Partition.uniform(64), pf,
                                   50000, seed=12)
    assert abs(rep.estimate - np.exp(-1.0)) < 5e-3 + 4 * rep.stderr


def test_path_file_roundtrip(tmp_path):
    m = Sphere2(2.0)
    part = Partition.uniform(8)
    flat = _random_flat(part, 2, 13)
    curved = develop(flat, m, np.array([0.0, 0.0, 2.0]))
    fname = os.path.join(tmp_path, "p.txt")
    write_path_file(fname, m, part, curved.vertices)
    m2, part2, verts = read_path_file(fname)
    assert m2 == m and part2 == part
    assert np.max(np.abs(verts - curved.vertices)) < 1e-15


def test_flat_circle_measure_identity():
    # endpoint of developed Gaussian increments has the wrapped normal law
    m = Circle(1.0)
    part = Partition.uniform(16)
    sampler = GeometricMeasureSampler(m, np.array([0.0]), part)
    verts = sampler.sample_vertices(np.random.default_rng(14), 100000)
    emp = np.mean(np.cos(verts[:, -1, 0]))
    assert abs(emp - np.exp(-0.5)) < 5e-3


def test_euclidean_develop_is_identity():
    m = Euclidean(2)
    part = Partition.uniform(8)
    flat = _random_flat(part, 2, 15)
    curved = develop(flat, m, np.zeros(2))
    assert np.max(np.abs(curved.vertices - flat.vertices)) < 1e-15
