import numpy as np
import pytest

from wienerpath.cylinder import (CylinderMeasure,
                                 Partition, PartitionError, expectation_mc,
                                 expectation_quadrature, lift_functional,
                                 lp_norm_mc, lp_norm_quadrature,
                                 make_functional, project, project_points)
from wienerpath.manifolds import Circle, FlatTorus, Sphere2

X0 = np.array([0.0])


def test_partition_invariants():
    with pytest.raises(PartitionError):
        Partition(np.array([0.0, 0.5]))          # must end at 1
    with pytest.raises(PartitionError):
        Partition(np.array([0.1, 1.0]))          # must start at 0
    with pytest.raises(PartitionError):
        Partition(np.array([0.0, 0.5, 0.5, 1.0]))
    p = Partition.uniform(4)
    assert p.n == 4 and abs(p.mesh - 0.25) < 1e-15


def test_dyadic_chain_is_nested():
    chain = Partition.dyadic_chain(4, start=2)
    assert [p.n for p in chain] == [2, 4, 8, 16]
    for a, b in zip(chain, chain[1:]):
        assert a.is_subset_of(b)
    assert chain[0].refined() == chain[1]


def test_density_is_kernel_product():
    m = Circle(1.0)
    part = Partition(np.array([0.0, 0.3, 1.0]))
    meas = CylinderMeasure(m, X0, part)
    pts = np.array([[[0.5], [1.1]]])
    k1 = meas.evaluator.kernel(0.3, X0, np.array([0.5]))
    k2 = meas.evaluator.kernel(0.7, np.array([0.5]), np.array([1.1]))
    assert np.isclose(meas.density(pts)[0], float(k1 * k2), rtol=1e-12)


def test_density_integrates_to_one_on_circle():
    m = Circle(1.0)
    part = Partition.uniform(2)
    meas = CylinderMeasure(m, X0, part)
    rep = expectation_quadrature(meas, make_functional("constant", m, part),
                                 nodes=128)
    assert abs(rep.estimate - 1.0) < 1e-10


def test_sample_endpoint_law_circle():
    m = Circle(1.0)
    part = Partition.uniform(8)
    meas = CylinderMeasure(m, X0, part)
    pts = meas.sample_batch(np.random.default_rng(0), 100000)
    emp = np.mean(np.cos(pts[:, -1, 0]))
    assert abs(emp - np.exp(-0.5)) < 5e-3


def test_sample_endpoint_law_sphere():
    m = Sphere2(1.0)
    x0 = np.array([0.0, 0.0, 1.0])
    part = Partition.uniform(4)
    meas = CylinderMeasure(m, x0, part)
    pts = meas.sample_batch(np.random.default_rng(1), 50000)
    assert abs(np.mean(pts[:, -1, 2]) - np.exp(-1.0)) < 8e-3


def test_project_keeps_coarse_times():
    m = Circle(1.0)
    fine = Partition.uniform(8)
    coarse = Partition.uniform(2)
    meas = CylinderMeasure(m, X0, fine)
    skel = meas.sample_skeleton(np.random.default_rng(2))
    proj = project(skel, coarse)
    assert proj.partition == coarse
    assert np.array_equal(proj.points[-1], skel.points[-1])
    assert np.array_equal(proj.points[0], skel.points[3])


def test_lift_functional_evaluates_through_projection():
    m = Circle(1.0)
    coarse = Partition.uniform(2)
    fine = Partition.uniform(8)
    f = make_functional("endpoint_distance", m, coarse)
    lifted = lift_functional(f, fine)
    pts = CylinderMeasure(m, X0, fine).sample_batch(np.random.default_rng(3), 100)
    direct = f.evaluate(project_points(pts, fine, coarse), X0)
    assert np.array_equal(lifted.evaluate(pts, X0), direct)
    with pytest.raises(PartitionError):
        lift_functional(make_functional("constant", m, Partition.uniform(3)), fine)


def test_expectation_mc_is_seed_deterministic():
    m = Circle(1.0)
    part = Partition.uniform(4)
    meas = CylinderMeasure(m, X0, part)
    f = make_functional("endpoint_distance", m, part)
    a = expectation_mc(meas, f, 5000, seed=42, workers=2)
    b = expectation_mc(meas, f, 5000, seed=42, workers=2)
    assert a.same_numbers(b)
    c = expectation_mc(meas, f, 5000, seed=43, workers=2)
    assert not a.same_numbers(c)


def test_mc_matches_quadrature():
    m = Circle(1.0)
    part = Partition.uniform(2)
    meas = CylinderMeasure(m, X0, part)
    f = make_functional("endpoint_distance", m, part)
    quad = expectation_quadrature(meas, f, nodes=256)
    mc = expectation_mc(meas, f, 200000, seed=7)
    assert abs(quad.estimate - mc.estimate) < 4 * mc.stderr


def test_lp_norms():
    m = Circle(1.0)
    part = Partition.uniform(2)
    meas = CylinderMeasure(m, X0, part)
    f = make_functional("endpoint_distance", m, part)
    q1 = lp_norm_quadrature(meas, f, p=1, nodes=256)
    q2 = lp_norm_quadrature(meas, f, p=2, nodes=256)
    assert q1.estimate <= q2.estimate  # Jensen
    mc2 = lp_norm_mc(meas, f, p=2, samples=200000, seed=8)
    assert abs(mc2.estimate - q2.estimate) < 4 * mc2.stderr


def test_quadrature_grid_cap():
    m = Circle(1.0)
    part = Partition.uniform(6)
    meas = CylinderMeasure(m, X0, part)
    f = make_functional("constant", m, part)
    with pytest.raises(ValueError):
        expectation_quadrature(meas, f, nodes=64)


def test_functional_registry():
    m = Circle(1.0)
    part = Partition.uniform(2)
    with pytest.raises(ValueError):
        make_functional("not_a_functional", m, part)
    f = make_functional("constant", m, part, value=2.0)
    assert np.array_equal(f.evaluate(np.zeros((3, 2, 1)), X0), [2.0, 2.0, 2.0])


def test_indicator_functional():
    m = Circle(1.0)
    part = Partition.uniform(2)
    f = make_functional("indicator", m, part, time=0.5, center=[0.0], radius=1.0)
    pts = np.array([[[0.5], [3.0]], [[2.0], [3.0]]])
    assert np.array_equal(f.evaluate(pts, X0), [1.0, 0.0])
    with pytest.raises(ValueError):
        make_functional("indicator", m, part, time=0.37, center=[0.0], radius=1.0)


def test_winding_counts_loops():
    m = Circle(1.0)
    part = Partition.uniform(4)
    f = make_functional("winding", m, part)
    # a path that advances by pi/2 each step winds once around
    pts = (np.arange(1, 5) * np.pi / 2 % (2 * np.pi)).reshape(1, 4, 1)
    assert np.isclose(f.evaluate(pts, X0)[0], 1.0, atol=1e-12)


def test_winding_torus_factor():
    m = FlatTorus((1.0, 1.0))
    part = Partition.uniform(4)
    f = make_functional("winding", m, part, factor=1)
    pts = np.zeros((1, 4, 2))
    pts[0, :, 1] = np.arange(1, 5) * np.pi / 2 % (2 * np.pi)
    assert np.isclose(f.evaluate(pts, np.zeros(2))[0], 1.0, atol=1e-12)


def test_endpoint_legendre_matches_spectral_oracle():
    m = Sphere2(1.0)
    x0 = np.array([0.0, 0.0, 1.0])
    part = Partition.uniform(1)
    meas = CylinderMeasure(m, x0, part)
    f = make_functional("endpoint_legendre", m, part, degree=2)
    rep = expectation_mc(meas, f, 100000, seed=5)
    assert abs(rep.estimate - np.exp(-3.0)) < 4 * rep.stderr


def test_report_json_roundtrip():
    m = Circle(1.0)
    part = Partition.uniform(2)
    meas = CylinderMeasure(m, X0, part)
    f = make_functional("constant", m, part, value=1.5)
    rep = expectation_mc(meas, f, 100, seed=0)
    from wienerpath.report import EstimateReport
    back = EstimateReport.from_json(rep.to_json())
    assert back.same_numbers(rep)
    assert rep.estimate == 1.5 and rep.stderr == 0.0
