"""End-to-end acceptance suite.

Each test checks one numbered acceptance criterion at its stated
tolerance and sample budget and prints a single pass/fail line
(visible with `pytest -s` or on failure).
"""

import time

import numpy as np

from wienerpath.cylinder import (CylinderMeasure, Partition, expectation_mc,
                                 lift_functional, lp_norm_mc,
                                 lp_norm_quadrature, make_functional)
from wienerpath.development import (GeometricMeasureSampler, antidevelop,
                                    develop, energy_curved, energy_flat,
                                    flat_path_from_increments,
                                    geometric_limit_estimate,
                                    sample_lambda0_increments)
from wienerpath.heatkernel import KernelEvaluator
from wienerpath.limits import (co_cauchy_diagnostic, discretized_family,
                               embed_family, limit_estimate,
                               make_path_functional)
from wienerpath.manifolds import Circle, Euclidean, FlatTorus, Sphere2
from wienerpath.stratonovich import (covariation_sum, exact_form_residual,
                                     ito_sum, make_field, midpoint_sum)

NORTH = np.array([0.0, 0.0, 1.0])
EXPECT_P1 = np.exp(-1.0)


def _report(num, title, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"criterion {num:2d} ({title}): {status}  [{detail}]")
    assert ok, f"criterion {num} failed: {detail}"


def test_criterion_01_heat_kernel_laws():
    t0 = time.perf_counter()
    circle = KernelEvaluator(Circle(1.0))
    x = np.array([0.0])
    norm_c = abs(circle.normalization_check(0.1, x, 2048))
    semi_c = abs(circle.semigroup_check(0.1, 0.1, x, np.array([0.5]), 2048))
    sphere = KernelEvaluator(Sphere2(1.0))
    norm_s = abs(sphere.normalization_check(0.1, NORTH, 256))
    elapsed = time.perf_counter() - t0
    ok = norm_c < 1e-10 and semi_c < 1e-8 and norm_s < 1e-6 and elapsed < 5.0
    _report(1, "heat-kernel laws", ok,
            f"circle norm {norm_c:.2e}, semigroup {semi_c:.2e}, "
            f"sphere norm {norm_s:.2e}, {elapsed:.1f}s")


def test_criterion_02_projection_isometry():
    t0 = time.perf_counter()
    m = Circle(1.0)
    x0 = np.array([0.0])
    coarse, fine = Partition.uniform(1), Partition.uniform(2)
    meas_c = CylinderMeasure(m, x0, coarse)
    meas_f = CylinderMeasure(m, x0, fine)
    worst_quad = 0.0
    worst_mc = 0.0
    for name in ("endpoint_distance", "sup_distance"):
        f = make_functional(name, m, coarse)
        lifted = lift_functional(f, fine)
        for p in (1, 2):
            qc = lp_norm_quadrature(meas_c, f, p=p, nodes=256)
            qf = lp_norm_quadrature(meas_f, lifted, p=p, nodes=256)
            worst_quad = max(worst_quad, abs(qc.estimate - qf.estimate))
            mc = lp_norm_mc(meas_c, f, p=p, samples=100000, seed=20)
            mf = lp_norm_mc(meas_f, lifted, p=p, samples=100000, seed=21)
            joint = np.hypot(mc.stderr, mf.stderr)
            worst_mc = max(worst_mc,
                           abs(mc.estimate - mf.estimate) / (4 * joint))
    elapsed = time.perf_counter() - t0
    ok = worst_quad < 1e-8 and worst_mc < 1.0 and elapsed < 30.0
    _report(2, "projection isometry", ok,
            f"quad diff {worst_quad:.2e}, MC diff {worst_mc:.2f} of "
            f"4 joint stderr, {elapsed:.1f}s")


def test_criterion_03_limit_formula_endpoint_oracle():
    t0 = time.perf_counter()
    chain = Partition.dyadic_chain(4, start=4)
    pf = make_path_functional("endpoint_legendre", degree=1)
    reports = limit_estimate(Sphere2(1.0), NORTH, pf, chain,
                             samples=100000, seed=30)
    devs = [abs(r.estimate - EXPECT_P1) / (4 * r.stderr) for r in reports]
    elapsed = time.perf_counter() - t0
    ok = max(devs) < 1.0 and elapsed < 120.0
    _report(3, "limit formula endpoint oracle", ok,
            f"worst level {max(devs):.2f} of 4 stderr vs e^-1, {elapsed:.1f}s")


def test_criterion_04_co_cauchy_exactness():
    m = Circle(1.0)
    x0 = np.array([0.0])
    chain = Partition.dyadic_chain(5, start=4)
    root = make_functional("sup_distance", m, chain[0])
    lifted = embed_family(root, chain)
    reps = co_cauchy_diagnostic(m, x0, lifted, samples=5000, seed=40)
    exact_zero = all(r.estimate == 0.0 and r.stderr == 0.0 for r in reps[1:])
    family = discretized_family(make_path_functional("sup_distance"), m, chain)
    diag = co_cauchy_diagnostic(m, x0, family, samples=60000, seed=41)
    decreasing = all(
        b.estimate < a.estimate + 2 * np.hypot(a.stderr, b.stderr)
        for a, b in zip(diag, diag[1:]))
    ok = exact_zero and decreasing
    _report(4, "co-Cauchy exactness", ok,
            f"lifted diagnostics zero: {exact_zero}, sup-distance "
            f"diagnostics decreasing n=4..64: {decreasing}")


def test_criterion_05_ito_stratonovich_identity():
    t0 = time.perf_counter()
    cases = [
        (Circle(1.0), np.array([0.0]), make_field("rotation")),
        (FlatTorus((1.0, 0.5)), np.zeros(2),
         make_field("gradient", scalar="coordinate", index=0)),
        (Sphere2(1.0), NORTH,
         make_field("gradient", scalar="coordinate", index=1)),
        (Euclidean(2), np.zeros(2),
         make_field("constant", components=[1.0, -0.5])),
    ]
    part = Partition.uniform(16)
    worst = 0.0
    for manifold, x0, field in cases:
        meas = CylinderMeasure(manifold, x0, part)
        pts = meas.sample_batch(np.random.default_rng(50), 10000)
        mid = midpoint_sum(field, manifold, pts, x0)
        left = ito_sum(field, manifold, pts, x0)
        cov = covariation_sum(field, manifold, pts, x0)
        worst = max(worst, float(np.max(np.abs(mid - left - 0.5 * cov))))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-12 and elapsed < 10.0
    _report(5, "Ito-Stratonovich identity", ok,
            f"worst residual {worst:.2e} over 1e4 skeletons x 4 manifolds, "
            f"{elapsed:.1f}s")


def test_criterion_06_exact_form_decay():
    t0 = time.perf_counter()
    m = Circle(1.0)
    x0 = np.array([0.0])
    r32 = exact_form_residual("coordinate", m, x0, Partition.uniform(32),
                              samples=200000, seed=60)
    r128 = exact_form_residual("coordinate", m, x0, Partition.uniform(128),
                               samples=200000, seed=61)
    ratio = r32.estimate / r128.estimate
    elapsed = time.perf_counter() - t0
    ok = 2.5 <= ratio <= 6.0 and elapsed < 120.0
    _report(6, "exact-form decay", ok,
            f"residual ratio n=32/n=128 = {ratio:.3f} (window [2.5, 6]), "
            f"{elapsed:.1f}s")


def test_criterion_07_development_exactness():
    t0 = time.perf_counter()
    m = Sphere2(1.0)
    part = Partition.uniform(64)
    rng = np.random.default_rng(70)
    deltas = sample_lambda0_increments(part, 2, rng, 1000)
    worst_energy = 0.0
    worst_sup = 0.0
    for d in deltas:
        flat = flat_path_from_increments(part, d)
        curved = develop(flat, m, NORTH)
        ef = energy_flat(flat)
        worst_energy = max(worst_energy, abs(energy_curved(curved) - ef) / ef)
        back = antidevelop(curved)
        worst_sup = max(worst_sup,
                        float(np.max(np.abs(back.vertices - flat.vertices))))
    elapsed = time.perf_counter() - t0
    ok = worst_energy < 1e-10 and worst_sup < 1e-9 and elapsed < 30.0
    _report(7, "development exactness", ok,
            f"energy rel err {worst_energy:.2e}, round-trip sup "
            f"{worst_sup:.2e} over 1e3 paths, {elapsed:.1f}s")


def test_criterion_08_flat_factor_measure_identity():
    t0 = time.perf_counter()
    m = Circle(1.0)
    x0 = np.array([0.0])
    sampler = GeometricMeasureSampler(m, x0, Partition.uniform(32))
    verts = sampler.sample_vertices(np.random.default_rng(80), 100000)
    angles = np.mod(verts[:, -1, 0], 2 * np.pi)
    bins = 64
    edges = np.linspace(0.0, 2 * np.pi, bins + 1)
    emp = np.histogram(angles, bins=edges)[0] / angles.size
    # exact bin masses from the wrapped-Gaussian kernel at time 1
    ev = KernelEvaluator(m)
    sub = 50
    grid = (edges[:-1, None]
            + (np.arange(sub)[None, :] + 0.5) * (2 * np.pi / bins / sub))
    dens = ev.kernel(1.0, x0, grid.reshape(-1, 1)).reshape(bins, sub)
    exact = dens.mean(axis=1) * (2 * np.pi / bins)
    tv = 0.5 * float(np.sum(np.abs(emp - exact)))
    elapsed = time.perf_counter() - t0
    ok = tv < 0.02 and elapsed < 60.0
    _report(8, "flat-factor measure identity", ok,
            f"TV over 64 bins {tv:.4f} (< 0.02), {elapsed:.1f}s")


def test_criterion_09_geometric_limit_formula():
    t0 = time.perf_counter()
    m = Sphere2(1.0)
    chain = [Partition.uniform(n) for n in (4, 16, 64, 256)]
    pf = make_path_functional("endpoint_legendre", degree=1)
    geo = geometric_limit_estimate(m, NORTH, pf, chain, 100000,
                                   seed=90, workers=1)
    errs = [abs(r.estimate - EXPECT_P1) for r in geo]
    non_increasing = all(
        e2 < e1 + 2 * np.hypot(a.stderr, b.stderr)
        for e1, e2, a, b in zip(errs, errs[1:], geo, geo[1:]))
    final_ok = errs[-1] < 5e-3 + 4 * geo[-1].stderr
    cyl = limit_estimate(m, NORTH, pf, chain, samples=100000, seed=90)
    joint = np.hypot(geo[-1].stderr, cyl[-1].stderr)
    cross = abs(geo[-1].estimate - cyl[-1].estimate)
    cross_ok = cross < 4 * joint
    elapsed = time.perf_counter() - t0
    ok = non_increasing and final_ok and cross_ok and elapsed < 300.0
    _report(9, "geometric limit formula", ok,
            f"errors {['%.4f' % e for e in errs]}, final vs e^-1 within "
            f"{errs[-1]:.4f} <= {5e-3 + 4 * geo[-1].stderr:.4f}, cross-scheme "
            f"diff {cross:.2e} (< {4 * joint:.2e}), {elapsed:.0f}s")


def test_criterion_10_reproducibility():
    m = Sphere2(1.0)
    part = Partition.uniform(8)
    meas = CylinderMeasure(m, NORTH, part)
    f = make_functional("endpoint_legendre", m, part, degree=1)
    a = expectation_mc(meas, f, 20000, seed=100, workers=4)
    b = expectation_mc(meas, f, 20000, seed=100, workers=4)
    cyl_ok = a.same_numbers(b) and a.to_json() != ""
    pf = make_path_functional("endpoint_legendre", degree=1)
    chain = Partition.dyadic_chain(3, start=4)
    g1 = geometric_limit_estimate(m, NORTH, pf, chain, 5000, seed=101,
                                  workers=2)
    g2 = geometric_limit_estimate(m, NORTH, pf, chain, 5000, seed=101,
                                  workers=2)
    geo_ok = all(r1.same_numbers(r2) for r1, r2 in zip(g1, g2))
    r1 = exact_form_residual("coordinate", m, NORTH, part,
                             samples=5000, seed=102)
    r2 = exact_form_residual("coordinate", m, NORTH, part,
                             samples=5000, seed=102)
    strat_ok = r1.same_numbers(r2)
    ok = cyl_ok and geo_ok and strat_ok
    _report(10, "reproducibility", ok,
            f"cylinder {cyl_ok}, geometric {geo_ok}, stratonovich {strat_ok}")
