"""Limit scheme for path functionals: discretization through piecewise
geodesic interpolation, consistent (co-Cauchy) families over refinement
chains, their diagnostics, and the per-level limit estimator.

A path functional here acts on whole piecewise-geodesic paths but is
computed from vertex batches; its discretization over a partition T is
the cylinder functional obtained by interpolating a skeleton
geodesically and evaluating the path functional on the result.
"""

import numpy as np

from .cylinder import (CylinderFunctional, CylinderMeasure, PartitionError,
                       expectation_mc, expectation_quadrature,
                       lift_functional, lp_norm_mc, lp_norm_quadrature,
                       register_functional)
from .manifolds import Circle, Euclidean, FlatTorus, GeometryError, Sphere2


class PathFunctional:
    """Functional of piecewise-geodesic paths, evaluated on vertex batches.

    evaluate(manifold, partition, vertices, x0) takes a (N, n+1, point_dim)
    batch whose first column is the start point and returns (values, ok)
    with ok False where a segment is geometrically degenerate (antipodal
    consecutive vertices, so the interpolating geodesic is not unique).
    """

    def __init__(self, name, fn, params=None):
        self.name = name
        self.fn = fn
        self.params = dict(params or {})

    def evaluate(self, manifold, partition, vertices, x0):
        vals, ok = self.fn(manifold, partition,
                           np.asarray(vertices, dtype=np.float64),
                           np.asarray(x0, dtype=np.float64))
        return np.asarray(vals, dtype=np.float64), np.asarray(ok, dtype=bool)

    # alias used by the geometric estimator
    def evaluate_vertices(self, manifold, partition, vertices, x0):
        return self.evaluate(manifold, partition, vertices, x0)

    def __repr__(self):
        return f"PathFunctional({self.name!r}, params={self.params})"


PATH_FUNCTIONALS = {}


def register_path_functional(name):
    def deco(builder):
        PATH_FUNCTIONALS[name] = builder
        return builder
    return deco


def make_path_functional(name, **params):
    try:
        builder = PATH_FUNCTIONALS[name]
    except KeyError:
        raise ValueError(f"unknown path functional {name!r}; "
                         f"registered: {sorted(PATH_FUNCTIONALS)}") from None
    return builder(**params)


def _all_ok(vertices):
    return np.ones(vertices.shape[0], dtype=bool)


def _segment_ok(manifold, vertices):
    """False where consecutive vertices are (numerically) antipodal."""
    a, b = vertices[:, :-1, :], vertices[:, 1:, :]
    if isinstance(manifold, Euclidean):
        return _all_ok(vertices)
    if isinstance(manifold, (Circle, FlatTorus)):
        circ = (2.0 * np.pi * np.asarray(manifold.radii)
                if isinstance(manifold, FlatTorus)
                else np.array([2.0 * np.pi * manifold.radius]))
        delta = np.mod(b - a + 0.5 * circ, circ) - 0.5 * circ
        return np.all(0.5 * circ - np.abs(delta) > 1e-12 * circ, axis=(1, 2))
    if isinstance(manifold, Sphere2):
        c = np.sum(a * b, axis=-1) / manifold.radius ** 2
        return np.all(1.0 + c > 1e-12, axis=1)
    raise GeometryError(f"no interpolation rule for {manifold!r}")


@register_path_functional("endpoint_distance")
def _pf_endpoint_distance():
    def fn(manifold, partition, vertices, x0):
        return manifold.distance(x0, vertices[:, -1, :]), _all_ok(vertices)
    return PathFunctional("endpoint_distance", fn)


@register_path_functional("endpoint_coordinate")
def _pf_endpoint_coordinate(index=0):
    index = int(index)

    def fn(manifold, partition, vertices, x0):
        return manifold.embed(vertices[:, -1, :])[:, index], _all_ok(vertices)
    return PathFunctional("endpoint_coordinate", fn, {"index": index})


@register_path_functional("endpoint_legendre")
def _pf_endpoint_legendre(degree=1):
    degree = int(degree)

    def fn(manifold, partition, vertices, x0):
        end = vertices[:, -1, :]
        if isinstance(manifold, Sphere2):
            c = np.clip(np.sum(end * x0, axis=-1) / manifold.radius ** 2, -1.0, 1.0)
            return (np.polynomial.legendre.Legendre.basis(degree)(c),
                    _all_ok(vertices))
        if isinstance(manifold, Circle):
            ang = manifold.distance(x0, end)
            return np.cos(degree * ang / manifold.radius), _all_ok(vertices)
        raise GeometryError("endpoint_legendre needs a circle or sphere")
    return PathFunctional("endpoint_legendre", fn, {"degree": degree})


@register_path_functional("energy")
def _pf_energy():
    """Energy of the geodesic interpolation: sum d(x_{i-1}, x_i)^2 / dt_i."""
    def fn(manifold, partition, vertices, x0):
        gaps = partition.gaps
        d = manifold.distance(vertices[:, :-1, :], vertices[:, 1:, :])
        return np.sum(d * d / gaps, axis=1), _segment_ok(manifold, vertices)
    return PathFunctional("energy", fn)


@register_path_functional("winding")
def _pf_winding(factor=0):
    factor = int(factor)

    def fn(manifold, partition, vertices, x0):
        if not isinstance(manifold, (Circle, FlatTorus)):
            raise GeometryError("winding needs a flat factor")
        radius = (manifold.radius if isinstance(manifold, Circle)
                  else manifold.radii[factor])
        circ = 2.0 * np.pi * radius
        s = vertices[:, :, factor]
        delta = np.mod(np.diff(s, axis=1) + 0.5 * circ, circ) - 0.5 * circ
        return np.sum(delta, axis=1) / circ, _segment_ok(manifold, vertices)
    return PathFunctional("winding", fn, {"factor": factor})


# -- sup distance from the start point -----------------------------------

def _sup_distance_circle(manifold, vertices, x0):
    """Exact sup of |position - x0| along minimal-arc interpolation.

    Per segment the unwrapped coordinate relative to x0 moves linearly;
    the sup is pi r when the segment crosses the antipode, else the
    larger endpoint distance.
    """
    circ = 2.0 * np.pi * manifold.radius
    half = 0.5 * circ
    rel = np.mod(vertices[:, :, 0] - x0[0] + half, circ) - half   # (N, n+1)
    u = rel[:, :-1]
    delta = np.mod(np.diff(vertices[:, :, 0], axis=1) + half, circ) - half
    end = u + delta
    crossed = np.abs(end) > half
    seg_sup = np.where(crossed, half, np.maximum(np.abs(u), np.abs(end)))
    return np.max(seg_sup, axis=1)


def _sup_distance_sphere(manifold, vertices, x0):
    """Exact segment sup via the great-circle cosine R cos(tau phi - delta)."""
    r = manifold.radius
    xu = x0 / r
    a = vertices[:, :-1, :] / r
    b = vertices[:, 1:, :] / r
    c_ab = np.clip(np.sum(a * b, axis=-1), -1.0, 1.0)
    phi = np.arccos(c_ab)                                         # (N, n)
    # unit tangent at a toward b; zero-length segments keep A only
    u = b - c_ab[..., None] * a
    un = np.linalg.norm(u, axis=-1)
    safe = np.maximum(un, 1e-300)
    u = u / safe[..., None]
    big_a = np.sum(a * xu, axis=-1)
    big_b = np.where(un > 1e-14, np.sum(u * xu, axis=-1), 0.0)
    amp = np.sqrt(big_a ** 2 + big_b ** 2)
    delta = np.arctan2(big_b, big_a)
    crossed = phi - delta >= np.pi
    end_c = np.minimum(big_a, amp * np.cos(phi - delta))
    c_min = np.where(crossed, -amp, end_c)
    seg_sup = r * np.arccos(np.clip(c_min, -1.0, 1.0))
    return np.max(seg_sup, axis=1)


def _sup_distance_sampled(manifold, partition, vertices, x0, nodes=33):
    """Dense sampling fallback (flat torus): geodesic interpolation is
    linear per wrapped coordinate, sampled at fixed nodes per segment."""
    circ = 2.0 * np.pi * np.asarray(manifold.radii)
    a = vertices[:, :-1, :]
    raw = np.diff(vertices, axis=1)
    delta = np.mod(raw + 0.5 * circ, circ) - 0.5 * circ
    taus = np.linspace(0.0, 1.0, nodes)
    best = np.zeros(vertices.shape[0])
    for tau in taus:
        pos = manifold.normalize(a + tau * delta)      # (N, n, dim)
        d = manifold.distance(pos, np.broadcast_to(x0, pos.shape))
        best = np.maximum(best, np.max(d, axis=1))
    return best


@register_path_functional("sup_distance")
def _pf_sup_distance(nodes=33):
    """Sup over the whole interpolated path of the distance to the start."""
    nodes = int(nodes)

    def fn(manifold, partition, vertices, x0):
        ok = _segment_ok(manifold, vertices)
        if isinstance(manifold, Circle):
            return _sup_distance_circle(manifold, vertices, x0), ok
        if isinstance(manifold, Sphere2):
            return _sup_distance_sphere(manifold, vertices, x0), ok
        if isinstance(manifold, Euclidean):
            d = manifold.distance(np.broadcast_to(x0, vertices.shape), vertices)
            return np.max(d, axis=1), ok
        if isinstance(manifold, FlatTorus):
            return _sup_distance_sampled(manifold, partition, vertices, x0,
                                         nodes), ok
        raise GeometryError(f"sup_distance unsupported on {manifold!r}")
    return PathFunctional("sup_distance", fn, {"nodes": nodes})


# -- discretization and families -----------------------------------------

def discretize(path_functional, manifold, partition):
    """f_T: evaluate the path functional on the geodesic interpolation of
    a skeleton. Degenerate skeletons (non-unique interpolating geodesic)
    keep their branch value but are counted in params['degenerate'].
    """
    counts = {"degenerate": 0, "evaluated": 0}

    def fn(points, x0):
        verts = np.concatenate(
            [np.broadcast_to(x0, points[:, :1, :].shape), points], axis=1)
        vals, ok = path_functional.evaluate(manifold, partition, verts, x0)
        counts["evaluated"] += int(ok.size)
        counts["degenerate"] += int(np.sum(~ok))
        return vals

    return CylinderFunctional(
        name=path_functional.name, manifold=manifold, partition=partition,
        fn=fn, params={**path_functional.params, "interpolation": "geodesic",
                       "counts": counts})


@register_functional("sup_distance")
def _cyl_sup_distance(manifold, partition, nodes=33):
    return discretize(make_path_functional("sup_distance", nodes=nodes),
                      manifold, partition)


def degenerate_fraction(functional):
    counts = functional.params.get("counts", {})
    done = counts.get("evaluated", 0)
    return counts.get("degenerate", 0) / done if done else 0.0


class FunctionalFamily:
    """One cylinder functional per chain level, with provenance."""

    def __init__(self, chain, members, provenance="custom"):
        if len(chain) != len(members):
            raise PartitionError("family and chain lengths differ")
        for partition, member in zip(chain, members):
            if member.partition != partition:
                raise PartitionError("family member does not match its chain slot")
        self.chain = list(chain)
        self.members = list(members)
        self.provenance = provenance

    def __len__(self):
        return len(self.members)

    def __getitem__(self, k):
        return self.members[k]

    def __iter__(self):
        return iter(self.members)


def discretized_family(path_functional, manifold, chain):
    return FunctionalFamily(
        chain, [discretize(path_functional, manifold, p) for p in chain],
        provenance="discretized-path-functional")


def embed_family(functional, chain):
    """psi_R: embed one cylinder functional as a consistent family over a
    chain whose root carries the functional; levels below the root get the
    zero functional. Consecutive diagnostics past the root are exactly 0.
    """
    root = functional.partition
    members = []
    for partition in chain:
        if root.is_subset_of(partition):
            members.append(functional if partition == root
                           else lift_functional(functional, partition))
        else:
            from .cylinder import make_functional
            members.append(make_functional("constant", functional.manifold,
                                           partition, value=0.0))
    return FunctionalFamily(chain, members, provenance="lifted-from-root")


def co_cauchy_diagnostic(manifold, x0, family, chain=None, p=1,
                         samples=20000, seed=0, workers=1, nodes=None):
    """delta_k = || pi* f_k - f_{k+1} ||_{Lp(mu^{T_{k+1}})} for consecutive
    chain levels. Uses quadrature when nodes is given (flat factors only),
    Monte Carlo otherwise. Returns one report per consecutive pair; for
    embedded families the integrand is identically zero, so the estimates
    are exactly zero, not just statistically small.
    """
    if isinstance(family, FunctionalFamily):
        chain = family.chain
    if chain is None:
        raise PartitionError("a chain is required for a bare member list")
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    if len(family) != len(chain):
        raise PartitionError("family and chain lengths differ")
    reports = []
    for k in range(len(chain) - 1):
        coarse_f, fine_f = family[k], family[k + 1]
        if not chain[k].is_subset_of(chain[k + 1]):
            raise PartitionError("chain is not nested")
        lifted = lift_functional(coarse_f, chain[k + 1])

        def diff_fn(points, x0_, a=lifted, b=fine_f):
            return a.fn(points, x0_) - b.fn(points, x0_)

        diff = CylinderFunctional(name=f"delta[{coarse_f.name}]",
                                  manifold=manifold, partition=chain[k + 1],
                                  fn=diff_fn)
        measure = CylinderMeasure(manifold, x0, chain[k + 1])
        if nodes is not None:
            rep = lp_norm_quadrature(measure, diff, p=p, nodes=nodes)
        else:
            rep = lp_norm_mc(measure, diff, p=p, samples=samples,
                             seed=None if seed is None else seed + k,
                             workers=workers)
        rep.extra["level"] = k
        reports.append(rep)
    return reports


def limit_estimate(manifold, x0, functional, chain=None, samples=20000,
                   seed=0, workers=1, nodes=None):
    """Estimates of E_{mu^T}[f_T] along the refinement chain, one report
    per level. The functional may be a PathFunctional (discretized per
    level) or a FunctionalFamily. No convergence rate is fitted; the
    final-level value stands as the limit estimate and the table records
    the per-level values so stabilization can be judged.
    """
    if isinstance(functional, FunctionalFamily):
        family = functional
        chain = family.chain
    else:
        if chain is None:
            raise PartitionError("a chain is required for a path functional")
        family = discretized_family(functional, manifold, chain)
    if len(chain) < 3:
        raise ValueError("refinement chain needs at least 3 levels")
    for k in range(len(chain) - 1):
        if not chain[k].is_subset_of(chain[k + 1]):
            raise PartitionError("chain is not nested")
    budgets = [samples] * len(chain) if np.isscalar(samples) else list(samples)
    reports = []
    for level, (partition, budget) in enumerate(zip(chain, budgets)):
        member = family[level]
        measure = CylinderMeasure(manifold, x0, partition)
        if nodes is not None:
            rep = expectation_quadrature(measure, member, nodes=nodes)
        else:
            rep = expectation_mc(measure, member, budget,
                                 None if seed is None else seed + level,
                                 workers)
        rep.scheme = "cylinder"
        rep.extra["level"] = level
        rep.extra["degenerate_fraction"] = degenerate_fraction(member)
        reports.append(rep)
    return reports


def extrapolated_value(reports):
    """The limit estimate is the finest-level value; no rate is assumed."""
    return reports[-1].estimate


def convergence_table(reports):
    """Plain-text per-level table: n, mesh, estimate, stderr, change."""
    lines = [f"{'n':>6} {'mesh':>10} {'estimate':>14} {'stderr':>10} {'change':>12}"]
    prev = None
    for rep in reports:
        change = "" if prev is None else f"{rep.estimate - prev:+.3e}"
        lines.append(f"{rep.n:>6} {rep.mesh:>10.4g} {rep.estimate:>14.8f} "
                     f"{rep.stderr:>10.2e} {change:>12}")
        prev = rep.estimate
    return "\n".join(lines)
