"""Finite-dimensional probability spaces (M^T, mu_x0^T): product
heat-kernel densities over a partition, skeleton sampling, projections
between nested partitions, functional lifting, and the two expectation
engines (Monte Carlo everywhere, tensor-grid trapezoid quadrature as an
independent oracle on flat factors).
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .heatkernel import KernelEvaluator
from .manifolds import Circle, Euclidean, FlatTorus, Manifold, Sphere2
from .report import EstimateReport

MC_CHUNK = 16384          # fixed so results are seed-reproducible
QUADRATURE_MAX_POINTS = 3_000_000


class PartitionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Partition:
    """Strictly increasing time grid 0 = t_0 < ... < t_n = 1."""
    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        if t.ndim != 1 or t.size < 2:
            raise PartitionError("partition needs at least two times")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise PartitionError("partition must start at 0 and end at 1")
        if np.any(np.diff(t) <= 0):
            raise PartitionError("partition times must be strictly increasing")
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, n):
        return cls(np.linspace(0.0, 1.0, n + 1))

    @classmethod
    def dyadic_chain(cls, levels, start=2):
        """Nested uniform partitions n = start, 2*start, ..., start*2^(levels-1)."""
        return [cls.uniform(start * 2 ** k) for k in range(levels)]

    @property
    def n(self):
        return self.times.size - 1

    @property
    def gaps(self):
        return np.diff(self.times)

    @property
    def mesh(self):
        return float(np.max(self.gaps))

    def refined(self):
        """Insert the midpoint of every segment."""
        mids = 0.5 * (self.times[:-1] + self.times[1:])
        return Partition(np.sort(np.concatenate([self.times, mids])))

    def is_subset_of(self, other, tol=1e-12):
        return all(np.any(np.abs(other.times - t) <= tol) for t in self.times)

    def indices_in(self, finer, tol=1e-12):
        """Positions of this partition's times (past t=0) inside a finer one,
        as indices into the finer point list (which excludes t=0)."""
        idx = []
        for t in self.times[1:]:
            hits = np.nonzero(np.abs(finer.times[1:] - t) <= tol)[0]
            if hits.size != 1:
                raise PartitionError("partitions are not nested")
            idx.append(int(hits[0]))
        return np.asarray(idx, dtype=np.intp)

    def __eq__(self, other):
        return isinstance(other, Partition) and np.array_equal(self.times, other.times)

    def __repr__(self):
        return f"Partition(n={self.n}, mesh={self.mesh:g})"


@dataclass
class PathSkeleton:
    """One manifold point per partition time past t=0; x0 is implicit."""
    manifold: Manifold
    partition: Partition
    points: np.ndarray   # (n, point_dim)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (self.partition.n, self.manifold.point_dim):
            raise PartitionError(
                f"skeleton needs shape {(self.partition.n, self.manifold.point_dim)}, "
                f"got {pts.shape}")
        self.manifold.check_point(pts, tol=1e-9)
        self.points = pts


@dataclass
class CylinderFunctional:
    """A functional of skeleton points, evaluated on sample batches.

    fn(points, x0) maps a (N, n, point_dim) batch and base point to (N,).
    """
    name: str
    manifold: Manifold
    partition: Partition
    fn: callable
    params: dict = field(default_factory=dict)

    def evaluate(self, points, x0):
        return np.asarray(self.fn(np.asarray(points, dtype=np.float64),
                                  np.asarray(x0, dtype=np.float64)))

    def __call__(self, points, x0):
        return self.evaluate(points, x0)


class CylinderMeasure:
    """mu_x0^T: the product heat-kernel probability on M^(T \\ {0})."""

    def __init__(self, manifold, x0, partition, evaluator=None):
        self.manifold = manifold
        self.x0 = manifold.normalize(np.asarray(x0, dtype=np.float64))
        manifold.check_point(self.x0)
        self.partition = partition
        self.evaluator = evaluator or KernelEvaluator(manifold)

    def density(self, skeleton_or_points):
        """Product of transition kernels along the skeleton; batched."""
        pts = skeleton_or_points
        if isinstance(pts, PathSkeleton):
            if pts.partition != self.partition:
                raise PartitionError("skeleton partition does not match the measure")
            pts = pts.points
        pts = np.asarray(pts, dtype=np.float64)
        gaps = self.partition.gaps
        prev = np.broadcast_to(self.x0, pts[..., 0, :].shape)
        out = 1.0
        for i in range(self.partition.n):
            out = out * self.evaluator.kernel(gaps[i], prev, pts[..., i, :])
            prev = pts[..., i, :]
        return out

    def sample_batch(self, rng, count):
        """(count, n, point_dim) array of skeleton samples."""
        m = self.manifold
        gaps = self.partition.gaps
        if isinstance(m, (Circle, FlatTorus, Euclidean)):
            steps = rng.normal(size=(count, self.partition.n, m.point_dim))
            steps *= np.sqrt(gaps)[None, :, None]
            return m.normalize(self.x0 + np.cumsum(steps, axis=1))
        pts = np.empty((count, self.partition.n, m.point_dim))
        cur = np.broadcast_to(self.x0, (count, m.point_dim))
        for i in range(self.partition.n):
            cur = self.evaluator.sample_transition(gaps[i], cur, rng)
            pts[:, i, :] = cur
        return pts

    def sample_skeleton(self, rng):
        return PathSkeleton(self.manifold, self.partition,
                            self.sample_batch(rng, 1)[0])


# -- projections and lifting -------------------------------------------

def project_points(points, fine, coarse):
    """Restrict a (.., n', point_dim) batch on the fine partition to the
    coarse one (keeps the points at coarse times)."""
    idx = coarse.indices_in(fine)
    return np.asarray(points)[..., idx, :]


def project(skeleton, coarse):
    if not coarse.is_subset_of(skeleton.partition):
        raise PartitionError("target partition is not a subset")
    return PathSkeleton(skeleton.manifold, coarse,
                        project_points(skeleton.points, skeleton.partition, coarse))


def lift_functional(functional, fine):
    """pi*_{TT'}: compose with the projection onto the coarse partition."""
    coarse = functional.partition
    if not coarse.is_subset_of(fine):
        raise PartitionError("cannot lift to a non-refining partition")
    idx = coarse.indices_in(fine)

    def lifted(points, x0):
        return functional.fn(points[..., idx, :], x0)

    return CylinderFunctional(name=functional.name, manifold=functional.manifold,
                              partition=fine, fn=lifted,
                              params={**functional.params, "lifted_from_n": coarse.n})


# -- expectation engines -----------------------------------------------

def expectation_mc(measure, functional, samples, seed, workers=1,
                   chunk=MC_CHUNK, transform=None):
    """Monte-Carlo expectation of a cylinder functional under mu_x0^T.

    Deterministic for fixed (seed, workers): each worker owns a spawned
    generator stream and a fixed share of the budget; accumulation uses
    numpy's pairwise reduction per chunk.
    """
    if samples <= 0:
        raise ValueError("sample count must be positive")
    if functional.partition != measure.partition:
        raise PartitionError("functional partition does not match the measure")
    t0 = time.perf_counter()
    streams = np.random.SeedSequence(seed).spawn(workers)
    shares = [samples // workers + (1 if w < samples % workers else 0)
              for w in range(workers)]
    total = 0.0
    total_sq = 0.0
    for stream, share in zip(streams, shares):
        rng = np.random.default_rng(stream)
        left = share
        while left > 0:
            k = min(chunk, left)
            pts = measure.sample_batch(rng, k)
            vals = functional.evaluate(pts, measure.x0)
            if transform is not None:
                vals = transform(vals)
            total += float(np.sum(vals))
            total_sq += float(np.sum(vals * vals))
            left -= k
    mean = total / samples
    var = max(0.0, (total_sq - samples * mean * mean) / max(1, samples - 1))
    return EstimateReport(
        estimate=mean, stderr=float(np.sqrt(var / samples)), samples=samples,
        n=measure.partition.n, mesh=measure.partition.mesh,
        manifold=measure.manifold.config(), scheme="mc",
        functional=functional.name, seed=seed, workers=workers,
        wall_time=time.perf_counter() - t0)


def _flat_grid(manifold, partition, nodes):
    """Tensor grid over (angle circle(s))^n plus the cell measure."""
    if isinstance(manifold, Circle):
        circs = [manifold.circumference]
    elif isinstance(manifold, FlatTorus):
        circs = list(2.0 * np.pi * np.asarray(manifold.radii))
    else:
        raise ValueError("quadrature oracle supports circle and torus only")
    dims = partition.n * len(circs)
    if nodes ** dims > QUADRATURE_MAX_POINTS:
        raise ValueError(
            f"quadrature grid {nodes}^{dims} exceeds {QUADRATURE_MAX_POINTS} points")
    axes = [np.linspace(0.0, c, nodes, endpoint=False)
            for _ in range(partition.n) for c in circs]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    cell = float(np.prod([c / nodes for _ in range(partition.n) for c in circs]))
    return pts.reshape(-1, partition.n, len(circs)), cell


def expectation_quadrature(measure, functional, nodes=64, transform=None,
                           richardson=True):
    """Deterministic tensor-trapezoid expectation on flat factors.

    The reported stderr is 0; the Richardson grid-halving difference is
    stored in extra['grid_error_bound'].
    """
    if functional.partition != measure.partition:
        raise PartitionError("functional partition does not match the measure")
    t0 = time.perf_counter()

    def integral(q):
        pts, cell = _flat_grid(measure.manifold, measure.partition, q)
        vals = functional.evaluate(pts, measure.x0)
        if transform is not None:
            vals = transform(vals)
        dens = measure.density(pts)
        return float(np.sum(vals * dens)) * cell

    value = integral(nodes)
    bound = abs(value - integral(nodes // 2)) if richardson and nodes >= 4 else 0.0
    return EstimateReport(
        estimate=value, stderr=0.0, samples=0,
        n=measure.partition.n, mesh=measure.partition.mesh,
        manifold=measure.manifold.config(), scheme="quadrature",
        functional=functional.name, seed=None, workers=1,
        wall_time=time.perf_counter() - t0,
        extra={"nodes": nodes, "grid_error_bound": bound})


def lp_norm_mc(measure, functional, p, samples, seed, workers=1):
    """MC estimate of the L^p(mu^T) norm with a delta-method stderr."""
    rep = expectation_mc(measure, functional, samples, seed, workers,
                         transform=lambda v: np.abs(v) ** p)
    moment = max(rep.estimate, 0.0)
    norm = moment ** (1.0 / p)
    if moment > 0:
        se = rep.stderr * norm / (p * moment)
    else:
        se = rep.stderr
    rep.estimate, rep.stderr = norm, se
    rep.extra["p"] = p
    return rep


def lp_norm_quadrature(measure, functional, p, nodes=64):
    rep = expectation_quadrature(measure, functional, nodes,
                                 transform=lambda v: np.abs(v) ** p)
    rep.estimate = max(rep.estimate, 0.0) ** (1.0 / p)
    rep.extra["p"] = p
    return rep


# -- built-in functionals ----------------------------------------------

FUNCTIONALS = {}


def register_functional(name):
    def deco(builder):
        FUNCTIONALS[name] = builder
        return builder
    return deco


def make_functional(name, manifold, partition, **params):
    try:
        builder = FUNCTIONALS[name]
    except KeyError:
        raise ValueError(f"unknown functional {name!r}; "
                         f"registered: {sorted(FUNCTIONALS)}") from None
    return builder(manifold, partition, **params)


@register_functional("constant")
def _constant(manifold, partition, value=1.0):
    value = float(value)

    def fn(points, x0):
        return np.full(points.shape[0], value)

    return CylinderFunctional("constant", manifold, partition, fn, {"value": value})


@register_functional("endpoint_coordinate")
def _endpoint_coordinate(manifold, partition, index=0):
    index = int(index)

    def fn(points, x0):
        return manifold.embed(points[:, -1, :])[:, index]

    return CylinderFunctional("endpoint_coordinate", manifold, partition, fn,
                              {"index": index})


@register_functional("endpoint_distance")
def _endpoint_distance(manifold, partition):
    def fn(points, x0):
        return manifold.distance(x0, points[:, -1, :])

    return CylinderFunctional("endpoint_distance", manifold, partition, fn)


@register_functional("endpoint_legendre")
def _endpoint_legendre(manifold, partition, degree=1):
    """P_degree(cos of the endpoint angle from x0); spectral test observable.

    On the sphere E[P_l] = exp(-l(l+1) t / (2 r^2)); on the circle the
    analogue cos(k d / r) has E = exp(-k^2 t / (2 r^2)).
    """
    degree = int(degree)

    def fn(points, x0):
        if isinstance(manifold, Sphere2):
            c = np.clip(np.sum(points[:, -1, :] * x0, axis=-1) / manifold.radius ** 2,
                        -1.0, 1.0)
            return np.polynomial.legendre.Legendre.basis(degree)(c)
        ang = manifold.distance(x0, points[:, -1, :])
        if isinstance(manifold, Circle):
            return np.cos(degree * ang / manifold.radius)
        raise ValueError("endpoint_legendre needs a circle or sphere")

    return CylinderFunctional("endpoint_legendre", manifold, partition, fn,
                              {"degree": degree})


@register_functional("energy")
def _energy(manifold, partition):
    """Discretized path energy sum d(x_{i-1}, x_i)^2 / dt_i."""
    gaps = partition.gaps

    def fn(points, x0):
        prev = np.broadcast_to(x0, points[:, 0, :].shape)
        total = np.zeros(points.shape[0])
        for i in range(partition.n):
            total += manifold.distance(prev, points[:, i, :]) ** 2 / gaps[i]
            prev = points[:, i, :]
        return total

    return CylinderFunctional("energy", manifold, partition, fn)


@register_functional("indicator")
def _indicator(manifold, partition, time, center, radius):
    """Indicator of the cylinder set {d(x_t, center) < radius}."""
    time = float(time)
    hits = np.nonzero(np.abs(partition.times[1:] - time) <= 1e-12)[0]
    if hits.size != 1:
        raise ValueError(f"indicator time {time} is not a partition point")
    idx = int(hits[0])
    center_arr = manifold.normalize(np.asarray(center, dtype=np.float64))
    radius = float(radius)

    def fn(points, x0):
        return (manifold.distance(points[:, idx, :], center_arr) < radius).astype(float)

    return CylinderFunctional("indicator", manifold, partition, fn,
                              {"time": time, "center": list(np.atleast_1d(center_arr)),
                               "radius": radius})


@register_functional("winding")
def _winding(manifold, partition, factor=0):
    """Net winding of the minimal-arc interpolation around flat factor j."""
    factor = int(factor)
    if not isinstance(manifold, (Circle, FlatTorus)):
        raise ValueError("winding needs a flat factor")
    radius = manifold.radius if isinstance(manifold, Circle) else manifold.radii[factor]
    circ = 2.0 * np.pi * radius

    def fn(points, x0):
        s = np.concatenate([np.broadcast_to(x0[factor], (points.shape[0], 1)),
                            points[:, :, factor]], axis=1)
        delta = np.mod(np.diff(s, axis=1) + 0.5 * circ, circ) - 0.5 * circ
        return np.sum(delta, axis=1) / circ

    return CylinderFunctional("winding", manifold, partition, fn, {"factor": factor})
