"""Cartan development: piecewise-linear paths in R^m, their Gaussian
measure, rolling onto the manifold (piecewise geodesics), the inverse
rolling, the transfer isomorphism between the two path spaces, and the
geometric (Andersson-Driver) limit estimator.

The geometric measure on piecewise-geodesic paths is never evaluated as
a density: it is sampled exactly as the development pushforward of
independent Gaussian increments, which is what the measure-preservation
identities of the rolling map guarantee.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import backends
from .cylinder import MC_CHUNK, Partition, PartitionError
from .manifolds import Circle, Euclidean, FlatTorus, GeometryError, Sphere2
from .report import EstimateReport


@dataclass
class FlatPiecewisePath:
    """Piecewise-linear path in R^m: vertices at partition times, alpha(0)=0."""
    partition: Partition
    vertices: np.ndarray   # (n+1, m)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != self.partition.n + 1:
            raise PartitionError("flat path needs one vertex per partition time")
        if np.any(v[0] != 0.0):
            raise GeometryError("flat path must start at the origin")
        self.vertices = v

    @property
    def increments(self):
        return np.diff(self.vertices, axis=0)

    @property
    def velocities(self):
        return self.increments / self.partition.gaps[:, None]

    def energy(self):
        return energy_flat(self)


@dataclass
class CurvedPiecewisePath:
    """Piecewise-geodesic path: vertices, per-segment initial velocities,
    and the parallel-transported orthonormal frame at every vertex."""
    manifold: object
    partition: Partition
    vertices: np.ndarray     # (n+1, point_dim)
    velocities: np.ndarray   # (n, tangent_dim), at segment starts
    frames: np.ndarray       # (n+1, dim, tangent_dim)

    def energy(self):
        return energy_curved(self)


def energy_flat(path):
    """Sum |delta_i|^2 / dt_i for the piecewise-linear path."""
    inc = path.increments
    return float(np.sum(np.sum(inc * inc, axis=1) / path.partition.gaps))


def energy_curved(path):
    """Sum |v_i|^2 dt_i: geodesic segments have constant speed."""
    v = np.asarray(path.velocities)
    return float(np.sum(np.sum(v * v, axis=1) * path.partition.gaps))


# -- development / anti-development ------------------------------------

def _initial_frame(manifold, x0):
    return manifold.base_frame(np.asarray(x0, dtype=np.float64))


def develop_batch(manifold, partition, deltas, x0):
    """Roll a batch of increment sequences (N, n, m) onto the manifold.

    Returns vertex batches (N, n+1, point_dim). The flat-factor case is
    the wrap of the cumulative sum; the sphere runs the frame-transport
    kernel.
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    nsamp = deltas.shape[0]
    if isinstance(manifold, (Circle, FlatTorus, Euclidean)):
        verts = np.empty((nsamp, partition.n + 1, manifold.point_dim))
        verts[:, 0, :] = x0
        verts[:, 1:, :] = manifold.normalize(x0 + np.cumsum(deltas, axis=1))
        return verts
    if isinstance(manifold, Sphere2):
        frame = _initial_frame(manifold, x0)
        verts, _, _ = backends.develop_sphere(
            deltas, x0 / manifold.radius, frame[0], frame[1], manifold.radius)
        return manifold.radius * verts
    raise GeometryError(f"no development rule for {manifold!r}")


def develop(flat_path, manifold, x0):
    """Cartan development of one flat path into a CurvedPiecewisePath."""
    partition = flat_path.partition
    deltas = flat_path.increments[None, :, :]
    x0 = manifold.normalize(np.asarray(x0, dtype=np.float64))
    if manifold.dim != flat_path.vertices.shape[1]:
        raise GeometryError("flat path dimension does not match the manifold")
    gaps = partition.gaps
    if isinstance(manifold, Sphere2):
        frame = _initial_frame(manifold, x0)
        verts, e1s, e2s = backends.develop_sphere(
            deltas, x0 / manifold.radius, frame[0], frame[1], manifold.radius)
        verts = manifold.radius * verts[0]
        frames = np.stack([e1s[0], e2s[0]], axis=1)   # (n+1, 2, 3)
        d = flat_path.increments
        vels = (d[:, 0:1] * e1s[0, :-1] + d[:, 1:2] * e2s[0, :-1]) / gaps[:, None]
        return CurvedPiecewisePath(manifold, partition, verts, vels, frames)
    verts = develop_batch(manifold, partition, deltas, x0)[0]
    vels = flat_path.increments / gaps[:, None]
    frames = manifold.base_frame(verts)
    return CurvedPiecewisePath(manifold, partition, verts, vels, frames)


def antidevelop_vertices(manifold, partition, vertices, x0):
    """Unroll vertex batches (N, n+1, point_dim) to increments (N, n, m).

    Segments are read as minimizing geodesics between consecutive
    vertices. Returns (deltas, ok); ok is False where a segment hits
    the cut locus (antipodal vertices), which the caller must reject.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if isinstance(manifold, (Circle, FlatTorus, Euclidean)):
        if isinstance(manifold, Euclidean):
            deltas = np.diff(vertices, axis=1)
            ok = np.ones(vertices.shape[0], dtype=bool)
        else:
            circ = 2.0 * np.pi * (np.asarray(manifold.radii)
                                  if isinstance(manifold, FlatTorus)
                                  else np.asarray([manifold.radius]))
            raw = np.diff(vertices, axis=1)
            deltas = np.mod(raw + 0.5 * circ, circ) - 0.5 * circ
            ok = np.all(0.5 * circ - np.abs(deltas) > 1e-9 * circ, axis=(1, 2))
        return deltas, ok
    if isinstance(manifold, Sphere2):
        frame = _initial_frame(manifold, x0)
        return backends.antidevelop_sphere(
            vertices / manifold.radius, frame[0], frame[1], manifold.radius)
    raise GeometryError(f"no anti-development rule for {manifold!r}")


def antidevelop(curved_path):
    """Inverse rolling of one curved path, via its stored frames.

    Uses the per-segment velocities, so it inverts develop() exactly
    even for segments longer than the injectivity radius.
    """
    partition = curved_path.partition
    gaps = partition.gaps
    vels = np.asarray(curved_path.velocities)
    frames = np.asarray(curved_path.frames)[:-1]            # frame at segment starts
    disp = vels * gaps[:, None]                             # tangent displacement
    deltas = np.einsum("ij,ikj->ik", disp, frames)
    verts = np.concatenate([np.zeros((1, deltas.shape[1])), np.cumsum(deltas, axis=0)])
    return FlatPiecewisePath(partition, verts)


# -- the flat Gaussian measure ------------------------------------------

def lambda0_log_density(partition, deltas):
    """Log density of the flat heat-kernel measure at given increments.

    Equals -(E/2) - (m/2) sum log(2 pi dt_i) with E the flat energy.
    Accepts a FlatPiecewisePath or a (.., n, m) increment array.
    """
    if isinstance(deltas, FlatPiecewisePath):
        deltas = deltas.increments
    deltas = np.asarray(deltas, dtype=np.float64)
    m = deltas.shape[-1]
    gaps = partition.gaps
    energy = np.sum(np.sum(deltas * deltas, axis=-1) / gaps, axis=-1)
    return -0.5 * energy - 0.5 * m * float(np.sum(np.log(2.0 * np.pi * gaps)))


def lambda0_density(partition, deltas):
    return np.exp(lambda0_log_density(partition, deltas))


def sample_lambda0_increments(partition, dim, rng, count=1):
    """Increments of the flat Brownian skeleton: independent N(0, dt_i I_m)."""
    steps = rng.normal(size=(count, partition.n, dim))
    return steps * np.sqrt(partition.gaps)[None, :, None]


def sample_lambda0(partition, dim, rng):
    """One FlatPiecewisePath drawn from the flat Gaussian measure."""
    deltas = sample_lambda0_increments(partition, dim, rng, 1)[0]
    return flat_path_from_increments(partition, deltas)


def flat_path_from_increments(partition, deltas):
    verts = np.concatenate([np.zeros((1, deltas.shape[1])),
                            np.cumsum(deltas, axis=0)])
    return FlatPiecewisePath(partition, verts)


class GeometricMeasureSampler:
    """Sampler for the geometric measure on piecewise geodesics: flat
    Gaussian increments pushed forward through Cartan development."""

    def __init__(self, manifold, x0, partition):
        self.manifold = manifold
        self.x0 = manifold.normalize(np.asarray(x0, dtype=np.float64))
        manifold.check_point(self.x0)
        self.partition = partition

    def sample_vertices(self, rng, count):
        deltas = sample_lambda0_increments(self.partition, self.manifold.dim,
                                           rng, count)
        return develop_batch(self.manifold, self.partition, deltas, self.x0)

    def sample_path(self, rng):
        return develop(sample_lambda0(self.partition, self.manifold.dim, rng),
                       self.manifold, self.x0)


def sample_nu(sampler, rng):
    """One CurvedPiecewisePath from the geometric measure nu_T (the
    development pushforward of the flat Gaussian measure)."""
    return sampler.sample_path(rng)


# -- transfer between the two path spaces --------------------------------

def transfer_to_curved(flat_fn, manifold, partition, x0):
    """Pull a functional of flat vertex batches back to curved paths
    (compose with anti-development)."""
    x0 = manifold.normalize(np.asarray(x0, dtype=np.float64))

    def fn(curved_vertices):
        deltas, ok = antidevelop_vertices(manifold, partition, curved_vertices, x0)
        if not np.all(ok):
            raise GeometryError("anti-development hit the cut locus")
        zeros = np.zeros(deltas.shape[:1] + (1, deltas.shape[2]))
        flat_verts = np.concatenate([zeros, np.cumsum(deltas, axis=1)], axis=1)
        return flat_fn(flat_verts)

    return fn


def transfer_to_flat(curved_fn, manifold, partition, x0):
    """Push a functional of curved vertex batches to flat paths
    (compose with development)."""
    x0 = manifold.normalize(np.asarray(x0, dtype=np.float64))

    def fn(flat_vertices):
        deltas = np.diff(flat_vertices, axis=1)
        verts = develop_batch(manifold, partition, deltas, x0)
        return curved_fn(verts)

    return fn


# -- geometric limit estimator -------------------------------------------

def geometric_expectation_mc(manifold, x0, partition, path_functional,
                             samples, seed, workers=1, chunk=None):
    """MC expectation of a path functional under the geometric measure."""
    if samples <= 0:
        raise ValueError("sample count must be positive")
    if chunk is None:
        # keep the (N, n+1, point_dim) chunks around 8k samples at n=256
        chunk = max(1024, min(MC_CHUNK, 2_000_000 // (partition.n + 1)))
    t0 = time.perf_counter()
    sampler = GeometricMeasureSampler(manifold, x0, partition)
    streams = np.random.SeedSequence(seed).spawn(workers)
    shares = [samples // workers + (1 if w < samples % workers else 0)
              for w in range(workers)]
    total = 0.0
    total_sq = 0.0
    kept = 0
    rejected = 0
    for stream, share in zip(streams, shares):
        rng = np.random.default_rng(stream)
        left = share
        while left > 0:
            k = min(chunk, left)
            verts = sampler.sample_vertices(rng, k)
            vals, ok = path_functional.evaluate_vertices(manifold, partition, verts,
                                                         sampler.x0)
            vals = vals[ok]
            kept += int(vals.size)
            rejected += int(k - vals.size)
            total += float(np.sum(vals))
            total_sq += float(np.sum(vals * vals))
            left -= k
    mean = total / max(kept, 1)
    var = max(0.0, (total_sq - kept * mean * mean) / max(1, kept - 1))
    return EstimateReport(
        estimate=mean, stderr=float(np.sqrt(var / max(kept, 1))), samples=kept,
        n=partition.n, mesh=partition.mesh, manifold=manifold.config(),
        scheme="geometric", functional=path_functional.name, seed=seed,
        workers=workers, wall_time=time.perf_counter() - t0,
        extra={"rejected": rejected})


def geometric_limit_estimate(manifold, x0, path_functional, chain, samples,
                             seed, workers=1):
    """Per-level geometric-measure estimates along a refinement chain."""
    if len(chain) < 3:
        raise ValueError("refinement chain needs at least 3 levels")
    budgets = [samples] * len(chain) if np.isscalar(samples) else list(samples)
    reports = []
    for level, (partition, budget) in enumerate(zip(chain, budgets)):
        reports.append(geometric_expectation_mc(
            manifold, x0, partition, path_functional, budget,
            seed + level if seed is not None else None, workers))
    return reports


# -- path file I/O --------------------------------------------------------

def write_path_file(path, manifold, partition, vertices):
    """Plain-text path file: manifold + times header, one vertex per line."""
    cfg = manifold.config()
    items = " ".join(f"{k}={v}" for k, v in cfg.items() if k != "kind")
    lines = [f"# manifold: {cfg['kind']} {items}".rstrip(),
             "# times: " + " ".join(f"{t:.17g}" for t in partition.times)]
    for row in np.atleast_2d(vertices):
        lines.append(" ".join(f"{v:.17g}" for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_path_file(path):
    """Returns (manifold, partition, vertices)."""
    from .manifolds import make_manifold
    import ast

    manifold = None
    times = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("# manifold:"):
                fields = line.split(":", 1)[1].split()
                kind, params = fields[0], {}
                for item in fields[1:]:
                    key, val = item.split("=", 1)
                    params[key] = ast.literal_eval(val)
                manifold = make_manifold(kind, **params)
            elif line.startswith("# times:"):
                times = np.array([float(v) for v in line.split(":", 1)[1].split()])
            elif not line.startswith("#"):
                rows.append([float(v) for v in line.split()])
    if manifold is None or times is None:
        raise ValueError(f"path file {path} is missing its header")
    return manifold, Partition(times), np.asarray(rows)
