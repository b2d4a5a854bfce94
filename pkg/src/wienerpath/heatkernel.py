"""Heat kernels p_t(x, y) with certified truncation, their conservation
laws, and exact transition sampling.

Convention: the generator is Laplacian/2 throughout, so the Euclidean
kernel is the N(0, t) density and the circle kernel is the wrapped
Gaussian with variance t. (The e^{tΔ} reading differs by t -> 2t.)

Circle: image sum for t <= r^2, spectral cosine sum for t > r^2; the
two agree to the truncation tolerance at the switchover. Sphere:
Legendre series with the explicit tail bound, capped at l = 256.
Torus: product of circle kernels. All evaluations are vectorized.
"""

import logging

import numpy as np

from . import backends
from .manifolds import Circle, Euclidean, FlatTorus, GeometryError, Sphere2

log = logging.getLogger(__name__)

SPHERE_LMAX_CAP = 256


class KernelError(RuntimeError):
    """Truncation cap exceeded or rejection envelope unrecoverable."""


def _circle_image_sum(d, t, radius, tol):
    """Wrapped Gaussian sum over images; d is the wrapped difference."""
    circ = 2.0 * np.pi * radius
    kmax = int(np.ceil(0.5 + np.sqrt(2.0 * t * np.log(1.0 / tol)) / circ)) + 1
    ks = np.arange(-kmax, kmax + 1)
    shifted = d[..., None] + circ * ks
    return np.sum(np.exp(-shifted ** 2 / (2.0 * t)), axis=-1) / np.sqrt(2.0 * np.pi * t)


def _circle_spectral_sum(d, t, radius, tol):
    """Cosine eigenfunction sum; d is the wrapped difference."""
    circ = 2.0 * np.pi * radius
    arg = 2.0 * radius ** 2 / t * np.log(max(2.0 / (circ * tol), 2.0))
    nmax = max(1, int(np.ceil(np.sqrt(arg))))
    ns = np.arange(1, nmax + 1)
    terms = np.exp(-ns ** 2 * t / (2.0 * radius ** 2)) * np.cos(ns * d[..., None] / radius)
    return (1.0 + 2.0 * np.sum(terms, axis=-1)) / circ


def circle_kernel(d, t, radius, tol=1e-12, method=None):
    """Circle heat kernel as a function of the signed wrapped difference d.

    method: None (automatic switchover at t = r^2), 'image', or 'spectral'.
    """
    d = np.asarray(d, dtype=np.float64)
    if method is None:
        method = "image" if t <= radius ** 2 else "spectral"
    if method == "image":
        return _circle_image_sum(d, t, radius, tol)
    if method == "spectral":
        return _circle_spectral_sum(d, t, radius, tol)
    raise ValueError(f"unknown circle kernel method {method!r}")


def sphere_lmax(t, radius, tol=1e-12):
    """Smallest truncation order whose Legendre tail bound is below tol."""
    r2 = radius ** 2
    ls = np.arange(1, SPHERE_LMAX_CAP + 1, dtype=np.float64)
    tail = ((2 * ls + 3) / (4.0 * np.pi * r2)
            * np.exp(-(ls + 1) * (ls + 2) * t / (2.0 * r2))
            / (1.0 - np.exp(-(ls + 2) * t / r2)))
    good = np.nonzero(tail < tol)[0]
    if good.size == 0:
        raise KernelError(
            f"sphere series needs more than {SPHERE_LMAX_CAP} terms at t={t}")
    return int(ls[good[0]])


class KernelEvaluator:
    """Heat kernel evaluation, checks and sampling for one manifold."""

    def __init__(self, manifold, truncation_tolerance=1e-12):
        self.manifold = manifold
        self.tol = float(truncation_tolerance)
        self.clip_events = 0
        self._envelopes = {}

    # -- evaluation ----------------------------------------------------

    def kernel(self, t, x, y):
        """p_t(x, y); x, y broadcastable point arrays."""
        if t <= 0:
            raise ValueError("kernel time must be positive")
        m = self.manifold
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if isinstance(m, Circle):
            d = (y - x)[..., 0]
            d = np.mod(d + np.pi * m.radius, 2 * np.pi * m.radius) - np.pi * m.radius
            val = circle_kernel(d, t, m.radius, self.tol)
        elif isinstance(m, FlatTorus):
            val = 1.0
            for j, r in enumerate(m.radii):
                d = y[..., j] - x[..., j]
                d = np.mod(d + np.pi * r, 2 * np.pi * r) - np.pi * r
                val = val * circle_kernel(d, t, r, self.tol)
        elif isinstance(m, Sphere2):
            u = np.clip(np.sum(x * y, axis=-1) / m.radius ** 2, -1.0, 1.0)
            lmax = sphere_lmax(t, m.radius, self.tol)
            val = backends.sphere_heat_series(
                u, t / (2.0 * m.radius ** 2), 1.0 / (4.0 * np.pi * m.radius ** 2), lmax)
            val = self._clip(val, t)
        elif isinstance(m, Euclidean):
            sq = np.sum((y - x) ** 2, axis=-1)
            val = (2.0 * np.pi * t) ** (-m.dim / 2.0) * np.exp(-sq / (2.0 * t))
        else:
            raise GeometryError(f"no heat kernel for manifold {m!r}")
        return val

    def _clip(self, val, t):
        low = np.min(val) if np.size(val) else 0.0
        if low < 0.0:
            self.clip_events += 1
            if low < -self.tol:
                log.warning("heat kernel undershoot %.3e below zero at t=%g", low, t)
            val = np.maximum(val, 0.0)
        return val

    # -- conservation checks -------------------------------------------

    def normalization_check(self, t, x, nodes=2048):
        """|integral of p_t(x, .) - 1| by quadrature."""
        m = self.manifold
        x = np.asarray(x, dtype=np.float64)
        if isinstance(m, Circle):
            grid = _circle_nodes(m.radius, nodes)
            vals = self.kernel(t, x, grid[:, None])
            return abs(float(np.sum(vals)) * (m.volume() / nodes) - 1.0)
        if isinstance(m, FlatTorus):
            res = 1.0
            for j, r in enumerate(m.radii):
                sub = KernelEvaluator(Circle(r), self.tol)
                res *= 1.0 + _signed_norm_residual(sub, t, x[j:j + 1], nodes)
            return abs(res - 1.0)
        if isinstance(m, Sphere2):
            pts, wts = _sphere_grid(m.radius, max(nodes // 16, 64), 64)
            vals = self.kernel(t, x, pts)
            return abs(float(np.sum(vals * wts)) - 1.0)
        if isinstance(m, Euclidean):
            res = 1.0
            sub = KernelEvaluator(Euclidean(1), self.tol)
            for j in range(m.dim):
                grid, w = _gaussian_line(x[j:j + 1], x[j:j + 1], t, nodes)
                vals = sub.kernel(t, x[j:j + 1], grid)
                res *= float(np.sum(vals) * w)
            return abs(res - 1.0)
        raise GeometryError(f"no quadrature rule for {m!r}")

    def semigroup_check(self, s, t, x, y, nodes=2048):
        """|integral p_s(x, z) p_t(z, y) dmu(z) - p_{s+t}(x, y)| by quadrature."""
        m = self.manifold
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        target = float(np.squeeze(self.kernel(s + t, x, y)))
        if isinstance(m, Circle):
            grid = _circle_nodes(m.radius, nodes)[:, None]
            conv = np.sum(self.kernel(s, x, grid) * self.kernel(t, grid, y))
            return abs(float(conv) * (m.volume() / nodes) - target)
        if isinstance(m, FlatTorus):
            conv = 1.0
            for j, r in enumerate(m.radii):
                sub = KernelEvaluator(Circle(r), self.tol)
                grid = _circle_nodes(r, nodes)[:, None]
                cj = np.sum(sub.kernel(s, x[j:j + 1], grid) * sub.kernel(t, grid, y[j:j + 1]))
                conv *= float(cj) * (2 * np.pi * r / nodes)
            return abs(conv - target)
        if isinstance(m, Sphere2):
            pts, wts = _sphere_grid(m.radius, max(nodes // 16, 64), 128)
            conv = np.sum(self.kernel(s, x, pts) * self.kernel(t, pts, y) * wts)
            return abs(float(conv) - target)
        if isinstance(m, Euclidean):
            conv = 1.0
            for j in range(m.dim):
                sub = KernelEvaluator(Euclidean(1), self.tol)
                grid, w = _gaussian_line(x[j:j + 1], y[j:j + 1], s + t, nodes)
                cj = np.sum(sub.kernel(s, x[j:j + 1], grid) * sub.kernel(t, grid, y[j:j + 1]))
                conv *= float(cj) * w
            return abs(conv - target)
        raise GeometryError(f"no quadrature rule for {m!r}")

    # -- sampling --------------------------------------------------------

    def sample_transition(self, t, x, rng):
        """Draw y ~ p_t(x, .) dmu; x may carry leading batch axes."""
        if t <= 0:
            raise ValueError("transition time must be positive")
        m = self.manifold
        x = np.asarray(x, dtype=np.float64)
        if isinstance(m, (Circle, FlatTorus)):
            step = rng.normal(0.0, np.sqrt(t), size=x.shape)
            return m.normalize(x + step)
        if isinstance(m, Euclidean):
            return x + rng.normal(0.0, np.sqrt(t), size=x.shape)
        if isinstance(m, Sphere2):
            return self._sample_sphere(t, x, rng)
        raise GeometryError(f"no transition sampler for {m!r}")

    def _cos_angle_density(self, t, u):
        """Density of u = cos(angle/r) under p_t from any fixed point."""
        m = self.manifold
        lmax = sphere_lmax(t, m.radius, self.tol)
        val = backends.sphere_heat_series(
            u, t / (2.0 * m.radius ** 2), 1.0 / (4.0 * np.pi * m.radius ** 2), lmax)
        return 2.0 * np.pi * m.radius ** 2 * np.maximum(val, 0.0)

    def _envelope(self, t, cells=512):
        """Piecewise-constant upper bound of the cos-angle density on
        theta-uniform cells, so the acceptance rate stays near 1/1.1
        uniformly in t. Returns (u_edges ascending, bounds, cum mass)."""
        key = (t, cells)
        if key not in self._envelopes:
            theta = np.linspace(0.0, np.pi, cells + 1)
            u_edges = np.cos(theta)[::-1].copy()          # ascending in u
            u_edges[0], u_edges[-1] = -1.0, 1.0
            mids = 0.5 * (u_edges[:-1] + u_edges[1:])
            probe = np.concatenate([u_edges, mids])
            dens = self._cos_angle_density(t, probe)
            edge_d = dens[:cells + 1]
            mid_d = dens[cells + 1:]
            bounds = 1.1 * np.maximum(np.maximum(edge_d[:-1], edge_d[1:]), mid_d)
            mass = bounds * np.diff(u_edges)
            self._envelopes[key] = (u_edges, bounds, np.cumsum(mass))
        return self._envelopes[key]

    def _sample_sphere(self, t, x, rng):
        m = self.manifold
        shape = x.shape
        flat = x.reshape(-1, 3)
        nsamp = flat.shape[0]
        cells = 512
        u_edges, bounds, cum = self._envelope(t, cells)
        u = np.empty(nsamp)
        pending = np.arange(nsamp)
        for _ in range(100000):
            if pending.size == 0:
                break
            pick = rng.uniform(0.0, cum[-1], size=pending.size)
            pos = rng.uniform(0.0, 1.0, size=pending.size)
            vert = rng.uniform(0.0, 1.0, size=pending.size)
            idx = np.searchsorted(cum, pick)
            lo = u_edges[idx]
            prop = lo + pos * (u_edges[idx + 1] - lo)
            dens = self._cos_angle_density(t, prop)
            cell_bound = bounds[idx]
            if np.any(dens > cell_bound):
                # cached envelope violated: rebuild on a finer grid
                while cells <= 65536:
                    cells *= 2
                    u_edges, bounds, cum = self._envelope(t, cells)
                    fine_idx = np.searchsorted(u_edges, prop) - 1
                    fine_idx = np.clip(fine_idx, 0, cells - 1)
                    if np.all(dens <= bounds[fine_idx]):
                        break
                else:
                    raise KernelError("sphere rejection envelope rebuild exhausted")
                log.info("rebuilt sphere rejection envelope at t=%g (cells=%d)",
                         t, cells)
                continue  # discard this proposal round under the old bound
            accept = vert * cell_bound < dens
            u[pending[accept]] = prop[accept]
            pending = pending[~accept]
        else:
            raise KernelError("sphere rejection sampling failed to terminate")
        psi = rng.uniform(0.0, 2.0 * np.pi, size=nsamp)
        frame = m.base_frame(flat)
        e1, e2 = frame[:, 0, :], frame[:, 1, :]
        sin_ang = np.sqrt(np.maximum(0.0, 1.0 - u ** 2))
        xu = flat / m.radius
        yu = (u[:, None] * xu
              + sin_ang[:, None] * (np.cos(psi)[:, None] * e1 + np.sin(psi)[:, None] * e2))
        return (m.radius * yu).reshape(shape)


def _circle_nodes(radius, nodes):
    return np.linspace(0.0, 2.0 * np.pi * radius, nodes, endpoint=False)


def _signed_norm_residual(evaluator, t, x, nodes):
    m = evaluator.manifold
    grid = _circle_nodes(m.radius, nodes)
    vals = evaluator.kernel(t, x, grid[:, None])
    return float(np.sum(vals)) * (m.volume() / nodes) - 1.0


def _sphere_grid(radius, n_polar, n_azimuth):
    """Gauss-Legendre in cos(theta) x uniform azimuth product grid."""
    nodes, weights = np.polynomial.legendre.leggauss(n_polar)
    phi = np.linspace(0.0, 2.0 * np.pi, n_azimuth, endpoint=False)
    u, p = np.meshgrid(nodes, phi, indexing="ij")
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - u ** 2))
    pts = radius * np.stack([sin_t * np.cos(p), sin_t * np.sin(p),
                             np.broadcast_to(u, p.shape)], axis=-1)
    wts = np.broadcast_to(weights[:, None], u.shape) * (2.0 * np.pi / n_azimuth) * radius ** 2
    return pts.reshape(-1, 3), wts.reshape(-1)


def _gaussian_line(x, y, t, nodes):
    lo = min(float(x[0]), float(y[0])) - 10.0 * np.sqrt(t)
    hi = max(float(x[0]), float(y[0])) + 10.0 * np.sqrt(t)
    grid = np.linspace(lo, hi, nodes)
    return grid[:, None], (hi - lo) / (nodes - 1)
