"""Closed-form Riemannian manifolds: circle, flat torus, round 2-sphere,
and Euclidean space as the flat reference.

All geometric primitives (exp, log, parallel transport, distance,
isometric embedding) are exact up to float rounding, so no geometry
solver error enters the stochastic convergence experiments. Operations
are vectorized over leading axes; points and tangent vectors are plain
float arrays with a trailing coordinate axis.

Coordinate conventions:
  Circle(r)    -- arc-length coordinate s in [0, 2*pi*r); tangent is a
                  single arc-length component.
  FlatTorus    -- one arc-length coordinate per factor.
  Sphere2(r)   -- ambient 3-vector of norm r (point == embedding);
                  tangent is an ambient 3-vector orthogonal to the point.
  Euclidean(m) -- the vector itself.

Transport on the sphere is the standard Levi-Civita rotation in the
plane spanned by the base point and the geodesic direction (the paper
leaves the orientation convention open; this module fixes it).
"""

from dataclasses import dataclass, field

import numpy as np

# All heat kernels / measures in this package use the probabilist's
# generator Laplacian/2, i.e. the flat kernel is the N(0, t) density.
DIFFUSION_CONVENTION = "generator Δ/2"


class GeometryError(ValueError):
    """Invalid geometric input (constraint violation, descriptor mismatch)."""


class CutLocusError(GeometryError):
    """log_map target lies at the cut locus of the base point."""


class Manifold:
    """Base class; subclasses fill in the closed-form primitives."""

    kind = "abstract"
    dim = None            # intrinsic dimension m
    point_dim = None      # trailing axis length of point arrays
    tangent_dim = None    # trailing axis length of tangent arrays
    embedding_dim = None  # ambient dimension N

    def normalize(self, x):
        raise NotImplementedError

    def check_point(self, x, tol=1e-12):
        raise NotImplementedError

    def exp(self, x, v):
        raise NotImplementedError

    def log(self, x, y):
        raise NotImplementedError

    def transport(self, x, v, w):
        raise NotImplementedError

    def distance(self, x, y):
        raise NotImplementedError

    def embed(self, x):
        raise NotImplementedError

    def embed_inverse(self, p, tol=1e-8):
        raise NotImplementedError

    def base_frame(self, x):
        """Orthonormal tangent basis at x, shape (..., dim, tangent_dim)."""
        raise NotImplementedError

    def frame_to_tangent(self, x, comps):
        """Map intrinsic frame components (..., dim) to a tangent vector."""
        frame = self.base_frame(x)
        return np.einsum("...i,...ij->...j", comps, frame)

    def volume(self):
        """Total Riemannian volume (inf for Euclidean space)."""
        raise NotImplementedError

    def injectivity_radius(self):
        raise NotImplementedError

    def random_point(self, rng, size=()):
        raise NotImplementedError

    def config(self):
        raise NotImplementedError

    def __eq__(self, other):
        return type(self) is type(other) and self.config() == other.config()

    def __hash__(self):
        return hash(repr(sorted(self.config().items())))

    def __repr__(self):
        params = ", ".join(f"{k}={v}" for k, v in self.config().items() if k != "kind")
        return f"{type(self).__name__}({params})"


def _wrap(delta, circumference):
    """Wrap a coordinate difference into [-C/2, C/2)."""
    half = 0.5 * circumference
    return np.mod(delta + half, circumference) - half


class Circle(Manifold):
    kind = "circle"
    dim = 1
    point_dim = 1
    tangent_dim = 1
    embedding_dim = 2

    def __init__(self, radius=1.0):
        if radius <= 0:
            raise GeometryError("circle radius must be positive")
        self.radius = float(radius)
        self.circumference = 2.0 * np.pi * self.radius

    def config(self):
        return {"kind": self.kind, "radius": self.radius}

    def normalize(self, x):
        return np.mod(np.asarray(x, dtype=np.float64), self.circumference)

    def check_point(self, x, tol=1e-12):
        x = np.asarray(x)
        if x.shape[-1:] != (1,):
            raise GeometryError(f"circle point must have trailing axis 1, got {x.shape}")
        return x

    def exp(self, x, v):
        return self.normalize(x + v)

    def log(self, x, y):
        delta = _wrap(np.asarray(y) - np.asarray(x), self.circumference)
        cut = np.pi * self.radius
        if np.any(cut - np.abs(delta) < 1e-9 * self.radius):
            raise CutLocusError("log_map target at the circle cut locus (antipodal)")
        return delta

    def transport(self, x, v, w):
        return np.broadcast_arrays(np.asarray(w, dtype=np.float64), x + v)[0].copy()

    def distance(self, x, y):
        delta = _wrap(np.asarray(y) - np.asarray(x), self.circumference)
        return np.abs(delta)[..., 0]

    def embed(self, x):
        ang = np.asarray(x)[..., 0] / self.radius
        return self.radius * np.stack([np.cos(ang), np.sin(ang)], axis=-1)

    def embed_inverse(self, p, tol=1e-8):
        p = np.asarray(p, dtype=np.float64)
        norm = np.linalg.norm(p, axis=-1)
        if np.any(np.abs(norm - self.radius) > tol):
            raise GeometryError("ambient point too far from the embedded circle")
        s = self.radius * np.arctan2(p[..., 1], p[..., 0])
        return self.normalize(s[..., None])

    def base_frame(self, x):
        shape = np.asarray(x).shape[:-1] + (1, 1)
        return np.ones(shape)

    def volume(self):
        return self.circumference

    def injectivity_radius(self):
        return np.pi * self.radius

    def random_point(self, rng, size=()):
        return rng.uniform(0.0, self.circumference, size=tuple(size) + (1,))


class FlatTorus(Manifold):
    kind = "torus"

    def __init__(self, radii=(1.0, 1.0)):
        radii = tuple(float(r) for r in radii)
        if len(radii) < 1 or any(r <= 0 for r in radii):
            raise GeometryError("torus radii must be positive")
        self.radii = radii
        self.dim = len(radii)
        self.point_dim = self.dim
        self.tangent_dim = self.dim
        self.embedding_dim = 2 * self.dim
        self._circ = 2.0 * np.pi * np.asarray(radii)

    def config(self):
        return {"kind": self.kind, "radii": list(self.radii)}

    def normalize(self, x):
        return np.mod(np.asarray(x, dtype=np.float64), self._circ)

    def check_point(self, x, tol=1e-12):
        x = np.asarray(x)
        if x.shape[-1] != self.dim:
            raise GeometryError(f"torus point must have trailing axis {self.dim}")
        return x

    def exp(self, x, v):
        return self.normalize(x + v)

    def log(self, x, y):
        delta = _wrap(np.asarray(y) - np.asarray(x), self._circ)
        cut = 0.5 * self._circ
        if np.any(cut - np.abs(delta) < 1e-9 * np.asarray(self.radii)):
            raise CutLocusError("log_map target at a torus factor cut locus")
        return delta

    def transport(self, x, v, w):
        return np.broadcast_arrays(np.asarray(w, dtype=np.float64), x + v)[0].copy()

    def distance(self, x, y):
        delta = _wrap(np.asarray(y) - np.asarray(x), self._circ)
        return np.linalg.norm(delta, axis=-1)

    def embed(self, x):
        ang = np.asarray(x) / np.asarray(self.radii)
        parts = []
        for j, r in enumerate(self.radii):
            parts.append(r * np.cos(ang[..., j]))
            parts.append(r * np.sin(ang[..., j]))
        return np.stack(parts, axis=-1)

    def embed_inverse(self, p, tol=1e-8):
        p = np.asarray(p, dtype=np.float64)
        coords = []
        for j, r in enumerate(self.radii):
            pj = p[..., 2 * j:2 * j + 2]
            norm = np.linalg.norm(pj, axis=-1)
            if np.any(np.abs(norm - r) > tol):
                raise GeometryError("ambient point too far from the embedded torus")
            coords.append(r * np.arctan2(pj[..., 1], pj[..., 0]))
        return self.normalize(np.stack(coords, axis=-1))

    def base_frame(self, x):
        shape = np.asarray(x).shape[:-1] + (self.dim, self.dim)
        return np.broadcast_to(np.eye(self.dim), shape).copy()

    def volume(self):
        return float(np.prod(self._circ))

    def injectivity_radius(self):
        return np.pi * min(self.radii)

    def random_point(self, rng, size=()):
        u = rng.uniform(0.0, 1.0, size=tuple(size) + (self.dim,))
        return u * self._circ


class Sphere2(Manifold):
    kind = "sphere2"
    dim = 2
    point_dim = 3
    tangent_dim = 3
    embedding_dim = 3

    def __init__(self, radius=1.0):
        if radius <= 0:
            raise GeometryError("sphere radius must be positive")
        self.radius = float(radius)

    def config(self):
        return {"kind": self.kind, "radius": self.radius}

    def normalize(self, x):
        x = np.asarray(x, dtype=np.float64)
        norm = np.linalg.norm(x, axis=-1, keepdims=True)
        return self.radius * x / norm

    def check_point(self, x, tol=1e-12):
        x = np.asarray(x)
        norm = np.linalg.norm(x, axis=-1)
        if np.any(np.abs(norm - self.radius) > tol * max(1.0, self.radius)):
            raise GeometryError("sphere point does not have norm radius")
        return x

    def _unit(self, x):
        return np.asarray(x) / self.radius

    def exp(self, x, v):
        xu = self._unit(x)
        v = np.asarray(v, dtype=np.float64)
        length = np.linalg.norm(v, axis=-1, keepdims=True)
        phi = length / self.radius
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(length > 0, v / np.where(length > 0, length, 1.0), 0.0)
        return self.radius * (np.cos(phi) * xu + np.sin(phi) * u)

    def log(self, x, y):
        xu = self._unit(x)
        yu = self._unit(y)
        c = np.clip(np.sum(xu * yu, axis=-1, keepdims=True), -1.0, 1.0)
        if np.any(1.0 + c < 1e-9):
            raise CutLocusError("log_map target antipodal on the sphere")
        residual = yu - c * xu
        rnorm = np.linalg.norm(residual, axis=-1, keepdims=True)
        u = np.where(rnorm > 0, residual / np.where(rnorm > 0, rnorm, 1.0), 0.0)
        # rnorm equals sin(angle); atan2 keeps precision near angle 0
        return self.radius * np.arctan2(rnorm, c) * u

    def transport(self, x, v, w):
        xu = self._unit(x)
        v = np.asarray(v, dtype=np.float64)
        w = np.asarray(w, dtype=np.float64)
        length = np.linalg.norm(v, axis=-1, keepdims=True)
        if np.all(length == 0):
            return np.broadcast_arrays(w, xu)[0].copy()
        u = np.where(length > 0, v / np.where(length > 0, length, 1.0), 0.0)
        phi = length / self.radius
        tang_new = np.cos(phi) * u - np.sin(phi) * xu
        c = np.sum(w * u, axis=-1, keepdims=True)
        return w + c * (tang_new - u)

    def distance(self, x, y):
        # atan2 keeps full precision near 0 and pi, unlike arccos
        xu = self._unit(x)
        yu = self._unit(y)
        c = np.sum(xu * yu, axis=-1)
        s = np.linalg.norm(np.cross(xu, yu), axis=-1)
        return self.radius * np.arctan2(s, c)

    def embed(self, x):
        return np.asarray(x, dtype=np.float64)

    def embed_inverse(self, p, tol=1e-8):
        p = np.asarray(p, dtype=np.float64)
        norm = np.linalg.norm(p, axis=-1)
        if np.any(np.abs(norm - self.radius) > tol):
            raise GeometryError("ambient point too far from the sphere")
        return self.normalize(p)

    def base_frame(self, x):
        """Deterministic orthonormal tangent basis: Gram-Schmidt of the
        z axis (x axis near the poles) against the point, then the cross
        product, oriented so (e1, e2, x/r) is right-handed."""
        xu = self._unit(np.asarray(x, dtype=np.float64))
        ref = np.zeros_like(xu)
        near_pole = np.abs(xu[..., 2]) > 0.9
        ref[..., 2] = np.where(near_pole, 0.0, 1.0)
        ref[..., 0] = np.where(near_pole, 1.0, 0.0)
        e1 = ref - np.sum(ref * xu, axis=-1, keepdims=True) * xu
        e1 = e1 / np.linalg.norm(e1, axis=-1, keepdims=True)
        e2 = np.cross(xu, e1)
        return np.stack([e1, e2], axis=-2)

    def volume(self):
        return 4.0 * np.pi * self.radius ** 2

    def injectivity_radius(self):
        return np.pi * self.radius

    def random_point(self, rng, size=()):
        g = rng.normal(size=tuple(size) + (3,))
        return self.normalize(g)


class Euclidean(Manifold):
    kind = "euclidean"

    def __init__(self, dimension=1):
        dimension = int(dimension)
        if dimension < 1:
            raise GeometryError("euclidean dimension must be >= 1")
        self.dim = dimension
        self.point_dim = dimension
        self.tangent_dim = dimension
        self.embedding_dim = dimension

    def config(self):
        return {"kind": self.kind, "dimension": self.dim}

    def normalize(self, x):
        return np.asarray(x, dtype=np.float64)

    def check_point(self, x, tol=1e-12):
        x = np.asarray(x)
        if x.shape[-1] != self.dim:
            raise GeometryError(f"euclidean point must have trailing axis {self.dim}")
        return x

    def exp(self, x, v):
        return np.asarray(x) + np.asarray(v)

    def log(self, x, y):
        return np.asarray(y) - np.asarray(x)

    def transport(self, x, v, w):
        return np.broadcast_arrays(np.asarray(w, dtype=np.float64), x + v)[0].copy()

    def distance(self, x, y):
        return np.linalg.norm(np.asarray(y) - np.asarray(x), axis=-1)

    def embed(self, x):
        return np.asarray(x, dtype=np.float64)

    def embed_inverse(self, p, tol=1e-8):
        return np.asarray(p, dtype=np.float64)

    def base_frame(self, x):
        shape = np.asarray(x).shape[:-1] + (self.dim, self.dim)
        return np.broadcast_to(np.eye(self.dim), shape).copy()

    def volume(self):
        return np.inf

    def injectivity_radius(self):
        return np.inf

    def random_point(self, rng, size=()):
        return rng.normal(size=tuple(size) + (self.dim,))


_KINDS = {
    "circle": Circle,
    "torus": FlatTorus,
    "sphere2": Sphere2,
    "euclidean": Euclidean,
}


def make_manifold(kind, **params):
    """Construct a manifold from its config stanza fields."""
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise GeometryError(f"unknown manifold kind {kind!r}; "
                            f"choose from {sorted(_KINDS)}") from None
    return cls(**params)


def manifold_from_config(stanza):
    """Build a manifold from a config dict like {'kind': 'circle', 'radius': 1.0}."""
    stanza = dict(stanza)
    kind = stanza.pop("kind", None)
    if kind is None:
        raise GeometryError("manifold stanza needs a 'kind' key")
    return make_manifold(kind, **stanza)


@dataclass(frozen=True, eq=False)
class ManifoldPoint:
    """A validated point on a manifold; coords in the canonical range."""
    manifold: Manifold
    coords: np.ndarray = field(repr=True)

    def __post_init__(self):
        coords = self.manifold.normalize(np.asarray(self.coords, dtype=np.float64))
        self.manifold.check_point(coords)
        object.__setattr__(self, "coords", coords)

    def embed(self):
        return self.manifold.embed(self.coords)

    def __eq__(self, other):
        return (isinstance(other, ManifoldPoint)
                and self.manifold == other.manifold
                and np.array_equal(self.coords, other.coords))


@dataclass(frozen=True, eq=False)
class TangentVector:
    """A tangent vector anchored at a base point."""
    base: ManifoldPoint
    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=np.float64)
        if comps.shape[-1] != self.base.manifold.tangent_dim:
            raise GeometryError("tangent components have the wrong size")
        if isinstance(self.base.manifold, Sphere2):
            inner = float(np.dot(comps, self.base.coords)) / self.base.manifold.radius
            if abs(inner) > 1e-12 * max(1.0, float(np.linalg.norm(comps))):
                raise GeometryError("sphere tangent vector not orthogonal to base")
        object.__setattr__(self, "components", comps)

    def norm(self):
        return float(np.linalg.norm(self.components))


def _same_manifold(a, b):
    if a != b:
        raise GeometryError(f"descriptor mismatch: {a!r} vs {b!r}")


def exp_map(x: ManifoldPoint, v: TangentVector) -> ManifoldPoint:
    _same_manifold(x.manifold, v.base.manifold)
    if not np.allclose(x.coords, v.base.coords, atol=1e-12):
        raise GeometryError("tangent vector not based at the given point")
    return ManifoldPoint(x.manifold, x.manifold.exp(x.coords, v.components))


def log_map(x: ManifoldPoint, y: ManifoldPoint) -> TangentVector:
    _same_manifold(x.manifold, y.manifold)
    return TangentVector(x, x.manifold.log(x.coords, y.coords))


def parallel_transport(x: ManifoldPoint, v: TangentVector, w: TangentVector) -> TangentVector:
    _same_manifold(x.manifold, v.base.manifold)
    _same_manifold(x.manifold, w.base.manifold)
    target = ManifoldPoint(x.manifold, x.manifold.exp(x.coords, v.components))
    return TangentVector(target, x.manifold.transport(x.coords, v.components, w.components))


def distance(x: ManifoldPoint, y: ManifoldPoint) -> float:
    _same_manifold(x.manifold, y.manifold)
    return float(x.manifold.distance(x.coords, y.coords))


def embed(x: ManifoldPoint) -> np.ndarray:
    return x.embed()


def embed_inverse(manifold: Manifold, p) -> ManifoldPoint:
    return ManifoldPoint(manifold, manifold.embed_inverse(p))
