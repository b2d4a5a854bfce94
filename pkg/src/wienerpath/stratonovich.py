"""Midpoint (Stratonovich) and left-point (Ito) Riemann sums over
embedded skeletons, their L2 norms along refinement chains, and the
exact-form convergence witness.

Fields are coefficient maps on the embedding space restricted to the
manifold: f(p) has one component per embedded coordinate and is paired
with the embedded coordinate increments of the skeleton.
"""

import numpy as np

from .cylinder import (CylinderFunctional, CylinderMeasure, PathSkeleton,
                       lp_norm_mc, register_functional)
from .manifolds import Circle, Euclidean, FlatTorus, GeometryError, Sphere2


def tangential_projection(manifold, p, v):
    """Project ambient vectors v onto the tangent space at embedded p."""
    p = np.asarray(p, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if isinstance(manifold, Euclidean):
        return v
    if isinstance(manifold, Sphere2):
        pu = p / manifold.radius
        return v - np.sum(v * pu, axis=-1, keepdims=True) * pu
    if isinstance(manifold, Circle):
        tau = np.stack([-p[..., 1], p[..., 0]], axis=-1) / manifold.radius
        return np.sum(v * tau, axis=-1, keepdims=True) * tau
    if isinstance(manifold, FlatTorus):
        out = np.empty_like(v)
        for j, r in enumerate(manifold.radii):
            block = p[..., 2 * j:2 * j + 2]
            tau = np.stack([-block[..., 1], block[..., 0]], axis=-1) / r
            comp = np.sum(v[..., 2 * j:2 * j + 2] * tau, axis=-1, keepdims=True)
            out[..., 2 * j:2 * j + 2] = comp * tau
        return out
    raise GeometryError(f"no tangential projection for {manifold!r}")


class AmbientField:
    """Coefficient field on embedded points: fn(manifold, p) -> same shape."""

    def __init__(self, name, fn, params=None):
        self.name = name
        self.fn = fn
        self.params = dict(params or {})

    def __call__(self, manifold, p):
        return np.asarray(self.fn(manifold, np.asarray(p, dtype=np.float64)),
                          dtype=np.float64)


FIELDS = {}


def register_field(name):
    def deco(builder):
        FIELDS[name] = builder
        return builder
    return deco


def make_field(name, **params):
    try:
        builder = FIELDS[name]
    except KeyError:
        raise ValueError(f"unknown field {name!r}; registered: {sorted(FIELDS)}"
                         ) from None
    return builder(**params)


@register_field("constant")
def _constant_field(components=(1.0,)):
    comps = np.asarray(components, dtype=np.float64)

    def fn(manifold, p):
        if comps.size != p.shape[-1]:
            raise ValueError(f"constant field has {comps.size} components, "
                             f"embedding has {p.shape[-1]}")
        return np.broadcast_to(comps, p.shape)
    return AmbientField("constant", fn, {"components": list(comps)})


@register_field("rotation")
def _rotation_field():
    """Angle form d(theta): (-y, x)/r^2 on the circle (per factor on a
    torus, about the z axis on the sphere)."""
    def fn(manifold, p):
        if isinstance(manifold, Circle):
            return np.stack([-p[..., 1], p[..., 0]], axis=-1) / manifold.radius ** 2
        if isinstance(manifold, FlatTorus):
            out = np.empty_like(p)
            for j, r in enumerate(manifold.radii):
                out[..., 2 * j] = -p[..., 2 * j + 1] / r ** 2
                out[..., 2 * j + 1] = p[..., 2 * j] / r ** 2
            return out
        if isinstance(manifold, Sphere2):
            out = np.zeros_like(p)
            out[..., 0] = -p[..., 1] / manifold.radius ** 2
            out[..., 1] = p[..., 0] / manifold.radius ** 2
            return out
        raise GeometryError(f"rotation field unsupported on {manifold!r}")
    return AmbientField("rotation", fn)


# scalar observables g on embedded points, with their ambient gradients
SCALARS = {}


def register_scalar(name):
    def deco(builder):
        SCALARS[name] = builder
        return builder
    return deco


def make_scalar(name, **params):
    try:
        builder = SCALARS[name]
    except KeyError:
        raise ValueError(f"unknown scalar {name!r}; registered: {sorted(SCALARS)}"
                         ) from None
    return builder(**params)


class ScalarObservable:
    """g(p) on embedded points plus its ambient gradient."""

    def __init__(self, name, value_fn, grad_fn, params=None):
        self.name = name
        self.value_fn = value_fn
        self.grad_fn = grad_fn
        self.params = dict(params or {})

    def value(self, p):
        return np.asarray(self.value_fn(np.asarray(p, dtype=np.float64)))

    def ambient_gradient(self, p):
        return np.asarray(self.grad_fn(np.asarray(p, dtype=np.float64)))


@register_scalar("coordinate")
def _coordinate_scalar(index=0):
    index = int(index)

    def value(p):
        return p[..., index]

    def grad(p):
        g = np.zeros_like(p)
        g[..., index] = 1.0
        return g
    return ScalarObservable("coordinate", value, grad, {"index": index})


@register_scalar("quadratic")
def _quadratic_scalar(index=0):
    """g(p) = p_index^2, a curved test observable with nonconstant gradient."""
    index = int(index)

    def value(p):
        return p[..., index] ** 2

    def grad(p):
        g = np.zeros_like(p)
        g[..., index] = 2.0 * p[..., index]
        return g
    return ScalarObservable("quadratic", value, grad, {"index": index})


@register_field("gradient")
def _gradient_field(scalar="coordinate", **scalar_params):
    obs = scalar if isinstance(scalar, ScalarObservable) else \
        make_scalar(scalar, **scalar_params)

    def fn(manifold, p):
        return tangential_projection(manifold, p, obs.ambient_gradient(p))
    return AmbientField(f"gradient[{obs.name}]", fn,
                        {"scalar": obs.name, **obs.params})


# -- the Riemann sums -----------------------------------------------------

def _embedded_chain(manifold, points, x0):
    """Embed a (N, n, point_dim) batch with x0 prepended: (N, n+1, k)."""
    points = np.asarray(points, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    e = manifold.embed(points)
    e0 = np.broadcast_to(manifold.embed(x0), e[:, :1, :].shape)
    return np.concatenate([e0, e], axis=1)


def _sums_batch(field, manifold, points, x0):
    """Returns (midpoint, ito, covariation) arrays of shape (N,)."""
    chain = _embedded_chain(manifold, points, x0)
    vals = field(manifold, chain)
    inc = np.diff(chain, axis=1)
    left = np.sum(vals[:, :-1, :] * inc, axis=(1, 2))
    right = np.sum(vals[:, 1:, :] * inc, axis=(1, 2))
    return 0.5 * (left + right), left, right - left


def _as_batch(skeleton_or_points):
    if isinstance(skeleton_or_points, PathSkeleton):
        return skeleton_or_points.points[None, :, :]
    pts = np.asarray(skeleton_or_points, dtype=np.float64)
    return pts[None, :, :] if pts.ndim == 2 else pts


def midpoint_sum(field, manifold, skeleton, x0):
    """Stratonovich midpoint Riemann sum over one skeleton."""
    mid, _, _ = _sums_batch(field, manifold, _as_batch(skeleton), x0)
    return float(mid[0]) if mid.size == 1 else mid


def ito_sum(field, manifold, skeleton, x0):
    """Left-point Riemann sum over one skeleton."""
    _, left, _ = _sums_batch(field, manifold, _as_batch(skeleton), x0)
    return float(left[0]) if left.size == 1 else left


def covariation_sum(field, manifold, skeleton, x0):
    """Discrete bracket: sum of coefficient increments times increments."""
    _, _, cov = _sums_batch(field, manifold, _as_batch(skeleton), x0)
    return float(cov[0]) if cov.size == 1 else cov


@register_functional("stratonovich")
def _cyl_stratonovich(manifold, partition, field="rotation", **field_params):
    fld = field if isinstance(field, AmbientField) else \
        make_field(field, **field_params)

    def fn(points, x0):
        mid, _, _ = _sums_batch(fld, manifold, points, x0)
        return mid
    return CylinderFunctional("stratonovich", manifold, partition, fn,
                              {"field": fld.name, **fld.params})


@register_functional("ito")
def _cyl_ito(manifold, partition, field="rotation", **field_params):
    fld = field if isinstance(field, AmbientField) else \
        make_field(field, **field_params)

    def fn(points, x0):
        _, left, _ = _sums_batch(fld, manifold, points, x0)
        return left
    return CylinderFunctional("ito", manifold, partition, fn,
                              {"field": fld.name, **fld.params})


# -- convergence diagnostics ----------------------------------------------

def stratonovich_l2(field, manifold, x0, partition, samples, seed=0,
                    workers=1):
    """L2(mu^T) norm of the midpoint sum, with delta-method stderr."""
    functional = _cyl_stratonovich(manifold, partition, field=field)
    measure = CylinderMeasure(manifold, x0, partition)
    rep = lp_norm_mc(measure, functional, p=2, samples=samples, seed=seed,
                     workers=workers)
    rep.scheme = "stratonovich-l2"
    return rep


def stratonovich_convergence(field, manifold, x0, chain, samples, seed=0,
                             workers=1):
    """Per-level L2 norms of the midpoint sum along a refinement chain."""
    reports = []
    for level, partition in enumerate(chain):
        rep = stratonovich_l2(field, manifold, x0, partition, samples,
                              None if seed is None else seed + level, workers)
        rep.extra["level"] = level
        reports.append(rep)
    return reports


def exact_form_residual(scalar, manifold, x0, partition, samples, seed=0,
                        workers=1):
    """L2 distance between the midpoint sum of grad(g) and the endpoint
    difference g(x_1) - g(x_0), i.e. the root of the mean squared
    residual. For exact forms this decays with the mesh; the expected
    refinement factor over one dyadic halving is about 2 per halving
    of the mesh (4 between n and 4n).
    """
    obs = scalar if isinstance(scalar, ScalarObservable) else \
        make_scalar(scalar)
    field = _gradient_field(obs)
    g0 = float(obs.value(manifold.embed(np.asarray(x0, dtype=np.float64))))

    def fn(points, x0_):
        mid, _, _ = _sums_batch(field, manifold, points, x0_)
        g_end = obs.value(manifold.embed(points[:, -1, :]))
        return mid - (g_end - g0)

    functional = CylinderFunctional("exact_form_residual", manifold, partition,
                                    fn, {"scalar": obs.name, **obs.params})
    measure = CylinderMeasure(manifold, x0, partition)
    rep = lp_norm_mc(measure, functional, p=2, samples=samples, seed=seed,
                     workers=workers)
    rep.scheme = "exact-form-residual"
    return rep
