"""Pure-numpy implementations of the hot numeric kernels.

These are the fallback (and reference) versions of the routines in
``_jit``: vectorized over the sample axis, with the same per-segment
operation order so both backends produce identical floats.
"""

import numpy as np

BACKEND_NAME = "numpy"


def sphere_heat_series(u, decay, area_inv, lmax):
    """Truncated Legendre heat series on the 2-sphere.

    u        : array of cos(geodesic angle), in [-1, 1]
    decay    : t / (2 r^2), the l(l+1) exponential rate
    area_inv : 1 / (4 pi r^2)
    lmax     : inclusive truncation order

    Returns area_inv * sum_{l=0}^{lmax} (2l+1) exp(-l(l+1) decay) P_l(u).
    """
    u = np.asarray(u, dtype=np.float64)
    p_prev = np.ones_like(u)          # P_0
    total = np.ones_like(u)           # l = 0 term
    if lmax >= 1:
        p_cur = u.copy()              # P_1
        total = total + 3.0 * np.exp(-2.0 * decay) * p_cur
        for l in range(1, lmax):
            p_next = ((2 * l + 1) * u * p_cur - l * p_prev) / (l + 1)
            lp1 = l + 1
            coeff = (2 * lp1 + 1) * np.exp(-lp1 * (lp1 + 1) * decay)
            total = total + coeff * p_next
            p_prev, p_cur = p_cur, p_next
    return area_inv * total


def develop_sphere(deltas, x0u, e10, e20, radius):
    """Roll piecewise-linear increments onto the sphere.

    deltas : (N, n, 2) tangent-frame increments (arc-length units)
    x0u    : (3,) unit base point
    e10/e20: (3,) initial orthonormal tangent frame at x0u
    radius : sphere radius

    Returns (verts, e1s, e2s): unit vertices (N, n+1, 3) and the
    parallel-transported frame at every vertex.
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    nsamp, nseg = deltas.shape[0], deltas.shape[1]
    verts = np.empty((nsamp, nseg + 1, 3))
    e1s = np.empty((nsamp, nseg + 1, 3))
    e2s = np.empty((nsamp, nseg + 1, 3))
    x = np.broadcast_to(x0u, (nsamp, 3)).copy()
    e1 = np.broadcast_to(e10, (nsamp, 3)).copy()
    e2 = np.broadcast_to(e20, (nsamp, 3)).copy()
    verts[:, 0] = x
    e1s[:, 0] = e1
    e2s[:, 0] = e2
    for i in range(nseg):
        d0 = deltas[:, i, 0][:, None]
        d1 = deltas[:, i, 1][:, None]
        w = d0 * e1 + d1 * e2
        length = np.sqrt(np.sum(w * w, axis=1))
        move = length > 0.0
        # unit tangent; zero steps keep everything in place
        safe = np.where(move, length, 1.0)[:, None]
        u = w / safe
        phi = (length / radius)[:, None]
        cphi = np.cos(phi)
        sphi = np.sin(phi)
        x_new = np.where(move[:, None], cphi * x + sphi * u, x)
        tang_new = cphi * u - sphi * x
        c1 = np.sum(e1 * u, axis=1)[:, None]
        c2 = np.sum(e2 * u, axis=1)[:, None]
        e1 = np.where(move[:, None], e1 + c1 * (tang_new - u), e1)
        e2 = np.where(move[:, None], e2 + c2 * (tang_new - u), e2)
        x = x_new
        verts[:, i + 1] = x
        e1s[:, i + 1] = e1
        e2s[:, i + 1] = e2
    return verts, e1s, e2s


def antidevelop_sphere(verts, e10, e20, radius):
    """Unroll a piecewise-geodesic sphere path to tangent increments.

    verts : (N, n+1, 3) unit vertices, verts[:, 0] common base point
    e10/e20: (3,) initial orthonormal tangent frame
    radius : sphere radius

    Returns (deltas, ok): (N, n, 2) frame increments and a boolean
    mask, False where a segment hit the cut locus (antipodal vertices).
    """
    verts = np.asarray(verts, dtype=np.float64)
    nsamp, nseg = verts.shape[0], verts.shape[1] - 1
    deltas = np.empty((nsamp, nseg, 2))
    ok = np.ones(nsamp, dtype=np.bool_)
    e1 = np.broadcast_to(e10, (nsamp, 3)).copy()
    e2 = np.broadcast_to(e20, (nsamp, 3)).copy()
    for i in range(nseg):
        x = verts[:, i]
        y = verts[:, i + 1]
        c = np.clip(np.sum(x * y, axis=1), -1.0, 1.0)
        ok &= c > -1.0 + 1e-12
        residual = y - c[:, None] * x
        rnorm = np.sqrt(np.sum(residual * residual, axis=1))
        move = rnorm > 0.0
        safe = np.where(move, rnorm, 1.0)[:, None]
        u = residual / safe
        phi = np.arccos(c)[:, None]
        length = radius * phi
        w = length * u
        deltas[:, i, 0] = np.sum(w * e1, axis=1)
        deltas[:, i, 1] = np.sum(w * e2, axis=1)
        cphi = np.cos(phi)
        sphi = np.sin(phi)
        tang_new = cphi * u - sphi * x
        c1 = np.sum(e1 * u, axis=1)[:, None]
        c2 = np.sum(e2 * u, axis=1)[:, None]
        e1 = np.where(move[:, None], e1 + c1 * (tang_new - u), e1)
        e2 = np.where(move[:, None], e2 + c2 * (tang_new - u), e2)
    return deltas, ok
