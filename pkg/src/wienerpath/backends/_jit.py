"""Numba-accelerated versions of the hot kernels.

Loop bodies mirror ``_reference`` operation for operation, so the two
backends agree bitwise; only the loop structure (per-sample instead of
vectorized) differs.
"""

import numpy as np
from numba import njit, prange

BACKEND_NAME = "numba"


@njit(cache=True, parallel=True)
def sphere_heat_series(u, decay, area_inv, lmax):
    u = np.asarray(u)
    out = np.empty(u.shape, dtype=np.float64)
    flat_u = u.ravel()
    flat_out = out.ravel()
    coeffs = np.empty(lmax + 1)
    two_l1 = np.empty(lmax + 1)
    ell = np.empty(lmax + 1)
    inv_l1 = np.empty(lmax + 1)
    for l in range(lmax + 1):
        coeffs[l] = (2 * l + 1) * np.exp(-l * (l + 1) * decay)
        two_l1[l] = 2 * l + 1
        ell[l] = l
        inv_l1[l] = 1.0 / (l + 1)
    for k in prange(flat_u.size):
        uk = flat_u[k]
        p_prev = 1.0
        total = 1.0
        if lmax >= 1:
            p_cur = uk
            total = total + coeffs[1] * p_cur
            for l in range(1, lmax):
                p_next = (two_l1[l] * uk * p_cur - ell[l] * p_prev) * inv_l1[l]
                total = total + coeffs[l + 1] * p_next
                p_prev, p_cur = p_cur, p_next
        flat_out[k] = area_inv * total
    return out


@njit(cache=True, parallel=True)
def develop_sphere(deltas, x0u, e10, e20, radius):
    # scalar state only: numba's parallel transform miscompiles prange
    # bodies that rebind small temporary arrays
    nsamp, nseg = deltas.shape[0], deltas.shape[1]
    verts = np.empty((nsamp, nseg + 1, 3))
    e1s = np.empty((nsamp, nseg + 1, 3))
    e2s = np.empty((nsamp, nseg + 1, 3))
    for k in prange(nsamp):
        x0, x1, x2 = x0u[0], x0u[1], x0u[2]
        a0, a1, a2 = e10[0], e10[1], e10[2]
        b0, b1, b2 = e20[0], e20[1], e20[2]
        verts[k, 0, 0] = x0
        verts[k, 0, 1] = x1
        verts[k, 0, 2] = x2
        e1s[k, 0, 0] = a0
        e1s[k, 0, 1] = a1
        e1s[k, 0, 2] = a2
        e2s[k, 0, 0] = b0
        e2s[k, 0, 1] = b1
        e2s[k, 0, 2] = b2
        for i in range(nseg):
            d0 = deltas[k, i, 0]
            d1 = deltas[k, i, 1]
            w0 = d0 * a0 + d1 * b0
            w1 = d0 * a1 + d1 * b1
            w2 = d0 * a2 + d1 * b2
            length = np.sqrt((w0 * w0 + w1 * w1) + w2 * w2)
            if length > 0.0:
                u0 = w0 / length
                u1 = w1 / length
                u2 = w2 / length
                phi = length / radius
                cphi = np.cos(phi)
                sphi = np.sin(phi)
                xn0 = cphi * x0 + sphi * u0
                xn1 = cphi * x1 + sphi * u1
                xn2 = cphi * x2 + sphi * u2
                t0 = cphi * u0 - sphi * x0
                t1 = cphi * u1 - sphi * x1
                t2 = cphi * u2 - sphi * x2
                c1 = (a0 * u0 + a1 * u1) + a2 * u2
                c2 = (b0 * u0 + b1 * u1) + b2 * u2
                a0 = a0 + c1 * (t0 - u0)
                a1 = a1 + c1 * (t1 - u1)
                a2 = a2 + c1 * (t2 - u2)
                b0 = b0 + c2 * (t0 - u0)
                b1 = b1 + c2 * (t1 - u1)
                b2 = b2 + c2 * (t2 - u2)
                x0, x1, x2 = xn0, xn1, xn2
            verts[k, i + 1, 0] = x0
            verts[k, i + 1, 1] = x1
            verts[k, i + 1, 2] = x2
            e1s[k, i + 1, 0] = a0
            e1s[k, i + 1, 1] = a1
            e1s[k, i + 1, 2] = a2
            e2s[k, i + 1, 0] = b0
            e2s[k, i + 1, 1] = b1
            e2s[k, i + 1, 2] = b2
    return verts, e1s, e2s


@njit(cache=True, parallel=True)
def antidevelop_sphere(verts, e10, e20, radius):
    nsamp, nseg = verts.shape[0], verts.shape[1] - 1
    deltas = np.empty((nsamp, nseg, 2))
    ok = np.ones(nsamp, dtype=np.bool_)
    for k in prange(nsamp):
        a0, a1, a2 = e10[0], e10[1], e10[2]
        b0, b1, b2 = e20[0], e20[1], e20[2]
        for i in range(nseg):
            x0 = verts[k, i, 0]
            x1 = verts[k, i, 1]
            x2 = verts[k, i, 2]
            y0 = verts[k, i + 1, 0]
            y1 = verts[k, i + 1, 1]
            y2 = verts[k, i + 1, 2]
            c = min(1.0, max(-1.0, (x0 * y0 + x1 * y1) + x2 * y2))
            if c <= -1.0 + 1e-12:
                ok[k] = False
            r0 = y0 - c * x0
            r1 = y1 - c * x1
            r2 = y2 - c * x2
            rnorm = np.sqrt((r0 * r0 + r1 * r1) + r2 * r2)
            if rnorm > 0.0:
                u0 = r0 / rnorm
                u1 = r1 / rnorm
                u2 = r2 / rnorm
                phi = np.arccos(c)
                length = radius * phi
                w0 = length * u0
                w1 = length * u1
                w2 = length * u2
                deltas[k, i, 0] = (w0 * a0 + w1 * a1) + w2 * a2
                deltas[k, i, 1] = (w0 * b0 + w1 * b1) + w2 * b2
                cphi = np.cos(phi)
                sphi = np.sin(phi)
                t0 = cphi * u0 - sphi * x0
                t1 = cphi * u1 - sphi * x1
                t2 = cphi * u2 - sphi * x2
                c1 = (a0 * u0 + a1 * u1) + a2 * u2
                c2 = (b0 * u0 + b1 * u1) + b2 * u2
                a0 = a0 + c1 * (t0 - u0)
                a1 = a1 + c1 * (t1 - u1)
                a2 = a2 + c1 * (t2 - u2)
                b0 = b0 + c2 * (t0 - u0)
                b1 = b1 + c2 * (t1 - u1)
                b2 = b2 + c2 * (t2 - u2)
            else:
                deltas[k, i, 0] = 0.0
                deltas[k, i, 1] = 0.0
    return deltas, ok
