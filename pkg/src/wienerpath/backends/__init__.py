"""Backend selection for the numeric hot kernels.

The numba backend is used when available; set WIENERPATH_NO_NUMBA=1 to
force the pure-numpy fallback. The two backends agree to within a few
ulps (the compiled code may contract multiply-adds), so the flag only
affects speed; reruns on the same backend are byte-identical.
"""

import os

import numpy as np

_DISABLE = os.environ.get("WIENERPATH_NO_NUMBA", "").lower() in ("1", "true", "yes")

if not _DISABLE:
    try:
        from . import _jit as _impl
    except ImportError:
        from . import _reference as _impl
else:
    from . import _reference as _impl

from . import _reference

BACKEND_NAME = _impl.BACKEND_NAME


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def sphere_heat_series(u, decay, area_inv, lmax):
    return _impl.sphere_heat_series(_f64(u), float(decay), float(area_inv), int(lmax))


def develop_sphere(deltas, x0u, e10, e20, radius):
    return _impl.develop_sphere(_f64(deltas), _f64(x0u), _f64(e10), _f64(e20),
                                float(radius))


def antidevelop_sphere(verts, e10, e20, radius):
    return _impl.antidevelop_sphere(_f64(verts), _f64(e10), _f64(e20), float(radius))
