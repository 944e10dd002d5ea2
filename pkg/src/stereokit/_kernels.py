"""Kernel dispatch: the compiled core when importable, numpy otherwise.

Set ``STEREOKIT_PURE_PYTHON=1`` before import to force the fallback.
"""
import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("STEREOKIT_PURE_PYTHON"):
    try:
        from . import _core as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass


def backends():
    """Mapping of every available backend name to its module."""
    found = {"python": _pykernels}
    try:
        from . import _core
        found["cython"] = _core
    except ImportError:
        pass
    return found


def warp_rows(src, disp, step):
    return _impl.warp_rows(
        np.ascontiguousarray(src, dtype=np.float64),
        np.ascontiguousarray(disp, dtype=np.float64),
        float(step),
    )


def laplacian_coo(guide, radius, eps):
    return _impl.laplacian_coo(np.ascontiguousarray(guide, dtype=np.float64), int(radius), float(eps))


def autocorr(feats, k):
    return _impl.autocorr(np.ascontiguousarray(feats, dtype=np.float64), int(k))
