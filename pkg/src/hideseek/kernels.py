"""Backend selection for the geometry kernels.

The compiled extension is preferred; set ``HIDESEEK_PURE_PYTHON=1`` to force
the pure-Python fallback. ``BACKEND`` names the active implementation.
"""

import os

from . import _pykernels

GHOST = _pykernels.GHOST
LIGHT = _pykernels.LIGHT
AGENT = _pykernels.AGENT
STATIC = _pykernels.STATIC

_compiled = None
if not os.environ.get("HIDESEEK_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

_impl = _compiled if _compiled is not None else _pykernels
BACKEND = "cython" if _compiled is not None else "python"

ray_boxes = _impl.ray_boxes
segment_first_hit = _impl.segment_first_hit
sphere_sweep = _impl.sphere_sweep
resolve_overlaps = _impl.resolve_overlaps


def backends():
    """Mapping of available backend name -> kernel module."""
    out = {"python": _pykernels}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
