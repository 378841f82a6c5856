"""Select the compiled core or the numpy fallback.

``KCMD_PURE_PYTHON=1`` forces the fallback even when the extension is built.
``BACKEND`` names the implementation in use.
"""
import os

from . import _fallback

_names = ("smoothing_gram_cont", "pairwise_sq_dist", "weighted_diff", "collision_sums")

_impl = _fallback
BACKEND = "python"
if not os.environ.get("KCMD_PURE_PYTHON"):
    try:
        from . import _core
    except ImportError:
        pass
    else:
        _impl = _core
        BACKEND = "compiled"

smoothing_gram_cont = _impl.smoothing_gram_cont
pairwise_sq_dist = _impl.pairwise_sq_dist
weighted_diff = _impl.weighted_diff
collision_sums = _impl.collision_sums


def implementations():
    """Map backend name to module for every importable implementation."""
    out = {"python": _fallback}
    try:
        from . import _core
    except ImportError:
        pass
    else:
        out["compiled"] = _core
    return out
