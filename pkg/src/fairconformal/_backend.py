"""Select the compiled kernels when available, else the numpy fallback.

Set ``FAIRCONFORMAL_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

_impl = _fallback
BACKEND = "python"

if os.environ.get("FAIRCONFORMAL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

kernel_smooth = _impl.kernel_smooth
ks_sorted = _impl.ks_sorted
subgradient_pinball = _impl.subgradient_pinball

__all__ = ["BACKEND", "kernel_smooth", "ks_sorted", "subgradient_pinball"]
