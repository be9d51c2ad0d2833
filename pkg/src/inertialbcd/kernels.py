"""Kernel backend selection.

The compiled Cython extension is used when it imports cleanly; otherwise the
numpy fallback is used.  Set ``INERTIALBCD_PURE_PYTHON=1`` to force the
fallback.  ``BACKEND`` names the active one.
"""
import os

from . import _kernels_py

if os.environ.get("INERTIALBCD_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

column_sweep = _impl.column_sweep
khatri_rao = _impl.khatri_rao
power_iteration = _impl.power_iteration

__all__ = ["BACKEND", "column_sweep", "khatri_rao", "power_iteration"]
