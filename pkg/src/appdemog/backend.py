"""Kernel backend selection.

The compiled extension is preferred; the numpy implementation is the
fallback. Set ``APPDEMOG_PURE_PYTHON=1`` before import to force the
fallback (used by the benchmark and for debugging).
"""

import os

from . import _kernels_py

if os.environ.get("APPDEMOG_PURE_PYTHON", "") not in ("", "0"):
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_py


def kernel_backend() -> str:
    """Name of the active kernel backend: ``"cython"`` or ``"python"``."""
    return kernels.NAME
