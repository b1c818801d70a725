"""Kernel selection: the compiled extension when importable, numpy otherwise."""

import os

from . import _fallback

BACKEND = "python"
kernels = _fallback

if os.environ.get("DEEPEXPLORE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as kernels  # noqa: F811
        BACKEND = "compiled"
    except ImportError:
        pass
