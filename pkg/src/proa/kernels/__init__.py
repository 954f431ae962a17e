"""Kernel backend selection.

The compiled extension (proa._kernels) is preferred when present; the
numpy implementation is the fallback.  Selection happens once at import
and can be forced with PROA_KERNEL_BACKEND=auto|cython|numpy.
"""

from __future__ import annotations

import os

from proa.kernels import numpy_backend

_requested = os.environ.get("PROA_KERNEL_BACKEND", "auto").lower()
if _requested not in ("auto", "cython", "numpy"):
    raise ImportError(
        f"PROA_KERNEL_BACKEND must be auto, cython or numpy, got {_requested!r}"
    )

_impl = None
if _requested in ("auto", "cython"):
    try:
        from proa import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "PROA_KERNEL_BACKEND=cython but the compiled extension is not "
                "built; reinstall the package or use the numpy backend"
            ) from None

if _impl is None:
    _impl = numpy_backend
    BACKEND = "numpy"
else:
    BACKEND = "cython"

affine_warp = _impl.affine_warp
separable_blur = _impl.separable_blur
rgb_to_hsb = _impl.rgb_to_hsb
hsb_to_rgb = _impl.hsb_to_rgb
