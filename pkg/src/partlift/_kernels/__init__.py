"""Rasterization kernels: compiled extension when available, numpy fallback otherwise.

Set PARTLIFT_PURE=1 to force the numpy path (used by the benchmark and the
equivalence tests). Both paths produce bit-identical buffers.
"""

import os

from . import _numpy_impl
from ._numpy_impl import disc_offsets

HAVE_COMPILED = False
if not os.environ.get("PARTLIFT_PURE"):
    try:
        from . import _splat  # noqa: F401

        HAVE_COMPILED = True
    except ImportError:
        HAVE_COMPILED = False

if HAVE_COMPILED:
    splat_zbuffer = _splat.splat_zbuffer
else:
    splat_zbuffer = _numpy_impl.splat_zbuffer

__all__ = ["splat_zbuffer", "disc_offsets", "HAVE_COMPILED"]
