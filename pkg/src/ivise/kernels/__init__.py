"""Hot pixel kernels with a numba fast path and a pure-numpy fallback.

The active path is chosen once at import from the IVISE_KERNELS environment
variable: "numba", "numpy", or "auto" (default: numba when importable).
Both implementations are importable directly for equivalence tests and the
benchmark script.
"""

from __future__ import annotations

import os

from . import numpy_impl

MAX_RUN = numpy_impl.MAX_RUN

_choice = os.environ.get("IVISE_KERNELS", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(f"IVISE_KERNELS must be auto|numba|numpy, got {_choice!r}")

if _choice == "numpy":
    _impl = numpy_impl
    BACKEND = "numpy"
else:
    try:
        from . import numba_impl as _impl
        BACKEND = "numba"
    except ImportError:
        if _choice == "numba":
            raise
        _impl = numpy_impl
        BACKEND = "numpy"

box_blur3 = _impl.box_blur3
bilinear_resize = _impl.bilinear_resize
kmeans_assign = _impl.kmeans_assign
rle_encode_runs = _impl.rle_encode_runs
triangle_interior = _impl.triangle_interior
