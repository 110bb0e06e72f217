"""Per-pixel kernels with a numba backend and a pure-numpy fallback.

The backend is picked once at import time.  Set ``HALODECONV_NUMBA=0`` to
force the numpy path (or when numba is not installed).  Both backends stay
importable as ``kernels.numpy_backend`` / ``kernels.numba_backend`` so tests
and benchmarks can compare them directly.
"""

import os

from . import _numpy as numpy_backend

_FUNCS = (
    "forward_diff",
    "forward_diff_adjoint",
    "tv_value_grad",
    "logsmooth_value_grad",
    "dilate3",
    "erode3",
    "strict_local_maxima",
    "median_filter",
)


def _numba_requested():
    flag = os.environ.get("HALODECONV_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


try:
    from . import _numba as numba_backend
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba_backend = None

if numba_backend is not None and _numba_requested():
    BACKEND = "numba"
    _impl = numba_backend
else:
    BACKEND = "numpy"
    _impl = numpy_backend

forward_diff = _impl.forward_diff
forward_diff_adjoint = _impl.forward_diff_adjoint
tv_value_grad = _impl.tv_value_grad
logsmooth_value_grad = _impl.logsmooth_value_grad
dilate3 = _impl.dilate3
erode3 = _impl.erode3
strict_local_maxima = _impl.strict_local_maxima
median_filter = _impl.median_filter

__all__ = ["BACKEND", "numpy_backend", "numba_backend", *_FUNCS]
