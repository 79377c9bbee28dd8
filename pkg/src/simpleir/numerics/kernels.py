"""Convolution kernel backend selection.

Two interchangeable backends implement the raw (pre-padded)
cross-correlation and its two gradients: a compiled Cython extension and
a pure-numpy im2col fallback.  The compiled one is preferred when the
extension imported cleanly; ``SIMPLEIR_KERNELS`` overrides the choice
(``auto`` | ``cython`` | ``python``).  ``benchmarks/bench_kernels.py``
compares the two.
"""

from __future__ import annotations

import os

from ..errors import ConfigurationError
from . import _conv_np

_requested = os.environ.get("SIMPLEIR_KERNELS", "auto").lower()
if _requested not in {"auto", "cython", "python"}:
    raise ConfigurationError(
        f"SIMPLEIR_KERNELS must be auto, cython, or python; got {_requested!r}"
    )

_impl = None
if _requested in ("auto", "cython"):
    try:
        from . import _convkern as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "cython":
            raise ConfigurationError(
                "SIMPLEIR_KERNELS=cython but the compiled extension is not available"
            ) from None
        _impl = None

if _impl is None:
    _impl = _conv_np
    BACKEND = "python"
else:
    BACKEND = "cython"

conv_forward = _impl.conv_forward
conv_grad_weight = _impl.conv_grad_weight
conv_grad_input = _impl.conv_grad_input


def backend_name() -> str:
    """Name of the backend selected at import time."""
    return BACKEND
