"""Kernel backend selection.

The compiled Cython kernels are preferred when importable; the numpy
fallback is otherwise selected at import time.  Set DIALEMO_PURE=1 to force
the fallback (used by the benchmark and by cross-checking tests).
"""

from __future__ import annotations

import os

from dialemo.model import _kernels_np

if os.environ.get("DIALEMO_PURE"):
    _impl = _kernels_np
    COMPILED = False
else:
    try:
        from dialemo.model import _kernels as _impl  # type: ignore[no-redef]

        COMPILED = True
    except ImportError:
        _impl = _kernels_np
        COMPILED = False

softmax_rows = _impl.softmax_rows
layernorm_forward = _impl.layernorm_forward
layernorm_backward = _impl.layernorm_backward
gelu_forward = _impl.gelu_forward
gelu_backward = _impl.gelu_backward


def backend_name() -> str:
    return "cython" if COMPILED else "numpy"
