"""Fused recurrent-cell kernels with backend selection.

The compiled Cython extension is preferred when available; the pure-numpy
fallback is bit-compatible in API and used when the extension is missing or
when ``ELISA_PURE_PYTHON=1`` is set.  ``benchmarks/bench_kernels.py``
compares the two.
"""

import os

from . import _npk

BACKEND = "numpy"
_impl = _npk

if not os.environ.get("ELISA_PURE_PYTHON"):
    try:
        from . import _cyk as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        pass

lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
gru_forward = _impl.gru_forward
gru_backward = _impl.gru_backward
