"""Backend dispatch for the numeric hot kernels.

The numba implementations are used when available; setting the environment
variable ``VMCURE_NO_NUMBA`` (to anything but ``0``/empty) forces the pure
NumPy fallback.  ``BACKEND`` records which path is active.
"""

import os

from . import _numpy

if os.environ.get("VMCURE_NO_NUMBA", "") not in ("", "0"):
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from . import _numba as _impl
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - exercised only without numba
        _impl = _numpy
        BACKEND = "numpy"

cox_value_score_info = _impl.cox_value_score_info
breslow_denoms = _impl.breslow_denoms
loglik1 = _impl.loglik1
estep_weights = _impl.estep_weights

numpy_backend = _numpy

__all__ = [
    "BACKEND",
    "breslow_denoms",
    "cox_value_score_info",
    "estep_weights",
    "loglik1",
    "numpy_backend",
]
