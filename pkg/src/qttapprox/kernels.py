"""Backend selection for the hot kernels.

The compiled extension is used when it is importable, unless the environment
variable ``QTTAPPROX_PURE_PYTHON`` is set to a non-empty value other than ``0``.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

_FORCE_PURE = os.environ.get("QTTAPPROX_PURE_PYTHON", "") not in ("", "0")

try:
    if _FORCE_PURE:
        raise ImportError("pure backend requested")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "numpy"


def tt_contract(cores, digits, phis, backend: str | None = None) -> np.ndarray:
    """Evaluate a contraction chain at N points with the selected backend."""
    impl = _impl
    if backend == "numpy":
        impl = _pykernels
    elif backend == "cython":
        from . import _ckernels as impl  # noqa: F811  raises if unavailable
    elif backend is not None:
        raise ValueError(f"unknown backend {backend!r}")
    digits = np.ascontiguousarray(digits, dtype=np.int64)
    phis = np.ascontiguousarray(phis, dtype=np.float64)
    cores = [np.ascontiguousarray(c, dtype=np.float64) for c in cores]
    return impl.tt_contract(cores, digits, phis)
