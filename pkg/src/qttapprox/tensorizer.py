"""Base-b digit encoding of points in the unit cube.

A point ``x`` in [0, 1)^D is mapped to ``L`` levels of base-``b`` digits per
coordinate plus a remainder ``xbar`` in [0, 1)^D, so that

    x_nu = sum_k i_nu^k b^{-k} + b^{-L} xbar_nu.

Digits are stored level-major: ``(i_1^1, ..., i_D^1, ..., i_1^L, ..., i_D^L)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["EncodingParams", "DigitAddress", "encode_point", "decode_point",
           "encode_points", "mode_sizes"]

# b**L must be exactly representable and fit an int64 digit accumulator
_MAX_BITS = 60


@dataclass(frozen=True)
class EncodingParams:
    """Base ``b``, level ``L`` and dimension ``D`` of a tensorization."""

    b: int
    L: int
    D: int

    def __post_init__(self):
        for name in ("b", "L", "D"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise TypeError(f"{name} must be an integer, got {v!r}")
        if self.b < 2:
            raise ValueError(f"base b must be >= 2, got {self.b}")
        if self.L < 0:
            raise ValueError(f"level L must be >= 0, got {self.L}")
        if self.D < 1:
            raise ValueError(f"dimension D must be >= 1, got {self.D}")
        if self.L * math.log2(self.b) > _MAX_BITS:
            raise ValueError(f"b**L = {self.b}**{self.L} exceeds the supported range")

    @property
    def n_digits(self) -> int:
        return self.L * self.D

    def with_level(self, L: int) -> "EncodingParams":
        return EncodingParams(self.b, L, self.D)


@dataclass(frozen=True)
class DigitAddress:
    """Digits in level-major order and the per-coordinate remainders."""

    digits: tuple[int, ...]
    remainders: tuple[float, ...]


def mode_sizes(params: EncodingParams, m: int) -> tuple[int, ...]:
    """Mode sizes of the tensorized function space: ``b`` per digit, ``m+1`` per remainder."""
    return (params.b,) * params.n_digits + (m + 1,) * params.D


def _check_points(X: np.ndarray, D: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :] if D > 1 or X.size == 1 else X[:, None]
    if X.ndim != 2 or X.shape[1] != D:
        raise ValueError(f"expected points of shape (N, {D}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("points must be finite")
    bad = (X < 0.0) | (X >= 1.0)
    if bad.any():
        idx = np.argwhere(bad)[0]
        raise ValueError(f"coordinate {X[tuple(idx)]!r} at {tuple(int(i) for i in idx)} "
                         "is outside [0, 1)")
    return X


def encode_points(X, params: EncodingParams) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized encoding.

    Parameters
    ----------
    X : array_like, shape (N, D)
        Points in [0, 1)^D.
    params : EncodingParams

    Returns
    -------
    digits : ndarray of int64, shape (N, L*D)
        Level-major digits.
    xbar : ndarray, shape (N, D)
        Remainders in [0, 1).
    """
    b, L, D = params.b, params.L, params.D
    X = _check_points(X, D)
    scale = float(b) ** L
    y = X * scale
    fl = np.floor(y)
    xbar = y - fl
    cells = fl.astype(np.int64)
    # guard against b**L * x rounding up onto b**L
    top = cells >= b ** L
    if top.any():
        cells[top] = b ** L - 1
        xbar[top] = np.nextafter(1.0, 0.0)
    digits = np.empty((X.shape[0], L * D), dtype=np.int64)
    rest = cells.copy()
    for k in range(L - 1, -1, -1):
        digits[:, k * D:(k + 1) * D] = rest % b
        rest //= b
    return digits, xbar


def encode_point(x, params: EncodingParams) -> DigitAddress:
    """Encode a single point; see :func:`encode_points`."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    digits, xbar = encode_points(x.reshape(1, -1), params)
    return DigitAddress(tuple(int(d) for d in digits[0]), tuple(float(r) for r in xbar[0]))


def decode_point(addr: DigitAddress, params: EncodingParams) -> np.ndarray:
    """Inverse of :func:`encode_point`."""
    b, L, D = params.b, params.L, params.D
    if len(addr.digits) != L * D or len(addr.remainders) != D:
        raise ValueError("address does not match the encoding parameters")
    d = np.asarray(addr.digits, dtype=np.int64).reshape(L, D)
    if ((d < 0) | (d >= b)).any():
        raise ValueError(f"digits must lie in 0..{b - 1}")
    xbar = np.asarray(addr.remainders, dtype=float)
    if ((xbar < 0) | (xbar >= 1)).any():
        raise ValueError("remainders must lie in [0, 1)")
    cells = np.zeros(D, dtype=np.int64)
    for k in range(L):
        cells = cells * b + d[k]
    # rounding can reach 1.0 when every digit is b - 1; stay in the half-open domain
    return np.minimum((cells + xbar) / float(b) ** L, np.nextafter(1.0, 0.0))
