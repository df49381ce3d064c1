"""Complexity measures of tensor trains and the matching a-priori bounds.

Three measures are reported for a train with ranks ``r_1 .. r_{K-1}``:

* ``compl_F``: number of stored parameters, ``sum_k r_{k-1} n_k r_k``;
* ``compl_S``: number of core entries with magnitude above ``zeta``;
* ``compl_N``: ``sum_k r_k``.

A representation with an identically zero core is the zero function and is
reported with all measures equal to zero (its ranks are zero).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .tensorizer import EncodingParams, mode_sizes
from .tt import TTFunction, is_zero_representation

__all__ = [
    "ComplexityReport",
    "measure",
    "compl_F_from_ranks",
    "p4_constants",
    "extension_sparse_bound",
    "level_change_rank_bounds",
    "cardinal_bspline_bounds",
    "dilated_spline_bounds",
    "tensor_product_bounds",
    "linear_prediction",
    "nonlinear_bounds",
    "anisotropic_exponent",
    "mixed_exponent",
]


@dataclass(frozen=True)
class ComplexityReport:
    """The three complexity measures of one representation."""

    compl_F: int
    compl_S: int
    compl_N: int

    def __post_init__(self):
        if not (0 <= self.compl_S <= self.compl_F):
            raise ValueError("need 0 <= compl_S <= compl_F")
        if not (0 <= self.compl_N <= self.compl_F):
            raise ValueError("need 0 <= compl_N <= compl_F")

    def as_dict(self) -> dict:
        return {"compl_F": self.compl_F, "compl_S": self.compl_S, "compl_N": self.compl_N}


def compl_F_from_ranks(ranks: Sequence[int], params: EncodingParams, m: int) -> int:
    """Parameter count of a train with the given ranks."""
    sizes = mode_sizes(params, m)
    full = [1] + [int(r) for r in ranks] + [1]
    if len(full) != len(sizes) + 1:
        raise ValueError("rank vector length does not match the tensorization")
    if any(r == 0 for r in full[1:-1]):
        return 0
    return int(sum(full[k] * sizes[k] * full[k + 1] for k in range(len(sizes))))


def measure(tt: TTFunction, zeta: float = 0.0) -> ComplexityReport:
    """Compute ``compl_F``, ``compl_S`` and ``compl_N`` of a representation.

    Parameters
    ----------
    tt : TTFunction
    zeta : float
        Entries with ``|entry| <= zeta`` do not count towards ``compl_S``.
    """
    if zeta < 0:
        raise ValueError("zeta must be nonnegative")
    if is_zero_representation(tt):
        return ComplexityReport(0, 0, 0)
    F = int(sum(c.size for c in tt.cores))
    S = int(sum(int(np.count_nonzero(np.abs(c) > zeta)) for c in tt.cores))
    N = int(sum(tt.ranks))
    return ComplexityReport(F, S, N)


# ---------------------------------------------------------------------------
# bounds

def _poly_term(m: int, D: int) -> float:
    # cost of the remainder block with minimal ranks; for m = 0 it is D
    return float(D) if m == 0 else 4.0 / 3.0 * (m + 1) ** (2 * D)


def p4_constants(b: int, m: int, D: int) -> dict:
    """Constants of the sum inequality for ``compl_S`` and ``compl_F``.

    Returns a dict with ``sparse`` (multiplicative, ``compl_S``), ``dense``
    (multiplicative, ``compl_F``) and ``dense_additive``.
    """
    q = m + 1
    return {
        "sparse": 2.0 * (1 + q ** (2 * D)),
        "dense": float(2 + 2 * b + 3 * q ** D + q ** (D + 1) + q ** D + q ** (2 * D)),
        "dense_additive": float(q ** (D + 1) * (D - 1) + q ** 2),
    }


def extension_sparse_bound(compl_S_A: int, b: int, m: int, D: int, L_A: int, L_B: int) -> int:
    """Upper bound on ``compl_S`` after raising the level from ``L_A`` to ``L_B``."""
    return int(compl_S_A + 2 * b * (m + 1) ** (2 * D) * (L_B - L_A) * D)


def level_change_rank_bounds(b: int, m: int, D: int, L_A: int, L_B: int) -> tuple[int, ...]:
    """Rank bounds of a level-``L_A`` function re-expressed at level ``L_B``."""
    if L_B < L_A:
        raise ValueError("L_B must be >= L_A")
    s = (m + 1) ** D
    out = []
    for nu in range(1, (L_B + 1) * D):
        if nu <= L_A * D:
            out.append(min(b ** nu, s * b ** (L_A * D - nu)))
        elif nu <= L_B * D:
            out.append(min(b ** nu, s))
        else:
            k = nu - L_B * D
            out.append(min(b ** (L_B * D) * (m + 1) ** k, (m + 1) ** (D - k)))
    return tuple(out)


def cardinal_bspline_bounds(b: int, m: int, mbar: int, L_delta: int) -> dict:
    """Bounds for the cardinal B-spline of degree ``mbar > m`` projected at level ``L_delta``."""
    return {
        "rank": mbar + 1,
        "compl_F": b ** 2 + b * (mbar + 1) ** 2 * (L_delta - 1) + (m + 1) ** 2,
        "compl_N": (mbar + 1) * L_delta,
    }


def dilated_spline_bounds(b: int, m: int, mbar: int, l: int, L: int, L_delta: int = 0) -> dict:
    """Bounds for a dilated and shifted spline at spline level ``l`` encoded at level ``L``.

    For ``mbar > m`` the spline is projected ``L_delta`` levels below ``l`` and
    ``L >= l + L_delta`` is required.
    """
    if mbar <= m:
        if L < l:
            raise ValueError("need L >= l")
        ld = 0
    else:
        if L_delta < 1 or L < l + L_delta:
            raise ValueError("need L_delta >= 1 and L >= l + L_delta when mbar > m")
        ld = L_delta
    w = (mbar + 1) ** 2
    return {
        "rank": mbar + 1,
        "compl_F": b ** 2 + b * w * (l + ld - 1) + b * w * (L - l - ld) + (m + 1) ** 2,
        "compl_N": (mbar + 1) * (l + ld) + (m + 1) * (L - l - ld),
    }


def tensor_product_bounds(b: int, m: int, mbar: int, D: int, l: int, L: int,
                          L_delta: int = 0) -> dict:
    """Bounds for a ``D``-fold tensor product of dilated splines at level ``l``."""
    ld = L_delta if mbar > m else 0
    w = (mbar + 1) ** (2 * D)
    return {
        "rank": (mbar + 1) ** D,
        "compl_F": b ** 2 + b * w * ((l + ld) * D - 1) + b * w * (L - l - ld) * D
        + _poly_term(m, D),
        "compl_N": (mbar + 1) ** D * (l + ld) * D + (mbar + 1) ** D * (L - l - ld) * D
        + 2 * (mbar + 1) ** (D - 1),
    }


def linear_prediction(kind: str, n: float, b: int, m: int, mbar: int, D: int,
                      L_delta: int = 0, exponent: float | None = None) -> dict:
    """Growth model of ``compl_F`` and ``compl_N`` for linear approximation with ``n`` terms.

    ``kind`` is ``"isotropic"``, ``"anisotropic"`` or ``"mixed"``; for the last
    two the exponent (see :func:`anisotropic_exponent`, :func:`mixed_exponent`)
    must be given. The values omit the unspecified multiplicative constant.
    """
    w2 = (mbar + 1) ** (2 * D)
    w1 = (mbar + 1) ** D
    if kind == "isotropic":
        c = 1.0
        tail = (4.0 / 3.0) * (m + 1) ** (2 * D + 1) if m > 0 else float(D)
    elif kind in ("anisotropic", "mixed"):
        if exponent is None:
            raise ValueError(f"{kind} prediction needs the exponent")
        c = float(exponent)
        tail = _poly_term(m, D)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    F = (1 + w2) * n ** c + b ** 2 + tail
    N = (1 + w1) * n ** (c / 2.0)
    if mbar > m:
        F += L_delta * D * w2
        N += L_delta * D * w1
    return {"compl_F": F, "compl_N": N, "exponent": c}


def nonlinear_bounds(n: int, b: int, m: int, mbar: int, D: int, L: int) -> dict:
    """Bounds for an ``n``-term expansion of splines encoded at level ``L``."""
    mt = max(m, mbar)
    if mt == 0:
        w2, w1 = D, D
    else:
        w2, w1 = (mt + 1) ** (2 * D), (mt + 1) ** D
    poly = _poly_term(m, D)
    return {
        "compl_F": b ** 2 + b * w2 * n ** 2 * L * D + poly,
        "compl_S": (b ** 2 + b * w2 * L * D + poly) * n,
        "compl_N": w1 * n * L * D,
    }


def anisotropic_exponent(alpha: Sequence[float], L: int) -> dict:
    """Growth exponent ``c(alpha, D)`` for anisotropic linear approximation.

    Two values are returned. ``balance`` solves the balance condition
    ``nu * (D + |K|) = sum_{k in K} l_k`` over the dimensions refined past
    level ``nu`` exactly, which gives ``c = 1`` in the isotropic case.
    ``literal`` uses the integer crossing index minus one.
    """
    a = np.sort(np.asarray(alpha, dtype=float))
    if a.ndim != 1 or a.size == 0 or np.any(a <= 0):
        raise ValueError("alpha must be a nonempty vector of positive numbers")
    D = a.size
    a1 = a[0]
    s_A = D / np.sum(1.0 / a)
    levels = np.floor(L * a1 / a + 1e-12)  # l_nu(L)

    def k_of(nu: float) -> int:
        return int(np.sum(a < (L / nu) * a1 - 1e-12)) if nu > 0 else D

    def rhs(nu: float) -> float:
        k = max(k_of(nu), 1)
        return L * a1 * np.sum(1.0 / a[:k]) / (D + k)

    # literal: first integer nu exceeding the right-hand side, minus one
    nu_int = 1
    while nu_int <= L and not nu_int > rhs(nu_int):
        nu_int += 1
    nu_lit = nu_int - 1

    # balance point of nu * (D + k(nu)) = sum_{mu <= k(nu)} l_mu; piecewise linear
    def g(nu: float) -> float:
        k = k_of(nu)
        return nu * (D + k) - float(np.sum(levels[:k]))

    lo, hi = 0.0, float(L)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
    nu_bal = 0.5 * (lo + hi)
    return {
        "balance": 2.0 * nu_bal * s_A / (L * a1),
        "literal": 2.0 * nu_lit * s_A / (L * a1),
        "nu_balance": nu_bal,
        "nu_literal": nu_lit,
        "s_A": s_A,
    }


@lru_cache(maxsize=None)
def _partitions_at_most(n: int, k: int) -> int:
    # number of partitions of n into at most k parts
    if n == 0:
        return 1
    if k == 0:
        return 0
    if k > n:
        return _partitions_at_most(n, n)
    return _partitions_at_most(n, k - 1) + _partitions_at_most(n - k, k)


def mixed_exponent(D: int, L: int, mbar: int, b: int) -> dict:
    """Growth exponent ``c(D)`` for mixed linear approximation.

    The value is computed as stated and flagged when it leaves ``[1, 4/3]``.
    """
    c_total = math.comb(L + D - 1, D - 1)
    c_sharp = c_total / _partitions_at_most(L, D)
    thresh = (D * math.log(mbar + 1, b) + math.log(c_sharp, b) + L + 1) / (D + 1)
    nu = math.floor(thresh) + 1  # smallest integer strictly above the threshold
    nu_star = nu - 1
    c = 2.0 * nu_star * D / L
    return {"exponent": c, "nu_star": nu_star, "C_sharp": c_sharp,
            "in_range": 1.0 <= c <= 4.0 / 3.0 + 1e-12}
