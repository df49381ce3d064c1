"""Orthonormal polynomial basis on [0, 1] and the matrices used to re-level it.

The local basis is the shifted Legendre family
``phi_n(x) = sqrt(2n + 1) * P_n(2x - 1)``, orthonormal in L^2(0, 1).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.polynomial import polynomial as nppoly

__all__ = [
    "legendre_values",
    "legendre_derivative_values",
    "gauss_nodes",
    "monomial_to_legendre",
    "legendre_to_monomial",
    "dilation_matrices",
]


def legendre_values(m: int, x) -> np.ndarray:
    """Evaluate ``phi_0 .. phi_m`` at the points ``x``.

    Returns an array of shape ``x.shape + (m + 1,)``.
    """
    x = np.asarray(x, dtype=float)
    v = npleg.legvander(2.0 * x - 1.0, m)
    return v * np.sqrt(2.0 * np.arange(m + 1) + 1.0)


def legendre_derivative_values(m: int, order: int, x) -> np.ndarray:
    """Values of the ``order``-th derivative of ``phi_0 .. phi_m`` at ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape + (m + 1,))
    for n in range(m + 1):
        c = np.zeros(n + 1)
        c[n] = np.sqrt(2.0 * n + 1.0)
        # chain rule for the affine map 2x - 1
        d = npleg.legder(c, order) * 2.0 ** order if order else c
        out[..., n] = npleg.legval(2.0 * x - 1.0, d) if d.size else 0.0
    return out


@lru_cache(maxsize=64)
def _gauss(q: int):
    t, w = npleg.leggauss(q)
    return (t + 1.0) / 2.0, w / 2.0


def gauss_nodes(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]; the weights sum to one."""
    x, w = _gauss(int(q))
    return x.copy(), w.copy()


def monomial_to_legendre(coeffs, m: int) -> np.ndarray:
    """Convert ascending monomial coefficients on [0, 1] to ``phi`` coefficients.

    The result has length ``m + 1``. Entries above the polynomial degree are
    set to exactly zero so that sparsity counts are not polluted by roundoff.
    """
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    deg = c.size - 1
    if deg > m:
        raise ValueError(f"polynomial degree {deg} exceeds basis degree {m}")
    out = np.zeros(m + 1)
    if deg < 0:
        return out
    # exact projection with enough Gauss points for degree 2m integrands
    x, w = _gauss(m + 1)
    vals = nppoly.polyval(x, c)
    proj = legendre_values(m, x).T @ (w * vals)
    out[: deg + 1] = proj[: deg + 1]
    return out


def legendre_to_monomial(coeffs) -> np.ndarray:
    """Ascending monomial coefficients of ``sum_n coeffs[n] phi_n``."""
    c = np.asarray(coeffs, dtype=float)
    if c.size == 0:
        return np.zeros(1)
    scaled = c * np.sqrt(2.0 * np.arange(c.size) + 1.0)
    series = npleg.Legendre(scaled, domain=[0.0, 1.0])
    return series.convert(kind=nppoly.Polynomial).coef


@lru_cache(maxsize=64)
def _dilation(m: int, b: int) -> np.ndarray:
    x, w = _gauss(m + 1)
    phi_y = legendre_values(m, x)  # (q, k)
    mats = np.empty((b, m + 1, m + 1))
    for j in range(b):
        phi_c = legendre_values(m, (j + x) / b)  # (q, n)
        mats[j] = phi_c.T @ (w[:, None] * phi_y)
    # phi_n restricted to a subcell has degree n, so higher components vanish
    mats[:, np.triu_indices(m + 1, 1)[0], np.triu_indices(m + 1, 1)[1]] = 0.0
    mats.setflags(write=False)
    return mats


def dilation_matrices(m: int, b: int) -> np.ndarray:
    """Coefficients of ``phi_n`` restricted to the sub-cells ``[j/b, (j+1)/b)``.

    Returns ``M`` of shape ``(b, m + 1, m + 1)`` with
    ``phi_n((j + y) / b) = sum_k M[j, n, k] phi_k(y)`` for ``y`` in [0, 1).
    """
    if m < 0 or b < 2:
        raise ValueError("need m >= 0 and b >= 2")
    return _dilation(int(m), int(b))
