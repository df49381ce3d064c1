"""b-adic spline systems, their quasi-interpolants and tensor-train encodings.

Splines are dilated and shifted cardinal B-splines ``phi_mbar`` normalized in
L^p:

    phi_{l,j}(x) = b^{l/p} phi_mbar(b^l x - j),   j in {-mbar, .., b^l - 1}.

Multivariate systems use tensor products with a level per coordinate.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as nppoly

from . import tt as ttm
from .basis import gauss_nodes, legendre_derivative_values, legendre_values, monomial_to_legendre
from .tensorizer import EncodingParams
from .tt import TTFunction

__all__ = [
    "SplineIndex",
    "NTermExpansion",
    "PiecewisePoly",
    "bspline_segments",
    "bspline_legendre_segments",
    "cardinal_bspline",
    "spline_piecewise",
    "evaluate_expansion",
    "encode_segment_atom",
    "project_to_degree",
    "encode_dilated_spline",
    "encode_tensor_product",
    "encode_expansion",
    "expansion_cell_coefficients",
    "index_set",
    "anisotropic_levels",
    "quasi_interpolant_coeffs",
    "threshold_nterm",
    "sawtooth",
    "encode_sawtooth",
    "MemoryGuardError",
]

MAX_TERMS = 10 ** 6
MAX_BYTES = 512 * 2 ** 20


class MemoryGuardError(MemoryError):
    """Raised when an encoding would exceed the configured size limits."""


def _lp_factor(b: int, p: float) -> float:
    # b^{1/p}, with 1/p = 0 for p = inf
    return 1.0 if math.isinf(p) else float(b) ** (1.0 / p)


# ---------------------------------------------------------------------------
# cardinal B-splines

@lru_cache(maxsize=32)
def _segments_exact(mbar: int) -> tuple[tuple[Fraction, ...], ...]:
    # piecewise polynomials of N_mbar on [k, k+1) in the global variable u
    segs = [[Fraction(1)]]
    for d in range(1, mbar + 1):
        new = []
        for k in range(d + 1):
            acc = [Fraction(0)] * (d + 1)
            # u/d * N_{d-1}(u) on segment k
            if k < d:
                for e, c in enumerate(segs[k]):
                    acc[e + 1] += c / d
            # (d + 1 - u)/d * N_{d-1}(u - 1) on segment k (segment k-1 of N_{d-1})
            if k >= 1:
                shifted = _shift_poly(segs[k - 1], Fraction(-1))
                for e, c in enumerate(shifted):
                    acc[e] += c * Fraction(d + 1, d)
                    acc[e + 1] -= c / d
            new.append(acc)
        segs = new
    # express segment k in the local variable y = u - k
    return tuple(tuple(_shift_poly(s, Fraction(k))) for k, s in enumerate(segs))


def _shift_poly(c: Sequence[Fraction], t: Fraction) -> list[Fraction]:
    # coefficients of p(y + t) given those of p(y)
    n = len(c)
    out = [Fraction(0)] * n
    for e, a in enumerate(c):
        for i in range(e + 1):
            out[i] += a * math.comb(e, i) * t ** (e - i)
    return out


def bspline_segments(mbar: int) -> tuple[np.ndarray, ...]:
    """Monomial coefficients (ascending, local variable) of the ``mbar + 1`` segments."""
    if mbar < 0:
        raise ValueError("mbar must be >= 0")
    return tuple(np.array([float(x) for x in s]) for s in _segments_exact(mbar))


@lru_cache(maxsize=32)
def _legendre_segments(mbar: int) -> np.ndarray:
    out = np.array([monomial_to_legendre(s, mbar) for s in bspline_segments(mbar)])
    out.setflags(write=False)
    return out


def bspline_legendre_segments(mbar: int) -> np.ndarray:
    """Legendre coefficients of the segments, shape ``(mbar + 1, mbar + 1)``."""
    return _legendre_segments(mbar)


def cardinal_bspline(mbar: int, u) -> np.ndarray:
    """Evaluate the cardinal B-spline of degree ``mbar`` supported on ``[0, mbar + 1)``."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    k = np.floor(u)
    segs = bspline_segments(mbar)
    for i, s in enumerate(segs):
        sel = k == i
        if sel.any():
            out[sel] = nppoly.polyval(u[sel] - i, s)
    return out


# ---------------------------------------------------------------------------
# data types

@dataclass(frozen=True, order=True)
class SplineIndex:
    """Multilevel and shift of one tensor-product spline."""

    levels: tuple[int, ...]
    shifts: tuple[int, ...]

    def __post_init__(self):
        if len(self.levels) != len(self.shifts):
            raise ValueError("levels and shifts must have the same length")
        if any(l < 0 for l in self.levels):
            raise ValueError("levels must be nonnegative")

    @property
    def D(self) -> int:
        return len(self.levels)

    def validate(self, mbar: int, b: int):
        for l, j in zip(self.levels, self.shifts):
            if not (-mbar <= j <= b ** l - 1):
                raise ValueError(f"shift {j} outside {{-{mbar}, .., {b ** l - 1}}} at level {l}")


@dataclass
class NTermExpansion:
    """A finite linear combination of normalized splines.

    Attributes
    ----------
    terms : list of (SplineIndex, float)
    p : float
        Normalization exponent of the splines.
    mbar : int
        Spline degree.
    b : int
        Dilation base.
    """

    terms: list
    p: float
    mbar: int
    b: int = 2

    @property
    def n(self) -> int:
        return len(self.terms)

    @property
    def D(self) -> int:
        return self.terms[0][0].D if self.terms else 0

    @property
    def max_level(self) -> int:
        return max((max(ix.levels) for ix, _ in self.terms), default=0)

    def to_json(self) -> str:
        return json.dumps({
            "p": "inf" if math.isinf(self.p) else float(self.p),
            "mbar": self.mbar,
            "b": self.b,
            "terms": [{"levels": list(ix.levels), "shifts": list(ix.shifts), "coeff": float(c)}
                      for ix, c in self.terms],
        })

    @classmethod
    def from_json(cls, text: str) -> "NTermExpansion":
        doc = json.loads(text)
        p = math.inf if doc["p"] == "inf" else float(doc["p"])
        terms = [(SplineIndex(tuple(t["levels"]), tuple(t["shifts"])), float(t["coeff"]))
                 for t in doc["terms"]]
        return cls(terms, p, int(doc["mbar"]), int(doc.get("b", 2)))


@dataclass(frozen=True)
class PiecewisePoly:
    """Piecewise polynomial on the uniform b-adic partition of [0, 1) at ``level``.

    ``coeffs[i]`` holds the Legendre coefficients on cell ``i`` in the local
    variable ``y = b^level x - i``.
    """

    level: int
    b: int
    coeffs: np.ndarray = field(repr=False)

    @property
    def breakpoints(self) -> np.ndarray:
        return np.arange(self.b ** self.level + 1) / float(self.b) ** self.level

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = x * float(self.b) ** self.level
        cell = np.minimum(np.floor(y).astype(np.int64), self.b ** self.level - 1)
        phi = legendre_values(self.coeffs.shape[1] - 1, y - cell)
        return np.einsum("...n,...n->...", phi, self.coeffs[cell])


def spline_piecewise(l: int, j: int, mbar: int, p: float, b: int = 2) -> PiecewisePoly:
    """The spline ``phi_{l,j}`` as a piecewise polynomial on the level-``l`` cells."""
    SplineIndex((l,), (j,)).validate(mbar, b)
    segs = bspline_legendre_segments(mbar)
    coeffs = np.zeros((b ** l, mbar + 1))
    for k in range(mbar + 1):
        i = j + k
        if 0 <= i < b ** l:
            coeffs[i] = segs[k]
    return PiecewisePoly(l, b, coeffs * _lp_factor(b, p) ** l)


def evaluate_expansion(e: NTermExpansion, X) -> np.ndarray:
    """Direct evaluation of an expansion at points ``X`` of shape ``(N, D)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.zeros(X.shape[0])
    lp = _lp_factor(e.b, e.p)
    for ix, c in e.terms:
        v = np.full(X.shape[0], float(c))
        for nu, (l, j) in enumerate(zip(ix.levels, ix.shifts)):
            v *= lp ** l * cardinal_bspline(e.mbar, X[:, nu] * float(e.b) ** l - j)
        out += v
    return out


# ---------------------------------------------------------------------------
# encoders

def _delta_cores(digits: Sequence[int], b: int, weight: float) -> list[np.ndarray]:
    cores = []
    for d in digits:
        c = np.zeros((1, b, 1))
        c[0, d, 0] = weight
        cores.append(c)
    return cores


def _digits_of(i: int, l: int, b: int) -> list[int]:
    out = []
    for _ in range(l):
        out.append(i % b)
        i //= b
    return out[::-1]


def encode_segment_atom(l: int, i: int, k: int, mbar: int, p: float, L: int | None = None,
                        b: int = 2, m: int | None = None) -> TTFunction:
    """Rank-one train of segment ``k`` of the level-``l`` spline on cell ``i``.

    The atom equals ``b^{l/p} phi_mbar(b^l x - i + k)`` on cell ``i`` and zero
    elsewhere. It is encoded at level ``l`` and then raised to ``L``.
    """
    m = mbar if m is None else m
    if mbar > m:
        raise ValueError("segment atoms need m >= mbar; use encode_dilated_spline with L_delta")
    if not 0 <= i < b ** l:
        raise ValueError(f"cell {i} outside 0..{b ** l - 1}")
    if not 0 <= k <= mbar:
        raise ValueError(f"segment {k} outside 0..{mbar}")
    L = l if L is None else L
    if L < l:
        raise ValueError("encoding level L must be >= l")
    poly = np.zeros((1, m + 1, 1))
    poly[0, : mbar + 1, 0] = bspline_legendre_segments(mbar)[k]
    cores = _delta_cores(_digits_of(i, l, b), b, _lp_factor(b, p)) + [poly]
    f = TTFunction(EncodingParams(b, l, 1), m, tuple(cores))
    return ttm.extend_level(f, L)


def _projected_segment(mbar: int, k: int, m: int, b: int, L_delta: int) -> np.ndarray:
    # L^2 projection of segment k onto degree m on b^L_delta sub-cells
    n = b ** L_delta
    x, w = gauss_nodes(mbar + m + 2)
    seg = bspline_segments(mbar)[k]
    pts = (np.arange(n)[:, None] + x[None, :]) / n
    vals = nppoly.polyval(pts, seg)
    return np.einsum("cq,q,qn->cn", vals, w, legendre_values(m, x))


def project_to_degree(mbar: int, m: int, L_delta: int, p: float = 2.0,
                      b: int = 2) -> tuple[list[PiecewisePoly], float]:
    """Cellwise L^2 projection of the B-spline segments onto degree ``m``.

    Each segment of ``phi_mbar`` (on its unit interval) is projected on the
    ``b^L_delta`` sub-cells. Returns one :class:`PiecewisePoly` per segment
    and the L^p error of the projected spline over its support.
    """
    if L_delta < 0 or m < 0:
        raise ValueError("need L_delta >= 0 and m >= 0")
    segs = bspline_segments(mbar)
    if mbar <= m:
        return [_exact_cells(seg, m, b, L_delta) for seg in segs], 0.0
    pieces = [PiecewisePoly(L_delta, b, _projected_segment(mbar, k, m, b, L_delta))
              for k in range(mbar + 1)]
    n = b ** L_delta
    if math.isinf(p):
        y = np.linspace(0.0, 1.0, 64, endpoint=False)
        pts = ((np.arange(n)[:, None] + y[None, :]) / n).ravel()
        err = max(float(np.max(np.abs(nppoly.polyval(pts, seg) - pc(pts))))
                  for seg, pc in zip(segs, pieces))
        return pieces, err
    x, w = gauss_nodes(2 * mbar + 6)
    pts = ((np.arange(n)[:, None] + x[None, :]) / n).ravel()
    ww = np.tile(w, n) / n
    tot = sum(float(np.dot(ww, np.abs(nppoly.polyval(pts, seg) - pc(pts)) ** p))
              for seg, pc in zip(segs, pieces))
    return pieces, tot ** (1.0 / p)


def _exact_cells(seg: np.ndarray, m: int, b: int, L_delta: int) -> PiecewisePoly:
    # restriction of a monomial polynomial to the sub-cells, in Legendre coefficients
    n = b ** L_delta
    out = np.zeros((n, m + 1))
    for i in range(n):
        # seg((i + y) / n) as a polynomial in y
        c = np.zeros(1)
        for k, a in enumerate(seg):
            c = nppoly.polyadd(c, a * nppoly.polypow([i / n, 1.0 / n], k))
        out[i] = monomial_to_legendre(c, m)
    return PiecewisePoly(L_delta, b, out)


def encode_dilated_spline(l: int, j: int, mbar: int, p: float, L: int | None = None,
                          b: int = 2, m: int | None = None, L_delta: int | None = None,
                          tol: float = 1e-13) -> TTFunction:
    """Encode ``phi_{l,j}`` at level ``L`` as a sum of segment atoms.

    For ``mbar > m`` each segment is projected onto degree ``m`` on
    ``b^L_delta`` sub-cells, so the result is an approximation and
    ``L >= l + L_delta`` is required.
    """
    m = mbar if m is None else m
    SplineIndex((l,), (j,)).validate(mbar, b)
    lp = _lp_factor(b, p)
    if mbar <= m:
        L = l if L is None else L
        total = None
        for k in range(mbar + 1):
            i = j + k
            if 0 <= i < b ** l:
                atom = encode_segment_atom(l, i, k, mbar, p, l, b, m)
                total = atom if total is None else ttm.add(total, atom)
        out = ttm.extend_level(ttm.round_tt(total, tol), L)
        # extension pads bonds to m + 1; the spline only needs mbar + 1
        return ttm.round_tt(out, tol) if m > mbar and L > l else out
    if L_delta is None or L_delta < 1:
        raise ValueError("mbar > m requires L_delta >= 1")
    L = l + L_delta if L is None else L
    if L < l + L_delta:
        raise ValueError("need L >= l + L_delta")
    total = None
    for k in range(mbar + 1):
        i = j + k
        if not 0 <= i < b ** l:
            continue
        sub = ttm.from_cell_coefficients(_projected_segment(mbar, k, m, b, L_delta),
                                         EncodingParams(b, L_delta, 1), m, tol=tol)
        cores = _delta_cores(_digits_of(i, l, b), b, lp) + list(sub.cores)
        atom = TTFunction(EncodingParams(b, l + L_delta, 1), m, tuple(cores))
        total = atom if total is None else ttm.add(total, atom)
    return ttm.extend_level(ttm.round_tt(total, tol), L)


def encode_tensor_product(index: SplineIndex, mbar: int, p: float, L: int | None = None,
                          b: int = 2, m: int | None = None, L_delta: int | None = None,
                          tol: float = 1e-13) -> TTFunction:
    """Encode the tensor-product spline ``phi_lambda`` at level ``L``."""
    m = mbar if m is None else m
    index.validate(mbar, b)
    extra = L_delta if (mbar > m and L_delta) else 0
    L = max(index.levels) + extra if L is None else L
    factors = [encode_dilated_spline(l, j, mbar, p, L, b, m, L_delta, tol)
               for l, j in zip(index.levels, index.shifts)]
    out = ttm.tensor_product(factors)
    return ttm.round_tt(out, tol) if index.D > 1 else out


def _check_guard(n_terms: int, est_bytes: float):
    if n_terms > MAX_TERMS:
        raise MemoryGuardError(f"{n_terms} terms exceed the limit of {MAX_TERMS}")
    if est_bytes > MAX_BYTES:
        raise MemoryGuardError(f"estimated {est_bytes / 2 ** 20:.1f} MiB exceeds "
                               f"{MAX_BYTES / 2 ** 20:.0f} MiB")


def encode_expansion(e: NTermExpansion, L: int | None = None, m: int | None = None,
                     compress: bool = False, tol: float = 1e-13) -> TTFunction:
    """Encode an n-term expansion.

    With ``compress=False`` the terms are added one after another without
    recompression, so the ranks add up exactly as in the direct sum. With
    ``compress=True`` a balanced reduction tree with rounding at relative
    tolerance ``tol`` is used instead.
    """
    if not e.terms:
        raise ValueError("empty expansion")
    m = e.mbar if m is None else m
    D = e.D
    L = e.max_level if L is None else L
    if not compress:
        r = (e.mbar + 1) ** D
        est = 8.0 * (e.n * r) ** 2 * e.b * (L + 1) * D
        _check_guard(e.n, est)
    else:
        _check_guard(e.n, 0)
    parts = [ttm.scale(encode_tensor_product(ix, e.mbar, e.p, L, e.b, m, tol=tol), c)
             for ix, c in e.terms]
    if not compress:
        total = parts[0]
        for t in parts[1:]:
            total = ttm.add(total, t)
        return total
    while len(parts) > 1:
        nxt = []
        for a in range(0, len(parts) - 1, 2):
            nxt.append(ttm.round_tt(ttm.add(parts[a], parts[a + 1]), tol))
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


# ---------------------------------------------------------------------------
# refinement and cell coefficients

@lru_cache(maxsize=64)
def _refinement_mask(mbar: int, b: int) -> np.ndarray:
    mask = np.ones(1)
    for _ in range(mbar + 1):
        mask = np.convolve(mask, np.ones(b))
    return mask / float(b) ** mbar


def _refine_axis(c: np.ndarray, axis: int, b: int, mbar: int) -> np.ndarray:
    # spline coefficients at level l (shifts -mbar..b^l-1) -> level l+1
    c = np.moveaxis(c, axis, 0)
    n_coarse = c.shape[0]
    n_cells = n_coarse - mbar
    n_fine = b * n_cells + mbar
    mask = _refinement_mask(mbar, b)
    full = np.zeros((b * n_coarse + mask.size,) + c.shape[1:])
    for k, a in enumerate(mask):
        full[k: k + b * n_coarse: b] += a * c
    # fine shift i = b*j + k sits at b*(J - mbar) + k with J = j + mbar
    off = b * mbar - mbar
    out = full[off: off + n_fine]
    return np.moveaxis(out, 0, axis)


def _refine(c: np.ndarray, from_levels: Sequence[int], to_levels: Sequence[int],
            b: int, mbar: int) -> np.ndarray:
    for ax, (lf, lt) in enumerate(zip(from_levels, to_levels)):
        if lt < lf:
            raise ValueError("cannot refine to a coarser level")
        for _ in range(lt - lf):
            c = _refine_axis(c, ax, b, mbar)
    return c


def _spline_to_cells_axis(c: np.ndarray, axis: int, mbar: int) -> np.ndarray:
    # spline coefficients (shifts) along axis -> cells along axis, new Legendre axis appended
    segs = bspline_legendre_segments(mbar)
    c = np.moveaxis(c, axis, 0)
    n_cells = c.shape[0] - mbar
    out = np.zeros((n_cells,) + c.shape[1:] + (mbar + 1,))
    for k in range(mbar + 1):
        # cell i receives shift j = i - k, stored at index i - k + mbar
        sl = c[mbar - k: mbar - k + n_cells]
        out += sl[..., None] * segs[k]
    return np.moveaxis(out, 0, axis)


def _group_by_levels(e: NTermExpansion) -> dict:
    groups: dict = {}
    for ix, c in e.terms:
        groups.setdefault(ix.levels, []).append((ix.shifts, c))
    return groups


def expansion_cell_coefficients(e: NTermExpansion, L: int) -> np.ndarray:
    """Per-cell Legendre coefficients of an expansion on the uniform level-``L`` grid.

    Returns an array of shape ``(b**L,)*D + (mbar+1,)*D``.
    """
    D, b, mbar = e.D, e.b, e.mbar
    if e.max_level > L:
        raise ValueError(f"expansion has level {e.max_level} > {L}")
    n_sh = b ** L + mbar
    _check_guard(e.n, 8.0 * n_sh ** D * (mbar + 1) ** D)
    acc = np.zeros((n_sh,) * D)
    lp = _lp_factor(b, e.p)
    for levels, items in _group_by_levels(e).items():
        arr = np.zeros(tuple(b ** l + mbar for l in levels))
        for shifts, c in items:
            arr[tuple(j + mbar for j in shifts)] += c * lp ** sum(levels)
        acc += _refine(arr, levels, (L,) * D, b, mbar)
    out = acc
    for ax in range(D):
        out = _spline_to_cells_axis(out, ax, mbar)
    # axes: cells per dim, then the appended Legendre axes in dimension order
    return out


def encode_expansion_cells(e: NTermExpansion, L: int, m: int | None = None,
                           tol: float = 1e-13) -> TTFunction:
    """Encode an expansion by sequential SVD of its per-cell coefficient tensor."""
    m = e.mbar if m is None else m
    coeffs = expansion_cell_coefficients(e, L)
    D = e.D
    q = e.mbar + 1
    if m + 1 != q:
        pad = [(0, 0)] * D
        if m + 1 > q:
            pad += [(0, m + 1 - q)] * D
            coeffs = np.pad(coeffs, pad)
        else:
            # truncating orthonormal coefficients is the L^2 projection
            coeffs = coeffs[(slice(None),) * D + (slice(0, m + 1),) * D]
    return ttm.from_cell_coefficients(coeffs, EncodingParams(e.b, L, D), m, tol)


# ---------------------------------------------------------------------------
# index sets and quasi-interpolation

def anisotropic_levels(l: int, alpha: Sequence[float]) -> tuple[int, ...]:
    """Per-coordinate levels ``floor(l * alpha_min / alpha_nu)``."""
    a = np.asarray(alpha, dtype=float)
    amin = a.min()
    return tuple(int(math.floor(l * amin / av + 1e-12)) for av in a)


def _multilevels(kind: str, L: int, D: int, alpha=None, exact_level: bool = False):
    if kind == "isotropic":
        ls = [L] if exact_level else range(L + 1)
        return [(l,) * D for l in ls]
    if kind == "anisotropic":
        if alpha is None or len(alpha) != D:
            raise ValueError("anisotropic systems need alpha of length D")
        ls = [L] if exact_level else range(L + 1)
        out = []
        for l in ls:
            lv = anisotropic_levels(l, alpha)
            if lv not in out:
                out.append(lv)
        return out
    if kind == "mixed":
        out = [lv for lv in itertools.product(range(L + 1), repeat=D)
               if (sum(lv) == L if exact_level else sum(lv) <= L)]
        return sorted(out, key=lambda t: (sum(t), t))
    raise ValueError(f"unknown system kind {kind!r}")


def index_set(kind: str, L: int, mbar: int, D: int, b: int = 2, alpha=None,
              exact_level: bool = False) -> list[SplineIndex]:
    """Enumerate the spline indices of a system up to (or exactly at) level ``L``."""
    out = []
    for lv in _multilevels(kind, L, D, alpha, exact_level):
        ranges = [range(-mbar, b ** l) for l in lv]
        out.extend(SplineIndex(lv, sh) for sh in itertools.product(*ranges))
    return out


@lru_cache(maxsize=64)
def _dbf_weights(mbar: int) -> np.ndarray:
    # w[o, n]: functional for a spline whose evaluation cell is o cells right of
    # its shift, acting on the Legendre coefficients of the local polynomial
    out = np.zeros((mbar + 1, mbar + 1))
    fact = math.factorial(mbar)
    for o in range(mbar + 1):
        psi = np.ones(1)
        for i in range(1, mbar + 1):
            psi = nppoly.polymul(psi, [i - o, -1.0])
        for r in range(mbar + 1):
            dpsi = nppoly.polyder(psi, mbar - r) if mbar - r else psi
            val = nppoly.polyval(0.5, dpsi) if dpsi.size else 0.0
            out[o] += (-1) ** (mbar - r) * val * legendre_derivative_values(mbar, r, 0.5)
    out /= fact
    out.setflags(write=False)
    return out


def _eval_cells(j: np.ndarray, mbar: int, nl: int) -> np.ndarray:
    return np.clip(j + (mbar + 1) // 2, 0, nl - 1)


def _qi_at_shifts(f: Callable, levels: Sequence[int], shifts: np.ndarray, mbar: int, b: int,
                  nq: int, chunk: int = 1 << 20) -> np.ndarray:
    """Quasi-interpolant coefficients (unnormalized) at the given shifts.

    Each coefficient is a de Boor-Fix type functional applied to the local L^2
    projection of ``f`` on one cell of the support.
    """
    shifts = np.asarray(shifts, dtype=np.int64).reshape(-1, len(levels))
    M, D = shifts.shape
    q = mbar + 1
    x, w = gauss_nodes(nq)
    proj = w[:, None] * legendre_values(mbar, x)  # (nq, q)
    W = _dbf_weights(mbar)
    cells = np.empty_like(shifts)
    for nu, l in enumerate(levels):
        cells[:, nu] = _eval_cells(shifts[:, nu], mbar, b ** l)
    scale = np.array([float(b) ** l for l in levels])
    node_grid = np.array(list(itertools.product(x, repeat=D)))  # (nq^D, D)
    out = np.empty(M)
    per = max(1, chunk // len(node_grid))
    for s in range(0, M, per):
        cc = cells[s: s + per]
        pts = (cc[:, None, :] + node_grid[None, :, :]) / scale
        vals = np.asarray(f(pts.reshape(-1, D)), dtype=float)
        if not np.all(np.isfinite(vals)):
            bad = pts.reshape(-1, D)[~np.isfinite(vals)][0]
            raise FloatingPointError(f"target is not finite at {bad.tolist()}")
        vals = vals.reshape((len(cc),) + (nq,) * D)
        coef = vals
        for _ in range(D):
            # contract the leading node axis, append the Legendre axis
            coef = np.tensordot(coef, proj, axes=([1], [0]))
        # coef axes: (point, n_1, .., n_D); apply the functional per dimension
        offs = cc - shifts[s: s + per]
        for nu in range(D):
            wv = W[offs[:, nu]]  # (chunk, q)
            coef = np.einsum("pn...,pn->p...", coef, wv)
        out[s: s + per] = coef
    return out


def _qi_dense(f, levels, mbar, b, nq):
    ranges = [np.arange(-mbar, b ** l) for l in levels]
    grid = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, len(levels))
    vals = _qi_at_shifts(f, levels, grid, mbar, b, nq)
    return vals.reshape(tuple(len(r) for r in ranges))


def _as_terms(levels, arr, mbar, b, p, out):
    fac = _lp_factor(b, p) ** sum(levels)
    for idx in np.ndindex(arr.shape):
        out.append((SplineIndex(tuple(levels), tuple(int(i) - mbar for i in idx)),
                    float(arr[idx]) / fac))


def quasi_interpolant_coeffs(f: Callable, kind: str, L_max: int, mbar: int, p: float,
                             D: int = 1, b: int = 2, alpha=None, nq: int | None = None,
                             adaptive_tol: float | None = None, full_levels: int = 6,
                             single_level: bool = False) -> NTermExpansion:
    """Multilevel expansion of ``f`` built from differences of quasi-interpolants.

    The level-``l`` contribution is ``T_l f - T_{l-1} f`` written in the
    level-``l`` system, where ``T_l`` applies de Boor-Fix functionals to the
    cellwise L^2 projection of ``f``. Coefficients are normalized in L^p.

    Parameters
    ----------
    f : callable
        Maps an ``(N, D)`` array of points to ``N`` values.
    kind : {"isotropic", "anisotropic", "mixed"}
    adaptive_tol : float, optional
        Isotropic systems only. Beyond ``full_levels`` only the children of
        coefficients larger than this tolerance are computed.
    single_level : bool
        Return ``T_{L_max} f`` in the finest system instead of the multilevel
        decomposition (for mixed systems the full grid ``(L_max, .., L_max)``).
    """
    nq = mbar + 3 if nq is None else nq
    terms: list = []
    if single_level:
        lv = anisotropic_levels(L_max, alpha) if kind == "anisotropic" else (L_max,) * D
        _check_guard(math.prod(b ** l + mbar for l in lv), 0)
        _as_terms(lv, _qi_dense(f, lv, mbar, b, nq), mbar, b, p, terms)
        return NTermExpansion(terms, p, mbar, b)
    if adaptive_tol is not None:
        if kind != "isotropic":
            raise ValueError("adaptive refinement is only available for isotropic systems")
        return _qi_adaptive(f, L_max, mbar, p, D, b, nq, adaptive_tol, full_levels)
    mls = _multilevels(kind, L_max, D, alpha)
    est = sum(math.prod(b ** l + mbar for l in lv) for lv in mls)
    _check_guard(est, 0)
    cache: dict = {}

    def T(lv):
        if lv not in cache:
            cache[lv] = _qi_dense(f, lv, mbar, b, nq)
        return cache[lv]

    if kind in ("isotropic", "anisotropic"):
        prev = None
        for lv in mls:
            cur = T(lv)
            det = cur if prev is None else cur - _refine(T(prev), prev, lv, b, mbar)
            _as_terms(lv, det, mbar, b, p, terms)
            prev = lv
    else:
        for lv in mls:
            det = np.zeros(tuple(b ** l + mbar for l in lv))
            for eps in itertools.product((0, 1), repeat=D):
                lo = tuple(l - e for l, e in zip(lv, eps))
                if min(lo) < 0:
                    continue
                det += (-1) ** sum(eps) * _refine(T(lo), lo, lv, b, mbar)
            _as_terms(lv, det, mbar, b, p, terms)
    return NTermExpansion(terms, p, mbar, b)


def _qi_adaptive(f, L_max, mbar, p, D, b, nq, tol, full_levels) -> NTermExpansion:
    mask = _refinement_mask(mbar, b)
    K = mask.size - 1
    T_cache: list[dict] = []

    def T_at(l, shifts):
        while len(T_cache) <= l:
            T_cache.append({})
        cache = T_cache[l]
        need = [s for s in shifts if s not in cache]
        if need:
            vals = _qi_at_shifts(f, (l,) * D, np.array(need), mbar, b, nq)
            cache.update(zip(need, vals.tolist()))
        return np.array([cache[s] for s in shifts])

    terms: list = []
    fac = _lp_factor(b, p)
    lvl0 = min(full_levels, L_max)
    active: list = []
    for l in range(L_max + 1):
        if l <= lvl0:
            req = list(itertools.product(range(-mbar, b ** l), repeat=D))
        else:
            cand = set()
            for par in active:
                rng = [range(max(b * j - mbar, -mbar), min(b * (j + mbar + 1), b ** l))
                       for j in par]
                cand.update(itertools.product(*rng))
            req = sorted(cand)
        if not req:
            break
        cur = T_at(l, req)
        if l > 0:
            # refinement of the level l-1 quasi-interpolant at the requested shifts
            offs = range(K // b + 2)
            parents = {}
            for s in req:
                for t in itertools.product(offs, repeat=D):
                    jp = tuple(sj // b - tt for sj, tt in zip(s, t))
                    if all(-mbar <= a <= b ** (l - 1) - 1 for a in jp) and \
                            all(0 <= sj - b * a <= K for sj, a in zip(s, jp)):
                        parents.setdefault(s, []).append(jp)
            allp = sorted({jp for v in parents.values() for jp in v})
            pv = dict(zip(allp, T_at(l - 1, allp).tolist())) if allp else {}
            ref = np.zeros(len(req))
            for r, s in enumerate(req):
                acc = 0.0
                for jp in parents.get(s, ()):
                    wgt = 1.0
                    for sj, a in zip(s, jp):
                        wgt *= mask[sj - b * a]
                    acc += wgt * pv[jp]
                ref[r] = acc
            det = cur - ref
        else:
            det = cur
        det = det / fac ** (l * D)
        active = []
        for s, d in zip(req, det):
            terms.append((SplineIndex((l,) * D, tuple(s)), float(d)))
            if abs(d) > tol:
                active.append(s)
    return NTermExpansion(terms, p, mbar, b)


def threshold_nterm(e: NTermExpansion, n: int) -> NTermExpansion:
    """Keep the ``n`` largest coefficients; ties are broken by index order."""
    order = sorted(range(e.n), key=lambda t: (-abs(e.terms[t][1]), e.terms[t][0]))
    keep = sorted(order[:n], key=lambda t: e.terms[t][0])
    return NTermExpansion([e.terms[t] for t in keep], e.p, e.mbar, e.b)


# ---------------------------------------------------------------------------
# sawtooth

def sawtooth(l: int, b: int = 2) -> Callable:
    """``x -> prod_nu frac(b^l x_nu)`` as a vectorized callable on ``(N, D)`` points."""
    scale = float(b) ** l

    def psi(X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return np.prod(np.mod(X * scale, 1.0), axis=1)

    return psi


def encode_sawtooth(l: int, b: int = 2, D: int = 1, m: int = 1) -> TTFunction:
    """Rank-one train of the sawtooth at tensorization level ``l``."""
    if m < 1:
        raise ValueError("the sawtooth needs m >= 1")
    ones = np.ones((1, b, 1))
    poly = np.zeros((1, m + 1, 1))
    poly[0, :, 0] = monomial_to_legendre([0.0, 1.0], m)
    cores = [ones] * (l * D) + [poly] * D
    return TTFunction(EncodingParams(b, l, D), m, tuple(cores))
