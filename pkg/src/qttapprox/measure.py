"""Quadrature-based norms, moduli of smoothness and Besov seminorms.

All routines accept an *evaluable*: a callable mapping an ``(N, D)`` array of
points in [0, 1)^D to ``N`` values. Tensor trains qualify.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .basis import gauss_nodes
from .splines import bspline_segments

__all__ = [
    "QuadratureSpec",
    "default_spec",
    "NumericError",
    "quadrature",
    "lp_norm",
    "lp_error",
    "ModulusGrid",
    "ModulusResult",
    "BesovResult",
    "modulus",
    "besov_seminorm",
    "validate_embedding",
    "max_level_bound",
    "bspline_lp_norm",
]

_TOP = np.nextafter(1.0, 0.0)


class NumericError(FloatingPointError):
    """A non-finite value was produced by an evaluable."""


@dataclass(frozen=True)
class QuadratureSpec:
    """How integrals over (boxes in) [0, 1)^D are discretized.

    Attributes
    ----------
    method : {"gauss", "mc", "partition"}
        Composite tensor Gauss-Legendre on b-adic cells, Monte Carlo, or
        composite Gauss-Legendre on explicit one-dimensional breakpoints.
    nodes_per_cell : int
        Gauss nodes per cell and coordinate.
    cell_level : int
        Level of the b-adic cells.
    samples : int
        Monte Carlo sample count.
    seed : int
        Monte Carlo seed.
    breakpoints : tuple of float, optional
        Increasing breakpoints in [0, 1] for ``method="partition"``.
    """

    method: str = "gauss"
    nodes_per_cell: int = 4
    cell_level: int = 6
    b: int = 2
    samples: int = 200_000
    seed: int = 0
    breakpoints: tuple | None = field(default=None, repr=False)
    chunk: int = 1 << 20

    def __post_init__(self):
        if self.method not in ("gauss", "mc", "partition"):
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if self.method == "partition" and not self.breakpoints:
            raise ValueError("partition quadrature needs breakpoints")


def default_spec(D: int, level: int, b: int = 2, nodes_per_cell: int = 4,
                 seed: int = 0) -> QuadratureSpec:
    """Tensor Gauss-Legendre for ``D <= 2``, Monte Carlo otherwise."""
    if D <= 2:
        return QuadratureSpec("gauss", nodes_per_cell, level, b, seed=seed)
    return QuadratureSpec("mc", nodes_per_cell, level, b, seed=seed)


def _axis_rule(lo: float, hi: float, spec: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_nodes(spec.nodes_per_cell)
    if spec.method == "partition":
        bp = np.asarray(spec.breakpoints, dtype=float)
        a, c = bp[:-1], bp[1:]
    else:
        n = spec.b ** spec.cell_level
        k0 = int(math.floor(lo * n))
        k1 = int(math.ceil(hi * n))
        edges = np.arange(k0, k1 + 1) / float(n)
        a, c = edges[:-1], edges[1:]
    a = np.maximum(a, lo)
    c = np.minimum(c, hi)
    keep = c > a
    a, c = a[keep], c[keep]
    pts = (a[:, None] + (c - a)[:, None] * x[None, :]).ravel()
    wts = ((c - a)[:, None] * w[None, :]).ravel()
    return pts, wts


def quadrature(spec: QuadratureSpec, D: int, lo=None, hi=None
               ) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield chunks ``(points, weights)`` of a rule on the box ``[lo, hi)``."""
    lo = np.zeros(D) if lo is None else np.asarray(lo, dtype=float)
    hi = np.ones(D) if hi is None else np.asarray(hi, dtype=float)
    if np.any(hi <= lo):
        return
    if spec.method == "mc":
        vol = float(np.prod(hi - lo))
        ss = np.random.SeedSequence(spec.seed)
        n_chunks = max(1, math.ceil(spec.samples / spec.chunk))
        per = math.ceil(spec.samples / n_chunks)
        for child in ss.spawn(n_chunks):
            rng = np.random.default_rng(child)
            u = rng.random((per, D))
            yield lo + u * (hi - lo), np.full(per, vol / (per * n_chunks))
        return
    if spec.method == "partition" and D != 1:
        raise ValueError("partition quadrature is one-dimensional")
    rules = [_axis_rule(lo[nu], hi[nu], spec) for nu in range(D)]
    if D == 1:
        pts, wts = rules[0]
        for s in range(0, pts.size, spec.chunk):
            yield pts[s: s + spec.chunk, None], wts[s: s + spec.chunk]
        return
    inner_pts = np.stack(np.meshgrid(*[r[0] for r in rules[1:]], indexing="ij"),
                         axis=-1).reshape(-1, D - 1)
    inner_w = np.prod(np.stack(np.meshgrid(*[r[1] for r in rules[1:]], indexing="ij"),
                               axis=-1).reshape(-1, D - 1), axis=1)
    x0, w0 = rules[0]
    per = max(1, spec.chunk // max(inner_w.size, 1))
    for s in range(0, x0.size, per):
        xs, ws = x0[s: s + per], w0[s: s + per]
        pts = np.concatenate([np.repeat(xs, inner_w.size)[:, None],
                              np.tile(inner_pts, (xs.size, 1))], axis=1)
        yield pts, np.repeat(ws, inner_w.size) * np.tile(inner_w, xs.size)


def _values(f: Callable, X: np.ndarray) -> np.ndarray:
    v = np.asarray(f(np.minimum(X, _TOP)), dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        bad = X[~np.isfinite(v)][0]
        raise NumericError(f"non-finite value at x = {bad.tolist()}")
    return v


def _accumulate(vals_iter, p: float) -> float:
    if math.isinf(p):
        return max((float(np.max(np.abs(v))) for v, _ in vals_iter if v.size), default=0.0)
    tot = 0.0
    for v, w in vals_iter:
        tot += float(np.dot(w, np.abs(v) ** p))
    return tot ** (1.0 / p)


def lp_norm(f: Callable, p: float, spec: QuadratureSpec, D: int = 1) -> float:
    """``||f||_{L^p([0,1)^D)}`` by the given quadrature (``p = inf`` takes the max over nodes)."""
    if not p > 0:
        raise ValueError("p must be positive")
    return _accumulate(((_values(f, X), w) for X, w in quadrature(spec, D)), p)


def lp_error(f: Callable, g: Callable, p: float, spec: QuadratureSpec, D: int = 1) -> float:
    """``||f - g||_{L^p}`` by quadrature."""
    return _accumulate(((_values(f, X) - _values(g, X), w) for X, w in quadrature(spec, D)), p)


# ---------------------------------------------------------------------------
# moduli of smoothness

@dataclass(frozen=True)
class ModulusGrid:
    """Discretization of the supremum over ``|h|_2 <= t``.

    Magnitudes come from the lattice ``10^{-k/per_decade}``, ``k = 0 ..
    per_decade * decades``, plus ``t`` itself. Directions are ``+-e_nu`` and
    ``n_random`` seeded random unit vectors (default ``ceil(8 (D - 1))``).
    """

    per_decade: int = 20
    decades: int = 4
    n_random: int | None = None
    seed: int = 0
    spec: QuadratureSpec = field(default_factory=QuadratureSpec)

    def lattice(self) -> np.ndarray:
        k = np.arange(self.per_decade * self.decades + 1)
        return 10.0 ** (-k / self.per_decade)

    def directions(self, D: int) -> np.ndarray:
        eye = np.eye(D)
        dirs = [eye, -eye]
        n_rand = math.ceil(8 * (D - 1)) if self.n_random is None else self.n_random
        if n_rand > 0:
            rng = np.random.default_rng(self.seed)
            g = rng.standard_normal((n_rand, D))
            dirs.append(g / np.linalg.norm(g, axis=1, keepdims=True))
        return np.concatenate(dirs, axis=0)


@dataclass
class ModulusResult:
    value: float
    argmax: np.ndarray
    magnitudes: np.ndarray
    n_directions: int


@dataclass
class BesovResult:
    value: float
    t: np.ndarray
    omega: np.ndarray
    r: int


def _diff_norm(f: Callable, h: np.ndarray, r: int, p: float, spec: QuadratureSpec) -> float:
    D = h.size
    lo = np.maximum(0.0, -r * h)
    hi = np.minimum(1.0, 1.0 - r * h)
    if np.any(hi <= lo):
        return 0.0
    coef = [(-1) ** (r - k) * math.comb(r, k) for k in range(r + 1)]

    def gen():
        for X, w in quadrature(spec, D, lo, hi):
            acc = np.zeros(X.shape[0])
            for k, c in enumerate(coef):
                acc += c * _values(f, X + k * h)
            yield acc, w

    return _accumulate(gen(), p)


def _magnitudes(t: float, r: int, grid: ModulusGrid) -> np.ndarray:
    lat = grid.lattice()
    mags = list(lat[lat < t]) + [t]
    if r * t >= 1.0:
        # the domain shrinks to nothing at |h| = 1/r; approach it from below
        mags.append(t * (1.0 - 2.0 ** -20))
    return np.array(sorted(set(mags)))


def modulus(f: Callable, r: int, t: float, p: float, D: int = 1,
            grid: ModulusGrid | None = None) -> ModulusResult:
    """Discretized ``omega_r(f, t)_p = sup_{|h| <= t} ||Delta_h^r f||_{L^p(Omega_rh)}``."""
    if r < 1:
        raise ValueError("r must be >= 1")
    if t <= 0:
        raise ValueError("t must be positive")
    grid = ModulusGrid() if grid is None else grid
    dirs = grid.directions(D)
    mags = _magnitudes(t, r, grid)
    best, arg = 0.0, np.zeros(D)
    for a in mags:
        for d in dirs:
            v = _diff_norm(f, a * d, r, p, grid.spec)
            if v > best:
                best, arg = v, a * d
    return ModulusResult(best, arg, mags, len(dirs))


def besov_seminorm(f: Callable, s: float, p: float, q: float, D: int = 1,
                   grid: ModulusGrid | None = None, r: int | None = None) -> BesovResult:
    """Discretized Besov seminorm ``|f|_{B^s_q(L^p)}`` with ``r = floor(s) + 1``.

    The modulus is evaluated on the magnitude lattice and made monotone by a
    running maximum. The ``dt/t`` integral is a trapezoidal rule in ``log t``
    truncated at the smallest lattice magnitude.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    grid = ModulusGrid() if grid is None else grid
    r = int(math.floor(s)) + 1 if r is None else r
    lat = grid.lattice()[::-1]  # ascending
    dirs = grid.directions(D)
    g = np.zeros(lat.size)
    for k, a in enumerate(lat):
        cands = [a] + ([a * (1.0 - 2.0 ** -20)] if r * a >= 1.0 else [])
        g[k] = max(_diff_norm(f, c * d, r, p, grid.spec) for c in cands for d in dirs)
    omega = np.maximum.accumulate(g)
    scaled = lat ** (-s) * omega
    if math.isinf(q):
        val = float(np.max(scaled))
    else:
        dlog = math.log(10.0) / grid.per_decade
        w = np.full(lat.size, dlog)
        w[0] *= 0.5
        w[-1] *= 0.5
        val = float(np.dot(w, scaled ** q) ** (1.0 / q))
    return BesovResult(val, lat, omega, r)


# ---------------------------------------------------------------------------
# embeddings and the maximal level

def _smoothness(kind: str, smoothness, D: int) -> tuple[float, float]:
    # returns (s, alpha_min) with s the isotropic-equivalent smoothness
    if kind == "anisotropic":
        a = np.asarray(smoothness, dtype=float).reshape(-1)
        if a.size != D or np.any(a <= 0):
            raise ValueError("anisotropic smoothness must be D positive numbers")
        return float(D / np.sum(1.0 / a)), float(a.min())
    s = float(smoothness)
    if s <= 0:
        raise ValueError("smoothness must be positive")
    return s, s


def validate_embedding(kind: str, smoothness, tau: float, p: float, D: int = 1) -> bool:
    """Whether the Besov space continuously embeds into ``L^p`` (the approximation space).

    Isotropic and anisotropic: ``0 < tau < p < inf`` and ``s/D >= 1/tau - 1/p``.
    Mixed: additionally ``1 < p < inf`` and ``s_M >= 1/tau - 1/p``.
    """
    if kind not in ("isotropic", "anisotropic", "mixed"):
        raise ValueError(f"unknown kind {kind!r}")
    if not (0 < tau < p) or math.isinf(p):
        return False
    s, _ = _smoothness(kind, smoothness, D)
    gap = 1.0 / tau - 1.0 / p
    if kind == "mixed":
        return p > 1 and s >= gap
    return s / D >= gap


def bspline_lp_norm(mbar: int, p: float) -> float:
    """``||phi_mbar||_{L^p(R)}`` of the cardinal B-spline."""
    x, w = gauss_nodes(2 * mbar + 8)
    vals = np.concatenate([np.polyval(seg[::-1], x) for seg in bspline_segments(mbar)])
    if math.isinf(p):
        fine = np.linspace(0, 1, 2001)
        return float(max(np.max(np.abs(np.polyval(seg[::-1], fine)))
                         for seg in bspline_segments(mbar)))
    ww = np.tile(w, mbar + 1)
    return float(np.dot(ww, np.abs(vals) ** p) ** (1.0 / p))


def max_level_bound(kind: str, eps: float, n: int, smoothness, tau: float, p: float,
                    D: int = 1, b: int = 2, C_phi: float = 1.0, phi_norm: float = 1.0,
                    besov_norm: float = 1.0) -> float:
    """Level beyond which no term of a near-best ``n``-term expansion is needed.

    Requires excess regularity (strict inequality in the embedding condition).
    """
    if not validate_embedding(kind, smoothness, tau, p, D):
        raise ValueError("the Besov space does not embed into L^p for these parameters")
    if eps <= 0 or n < 1 or besov_norm <= 0:
        raise ValueError("need eps > 0, n >= 1 and a positive Besov norm")
    s, amin = _smoothness(kind, smoothness, D)
    gap = 1.0 / tau - 1.0 / p
    inv_q = 1.0 - 1.0 / tau if tau > 1 else 0.0
    log_term = math.log(eps / (2.0 * besov_norm * n ** inv_q), b)
    const = C_phi * phi_norm ** D
    if kind == "isotropic":
        denom = s - D * gap
        pre = const / denom if denom > 0 else math.inf
    elif kind == "anisotropic":
        denom = s - D * gap
        pre = amin * const / (s * denom) if denom > 0 else math.inf
    else:
        denom = s - gap
        pre = const / denom if denom > 0 else math.inf
    if math.isinf(pre):
        raise ValueError("excess regularity is required (strict inequality)")
    return abs(pre * log_term)
