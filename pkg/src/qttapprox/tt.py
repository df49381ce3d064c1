"""Tensor trains over tensorized coordinates.

A :class:`TTFunction` represents a function on [0, 1)^D through its
tensorization at level ``L`` in base ``b``: ``L*D`` digit cores of mode size
``b`` followed by ``D`` polynomial cores of mode size ``m + 1`` whose slices are
coefficients in the orthonormal shifted Legendre basis.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .basis import dilation_matrices, legendre_values
from .tensorizer import EncodingParams, encode_points, mode_sizes

__all__ = [
    "TTFunction",
    "DEFAULT_TOL",
    "check_admissible",
    "rank_upper_bounds",
    "zeros",
    "constant",
    "random_tt",
    "evaluate",
    "evaluate_many",
    "scale",
    "add",
    "extend_level",
    "computed_ranks",
    "singular_values",
    "round_tt",
    "full_tensor",
    "tt_svd",
    "from_cell_coefficients",
    "tensor_product",
    "to_json",
    "from_json",
    "is_zero_representation",
]

DEFAULT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TTFunction:
    """A function on [0, 1)^D stored as a tensor train.

    Attributes
    ----------
    params : EncodingParams
        Base, level and dimension of the tensorization.
    m : int
        Degree of the polynomial factor in each remainder variable.
    cores : tuple of ndarray
        Read-only cores of shape ``(r_{k-1}, n_k, r_k)`` with ``r_0 = r_K = 1``.
    basis : str
        Name of the remainder basis; only ``"legendre"`` is supported.
    """

    params: EncodingParams
    m: int
    cores: tuple
    basis: str = field(default="legendre")

    def __post_init__(self):
        if self.basis != "legendre":
            raise ValueError(f"unsupported basis {self.basis!r}")
        if self.m < 0:
            raise ValueError("polynomial degree m must be >= 0")
        sizes = mode_sizes(self.params, self.m)
        if len(self.cores) != len(sizes):
            raise ValueError(f"expected {len(sizes)} cores, got {len(self.cores)}")
        frozen = []
        prev = 1
        for k, (c, n) in enumerate(zip(self.cores, sizes)):
            a = np.array(c, dtype=float, copy=True, order="C")
            if a.ndim != 3:
                raise ValueError(f"core {k} must be 3-dimensional, got shape {a.shape}")
            if a.shape[0] != prev or a.shape[1] != n:
                raise ValueError(f"core {k} has shape {a.shape}; expected ({prev}, {n}, *)")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"core {k} contains non-finite entries")
            prev = a.shape[2]
            a.setflags(write=False)
            frozen.append(a)
        if prev != 1:
            raise ValueError("last core must have right rank 1")
        object.__setattr__(self, "cores", tuple(frozen))

    @property
    def b(self) -> int:
        return self.params.b

    @property
    def L(self) -> int:
        return self.params.L

    @property
    def D(self) -> int:
        return self.params.D

    @property
    def ranks(self) -> tuple[int, ...]:
        """Representation ranks ``r_1 .. r_{K-1}`` (the bond dimensions)."""
        return tuple(c.shape[2] for c in self.cores[:-1])

    @property
    def n_cores(self) -> int:
        return len(self.cores)

    def __call__(self, X) -> np.ndarray:
        return evaluate_many(self, X)

    def __repr__(self) -> str:
        return (f"TTFunction(b={self.b}, L={self.L}, D={self.D}, m={self.m}, "
                f"ranks={self.ranks})")


def rank_upper_bounds(params: EncodingParams, m: int) -> tuple[int, ...]:
    """``min(prod of left mode sizes, prod of right mode sizes)`` for every bond."""
    sizes = mode_sizes(params, m)
    K = len(sizes)
    out = []
    for nu in range(1, K):
        lp = math.prod(sizes[:nu])
        rp = math.prod(sizes[nu:])
        out.append(min(lp, rp))
    return tuple(out)


def check_admissible(ranks: Sequence[int], params: EncodingParams, m: int) -> tuple[bool, str | None]:
    """Test a rank vector for admissibility.

    Returns ``(True, None)`` or ``(False, reason)`` naming the first violated
    condition. The all-zero vector is admissible; mixing zero and nonzero
    ranks is not.
    """
    sizes = mode_sizes(params, m)
    K = len(sizes)
    r = [int(x) for x in ranks]
    if len(r) != K - 1:
        return False, f"expected {K - 1} ranks, got {len(r)}"
    if any(x < 0 for x in r):
        return False, "ranks must be nonnegative"
    if K == 1:
        return True, None
    if all(x == 0 for x in r):
        return True, None
    if any(x == 0 for x in r):
        nu = r.index(0) + 1
        return False, f"r_{nu} = 0 while other ranks are positive"
    full = [1] + r + [1]
    for nu in range(1, K):
        n_left = sizes[nu - 1]
        n_right = sizes[nu]
        if full[nu] > n_left * full[nu - 1]:
            return False, f"r_{nu} = {full[nu]} > {n_left} * r_{nu - 1} = {n_left * full[nu - 1]}"
        if full[nu] > n_right * full[nu + 1]:
            return False, f"r_{nu} = {full[nu]} > {n_right} * r_{nu + 1} = {n_right * full[nu + 1]}"
    bounds = rank_upper_bounds(params, m)
    for nu, (x, ub) in enumerate(zip(r, bounds), start=1):
        if x > ub:
            return False, f"r_{nu} = {x} exceeds the unfolding bound {ub}"
    return True, None


def zeros(params: EncodingParams, m: int) -> TTFunction:
    """The zero function (all ranks one, all entries zero)."""
    sizes = mode_sizes(params, m)
    return TTFunction(params, m, tuple(np.zeros((1, n, 1)) for n in sizes))


def constant(params: EncodingParams, m: int, value: float = 1.0) -> TTFunction:
    """The constant function ``value``."""
    sizes = mode_sizes(params, m)
    cores = []
    for k, n in enumerate(sizes):
        c = np.zeros((1, n, 1))
        if k < params.n_digits:
            c[0, :, 0] = 1.0
        else:
            c[0, 0, 0] = 1.0
        cores.append(c)
    cores[0] = cores[0] * value
    return TTFunction(params, m, tuple(cores))


def random_tt(params: EncodingParams, m: int, ranks: Sequence[int] | None = None,
              rng: np.random.Generator | None = None, density: float = 1.0,
              max_rank: int | None = None) -> TTFunction:
    """A random train with the given (or random admissible) ranks.

    Parameters
    ----------
    ranks : sequence of int, optional
        Bond dimensions; drawn at random below the admissible bounds if omitted.
    density : float
        Probability that a core entry is nonzero.
    max_rank : int, optional
        Cap used when drawing ranks.
    """
    rng = np.random.default_rng() if rng is None else rng
    sizes = mode_sizes(params, m)
    K = len(sizes)
    if ranks is None:
        ub = rank_upper_bounds(params, m)
        cap = max_rank or 4
        r = [int(rng.integers(1, min(u, cap) + 1)) for u in ub]
        ranks = _make_admissible(r, sizes)
    ok, why = check_admissible(ranks, params, m)
    if not ok:
        raise ValueError(f"inadmissible ranks: {why}")
    full = [1] + list(ranks) + [1]
    cores = []
    for k in range(K):
        c = rng.standard_normal((full[k], sizes[k], full[k + 1]))
        if density < 1.0:
            c *= rng.random(c.shape) < density
            if not c.any():
                c.flat[int(rng.integers(c.size))] = 1.0
        cores.append(c)
    return TTFunction(params, m, tuple(cores))


def _make_admissible(r: list[int], sizes: Sequence[int]) -> list[int]:
    # clip ranks against neighbours until the local conditions hold
    full = [1] + list(r) + [1]
    changed = True
    while changed:
        changed = False
        for nu in range(1, len(full) - 1):
            cap = min(sizes[nu - 1] * full[nu - 1], sizes[nu] * full[nu + 1])
            if full[nu] > cap:
                full[nu] = cap
                changed = True
    return full[1:-1]


def _phis(tt: TTFunction, xbar: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(legendre_values(tt.m, xbar))  # (N, D, m+1)


def evaluate_many(tt: TTFunction, X, backend: str | None = None) -> np.ndarray:
    """Evaluate at an ``(N, D)`` array of points in [0, 1)^D."""
    digits, xbar = encode_points(X, tt.params)
    return kernels.tt_contract(tt.cores, digits, _phis(tt, xbar), backend=backend)


def evaluate(tt: TTFunction, x) -> float:
    """Evaluate at a single point ``x`` in [0, 1)^D."""
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1)
    return float(evaluate_many(tt, x)[0])


def evaluate_entry(tt: TTFunction, digits: Sequence[int], xbar: Sequence[float]) -> float:
    """Evaluate the tensorized function at explicit digits and remainders."""
    d = np.asarray(digits, dtype=np.int64).reshape(1, -1)
    if d.shape[1] != tt.params.n_digits or ((d < 0) | (d >= tt.b)).any():
        raise ValueError("digits do not match the tensorization")
    xb = np.asarray(xbar, dtype=float).reshape(1, -1)
    return float(kernels.tt_contract(tt.cores, d, _phis(tt, xb))[0])


def scale(tt: TTFunction, c: float) -> TTFunction:
    """Multiply by the scalar ``c``; only the first core changes."""
    cores = list(tt.cores)
    cores[0] = cores[0] * float(c)
    return TTFunction(tt.params, tt.m, tuple(cores))


def _same_space(f: TTFunction, g: TTFunction):
    if (f.b, f.D, f.m, f.basis) != (g.b, g.D, g.m, g.basis):
        raise ValueError(f"incompatible trains: (b, D, m) = {(f.b, f.D, f.m)} vs {(g.b, g.D, g.m)}")


def add(f: TTFunction, g: TTFunction) -> TTFunction:
    """Sum of two trains in the same space.

    The operand at the lower level is first extended to the higher level, then
    the cores are combined as a direct sum.
    """
    _same_space(f, g)
    if f.L < g.L:
        f = extend_level(f, g.L)
    elif g.L < f.L:
        g = extend_level(g, f.L)
    K = f.n_cores
    if K == 1:
        return TTFunction(f.params, f.m, (f.cores[0] + g.cores[0],))
    cores = []
    for k, (a, c) in enumerate(zip(f.cores, g.cores)):
        if k == 0:
            cores.append(np.concatenate([a, c], axis=2))
        elif k == K - 1:
            cores.append(np.concatenate([a, c], axis=0))
        else:
            blk = np.zeros((a.shape[0] + c.shape[0], a.shape[1], a.shape[2] + c.shape[2]))
            blk[: a.shape[0], :, : a.shape[2]] = a
            blk[a.shape[0]:, :, a.shape[2]:] = c
            cores.append(blk)
    return TTFunction(f.params, f.m, tuple(cores))


def _minimal_poly_ranks(tt: TTFunction) -> TTFunction:
    # Compress the remainder block so that r_{LD+nu} <= (m+1)^{D-nu}. Only
    # exactly redundant directions (relative 1e-14) are removed.
    nd = tt.params.n_digits
    D, m = tt.D, tt.m
    cores = list(tt.cores)
    need = any(cores[nd + nu].shape[0] > (m + 1) ** (D - nu) for nu in range(D))
    if not need:
        return tt
    # right-to-left orthogonalization over the polynomial cores
    for k in range(nd + D - 1, max(nd, 1) - 1, -1):
        c = cores[k]
        r, n, s = c.shape
        mat = c.reshape(r, n * s)
        u, sv, vt = np.linalg.svd(mat, full_matrices=False)
        keep = int(np.sum(sv > 1e-14 * sv[0])) if sv.size and sv[0] > 0 else 1
        keep = max(keep, 1)
        cores[k] = vt[:keep].reshape(keep, n, s)
        cores[k - 1] = np.einsum("anr,rk->ank", cores[k - 1], u[:, :keep] * sv[:keep])
    return TTFunction(tt.params, tt.m, tuple(cores))


def _extend_one(tt: TTFunction) -> TTFunction:
    b, L, D, m = tt.b, tt.L, tt.D, tt.m
    nd = L * D
    M = dilation_matrices(m, b)  # (j, n, k)
    digit_cores = list(tt.cores[:nd])
    poly = tt.cores[nd:]
    new_digits = []
    q = m + 1
    for nu in range(D):
        P = poly[nu]
        a, _, c = P.shape
        G = np.einsum("anc,jnk->ajck", P, M)
        kdim = q ** nu
        eye = np.eye(kdim)
        C = np.einsum("ajck,xy->axjcyk", G, eye).reshape(a * kdim, b, c * kdim * q)
        new_digits.append(C)
    new_poly = []
    for nu in range(D):
        rest = q ** (D - nu - 1)
        Y = np.einsum("xk,yz->xykz", np.eye(q), np.eye(rest)).reshape(q * rest, q, rest)
        new_poly.append(Y)
    params = tt.params.with_level(L + 1)
    return TTFunction(params, m, tuple(digit_cores + new_digits + new_poly))


def extend_level(tt: TTFunction, L_target: int) -> TTFunction:
    """Re-express the function at the finer level ``L_target``.

    Each added level turns the polynomial cores into digit cores through the
    sub-cell restriction matrices and appends identity-like polynomial cores.
    Existing digit cores are kept unchanged.
    """
    if L_target < tt.L:
        raise ValueError(f"target level {L_target} is below the current level {tt.L}")
    if L_target == tt.L:
        return tt
    EncodingParams(tt.b, L_target, tt.D)  # validates the range
    out = _minimal_poly_ranks(tt)
    for _ in range(L_target - tt.L):
        out = _extend_one(out)
    return out


def is_zero_representation(tt: TTFunction, zeta: float = 0.0) -> bool:
    """True when some core has no entry above ``zeta`` in magnitude."""
    return any(not np.any(np.abs(c) > zeta) for c in tt.cores)


def _orthogonal_sweep(tt: TTFunction, tol: float | None):
    # Left-orthogonalize with QR, then sweep right-to-left with SVDs. Returns
    # the new cores and per-bond singular values; truncates when tol is given.
    cores = [np.array(c) for c in tt.cores]
    K = len(cores)
    for k in range(K - 1):
        r, n, s = cores[k].shape
        qm, rm = np.linalg.qr(cores[k].reshape(r * n, s))
        cores[k] = qm.reshape(r, n, qm.shape[1])
        cores[k + 1] = np.einsum("ij,jns->ins", rm, cores[k + 1])
    svals: list[np.ndarray] = [np.zeros(0)] * (K - 1)
    for k in range(K - 1, 0, -1):
        r, n, s = cores[k].shape
        u, sv, vt = np.linalg.svd(cores[k].reshape(r, n * s), full_matrices=False)
        svals[k - 1] = sv
        if tol is not None:
            smax = sv[0] if sv.size else 0.0
            keep = int(np.sum(sv > tol * smax)) if smax > 0 else 1
            keep = max(keep, 1)
            u, sv, vt = u[:, :keep], sv[:keep], vt[:keep]
        cores[k] = vt.reshape(vt.shape[0], n, s)
        cores[k - 1] = np.einsum("anr,rk->ank", cores[k - 1], u * sv)
    return cores, svals


def singular_values(tt: TTFunction) -> list[np.ndarray]:
    """Singular values of every sequential unfolding of the coefficient tensor."""
    _, sv = _orthogonal_sweep(tt, None)
    return sv


def computed_ranks(tt: TTFunction, tol: float = DEFAULT_TOL) -> tuple[int, ...]:
    """Numerical ranks: singular values above ``tol`` times the largest one.

    The zero function has all ranks zero.
    """
    if tt.n_cores == 1:
        return ()
    if is_zero_representation(tt):
        return (0,) * (tt.n_cores - 1)
    out = []
    for sv in singular_values(tt):
        smax = sv[0] if sv.size else 0.0
        out.append(int(np.sum(sv > tol * smax)) if smax > 0 else 0)
    if any(r == 0 for r in out):
        return (0,) * len(out)
    return tuple(out)


def round_tt(tt: TTFunction, tol: float = DEFAULT_TOL) -> TTFunction:
    """Recompress by truncating singular values below ``tol`` times the largest.

    The ranks of the result equal :func:`computed_ranks` with the same ``tol``.
    """
    if tt.n_cores == 1:
        return tt
    if is_zero_representation(tt):
        return zeros(tt.params, tt.m)
    cores, sv = _orthogonal_sweep(tt, tol)
    if any(s.size == 0 or s[0] == 0 for s in sv):
        return zeros(tt.params, tt.m)
    return TTFunction(tt.params, tt.m, tuple(cores))


def full_tensor(tt: TTFunction, max_entries: int = 1 << 24) -> np.ndarray:
    """Materialize the coefficient tensor (mode sizes as in the tensorization)."""
    sizes = mode_sizes(tt.params, tt.m)
    if math.prod(sizes) > max_entries:
        raise MemoryError(f"full tensor with {math.prod(sizes)} entries exceeds {max_entries}")
    out = np.ones((1, 1))
    for c in tt.cores:
        out = np.einsum("ar,rns->ans", out, c).reshape(-1, c.shape[2])
    return out.reshape(sizes)


def tt_svd(tensor: np.ndarray, tol: float = DEFAULT_TOL) -> list[np.ndarray]:
    """Sequential SVD of a full tensor with relative singular value cutoff."""
    shape = tensor.shape
    cores = []
    r = 1
    rest = np.asarray(tensor, dtype=float).reshape(1, -1)
    for n in shape[:-1]:
        mat = rest.reshape(r * n, -1)
        u, sv, vt = np.linalg.svd(mat, full_matrices=False)
        smax = sv[0] if sv.size else 0.0
        keep = max(int(np.sum(sv > tol * smax)) if smax > 0 else 1, 1)
        cores.append(u[:, :keep].reshape(r, n, keep))
        rest = sv[:keep, None] * vt[:keep]
        r = keep
    cores.append(rest.reshape(r, shape[-1], 1))
    return cores


def from_cell_coefficients(coeffs: np.ndarray, params: EncodingParams, m: int,
                           tol: float = 1e-13) -> TTFunction:
    """Build a train from per-cell polynomial coefficients.

    Parameters
    ----------
    coeffs : ndarray, shape ``(b**L,)*D + (m+1,)*D``
        ``coeffs[c_1, .., c_D, n_1, .., n_D]`` is the coefficient of
        ``phi_{n_1} x .. x phi_{n_D}`` on cell ``(c_1, .., c_D)`` in local
        coordinates.
    """
    b, L, D = params.b, params.L, params.D
    expected = (b ** L,) * D + (m + 1,) * D
    if coeffs.shape != expected:
        raise ValueError(f"expected coefficient array of shape {expected}, got {coeffs.shape}")
    t = coeffs.reshape([b] * (L * D) + [m + 1] * D)
    if D > 1:
        # axes are (dim, level) ordered; move to level-major
        perm = [nu * L + k for k in range(L) for nu in range(D)]
        perm += list(range(L * D, L * D + D))
        t = t.transpose(perm)
    if not np.any(t):
        return zeros(params, m)
    return TTFunction(params, m, tuple(tt_svd(t, tol)))


def tensor_product(factors: Sequence[TTFunction]) -> TTFunction:
    """Interleave one-dimensional trains into a train for their tensor product."""
    if not factors:
        raise ValueError("need at least one factor")
    f0 = factors[0]
    for f in factors:
        if f.D != 1:
            raise ValueError("factors must be one-dimensional")
        _same_space(f0, f)
    Lmax = max(f.L for f in factors)
    factors = [extend_level(f, Lmax) for f in factors]
    D = len(factors)
    b, m, L = f0.b, f0.m, Lmax
    # bond dims of factor eta after its t-th digit core (t = 0..L)
    bond = [[1] + [f.cores[t].shape[2] for t in range(L)] for f in factors]
    cores = []
    for t in range(L):
        for nu in range(D):
            A = math.prod(bond[eta][t + 1] for eta in range(nu))
            B = math.prod(bond[eta][t] for eta in range(nu + 1, D))
            G = factors[nu].cores[t]
            C = np.einsum("xy,aic,uv->xauiycv", np.eye(A), G, np.eye(B))
            cores.append(C.reshape(A * G.shape[0] * B, G.shape[1], A * G.shape[2] * B))
    for nu in range(D):
        B = math.prod(bond[eta][L] for eta in range(nu + 1, D))
        G = factors[nu].cores[L]
        C = np.einsum("aic,uv->auicv", G, np.eye(B))
        cores.append(C.reshape(G.shape[0] * B, G.shape[1], G.shape[2] * B))
    return TTFunction(EncodingParams(b, L, D), m, tuple(cores))


def to_json(tt: TTFunction) -> str:
    """Serialize; floats are written with round-trip precision."""
    doc = {
        "b": tt.b, "L": tt.L, "D": tt.D, "m": tt.m, "basis": tt.basis,
        "cores": [
            {"left": int(c.shape[0]), "mode": int(c.shape[1]), "right": int(c.shape[2]),
             "entries": [float(v) for v in c.ravel()]}
            for c in tt.cores
        ],
    }
    return json.dumps(doc)


def from_json(text: str) -> TTFunction:
    """Inverse of :func:`to_json`; validates every field."""
    doc = json.loads(text)
    for key in ("b", "L", "D", "m", "basis", "cores"):
        if key not in doc:
            raise ValueError(f"missing field {key!r}")
    params = EncodingParams(int(doc["b"]), int(doc["L"]), int(doc["D"]))
    cores = []
    for k, c in enumerate(doc["cores"]):
        shape = (int(c["left"]), int(c["mode"]), int(c["right"]))
        ent = np.asarray(c["entries"], dtype=float)
        if ent.size != math.prod(shape):
            raise ValueError(f"core {k}: {ent.size} entries for shape {shape}")
        cores.append(ent.reshape(shape))
    return TTFunction(params, int(doc["m"]), tuple(cores), basis=doc["basis"])
