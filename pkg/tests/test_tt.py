import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qttapprox import splines as sp
from qttapprox import tt as ttm
from qttapprox.complexity import measure
from qttapprox.tensorizer import EncodingParams, mode_sizes

from conftest import bspline_oracle


def identity_tt(L: int = 1) -> ttm.TTFunction:
    # x = 1/2 N(2x) + N(2x - 1) on [0, 1) with sup-normalized hats
    e = sp.NTermExpansion([(sp.SplineIndex((1,), (0,)), 0.5),
                           (sp.SplineIndex((1,), (1,)), 1.0)], np.inf, 1, 2)
    return sp.encode_expansion(e, L, 1)


def unfolding_ranks(f: ttm.TTFunction, tol: float = 1e-10) -> tuple:
    full = ttm.full_tensor(f)
    sizes = full.shape
    out = []
    for nu in range(1, len(sizes)):
        sv = np.linalg.svd(full.reshape(math.prod(sizes[:nu]), -1), compute_uv=False)
        out.append(int(np.sum(sv > tol * sv[0])) if sv[0] > 0 else 0)
    return tuple(out)


# evaluation ------------------------------------------------------------------

def test_constant_one(rng):
    f = ttm.constant(EncodingParams(3, 2, 2), 2)
    np.testing.assert_allclose(f(rng.random((50, 2))), 1.0, atol=1e-15)


def test_identity_function(rng):
    f = identity_tt()
    assert ttm.evaluate(f, 0.8125) == pytest.approx(0.8125, abs=1e-15)
    x = rng.random(1000)
    np.testing.assert_allclose(f(x[:, None]), x, atol=1e-14)


def test_evaluate_entry():
    assert ttm.evaluate_entry(ttm.constant(EncodingParams(2, 2, 1), 1), (0, 1), (0.3,)) == 1.0
    assert ttm.evaluate_entry(identity_tt(), (1,), (0.5,)) == pytest.approx(0.75, abs=1e-15)
    assert ttm.evaluate_entry(ttm.zeros(EncodingParams(2, 1, 1), 1), (1,), (0.5,)) == 0.0
    with pytest.raises(ValueError):
        ttm.evaluate_entry(identity_tt(), (2,), (0.5,))
    with pytest.raises(ValueError):
        ttm.evaluate_entry(identity_tt(), (1, 0), (0.5,))


def test_evaluate_entry_matches_decode(rng):
    from qttapprox.tensorizer import DigitAddress, decode_point
    P = EncodingParams(3, 2, 2)
    f = ttm.random_tt(P, 1, rng=rng)
    for _ in range(20):
        d = tuple(int(v) for v in rng.integers(0, 3, 4))
        xb = tuple(rng.random(2))
        x = decode_point(DigitAddress(d, xb), P)
        assert ttm.evaluate_entry(f, d, xb) == pytest.approx(ttm.evaluate(f, x), rel=1e-12, abs=1e-12)


def test_domain_error():
    with pytest.raises(ValueError):
        ttm.evaluate(identity_tt(), 1.0)


def test_core_validation():
    P = EncodingParams(2, 1, 1)
    with pytest.raises(ValueError):
        ttm.TTFunction(P, 1, (np.ones((1, 2, 2)), np.ones((1, 2, 1))))
    with pytest.raises(ValueError):
        ttm.TTFunction(P, 1, (np.ones((1, 2, 1)), np.full((1, 2, 1), np.nan)))
    with pytest.raises(ValueError):
        ttm.TTFunction(P, 1, (np.ones((1, 2, 1)),))
    f = ttm.constant(P, 1)
    with pytest.raises(ValueError):
        f.cores[0][0, 0, 0] = 5.0


# scale and add ---------------------------------------------------------------

def test_scale_examples(rng):
    f = ttm.random_tt(EncodingParams(2, 3, 1), 1, rng=rng)
    g = ttm.scale(f, 1.0)
    assert all(np.array_equal(a, c) for a, c in zip(f.cores, g.cores))
    z = ttm.scale(f, 0.0)
    assert ttm.computed_ranks(z) == (0,) * len(f.ranks)
    c = ttm.scale(ttm.constant(EncodingParams(2, 2, 1), 1), -2.0)
    np.testing.assert_allclose(c(rng.random((10, 1))), -2.0)
    h = ttm.scale(f, 3.0)
    assert h.ranks == f.ranks
    assert sum(not np.array_equal(a, c) for a, c in zip(f.cores, h.cores)) == 1


def test_add_examples(rng):
    P = EncodingParams(2, 3, 1)
    f = ttm.random_tt(P, 1, rng=rng)
    fz = ttm.add(f, ttm.zeros(P, 1))
    assert all(r == rf + 1 for r, rf in zip(fz.ranks, f.ranks))
    X = rng.random((1000, 1))
    np.testing.assert_allclose(ttm.round_tt(fz)(X), f(X), atol=1e-12)
    one = ttm.constant(P, 1)
    two = ttm.add(one, one)
    assert two.ranks == (2,) * len(one.ranks)
    assert ttm.round_tt(two).ranks == (1,) * len(one.ranks)
    np.testing.assert_allclose(two(X), 2.0, atol=1e-14)


def test_add_hats_partition():
    h0 = sp.encode_dilated_spline(1, 0, 1, np.inf, 1, 2, 1)
    h1 = sp.encode_dilated_spline(1, 1, 1, np.inf, 1, 2, 1)
    s = ttm.add(h0, h1)
    from conftest import sobol_points
    x = sobol_points(10_000, 1)[:, 0]
    oracle = bspline_oracle(1, 2 * x) + bspline_oracle(1, 2 * x - 1)
    assert np.max(np.abs(s(x[:, None]) - oracle)) <= 1e-12


def test_add_incompatible():
    with pytest.raises(ValueError):
        ttm.add(ttm.constant(EncodingParams(2, 1, 1), 1), ttm.constant(EncodingParams(3, 1, 1), 1))
    with pytest.raises(ValueError):
        ttm.add(ttm.constant(EncodingParams(2, 1, 1), 1), ttm.constant(EncodingParams(2, 1, 1), 2))


def test_add_single_core(rng):
    P = EncodingParams(2, 0, 1)
    f, g = ttm.random_tt(P, 2, rng=rng), ttm.random_tt(P, 2, rng=rng)
    X = rng.random((20, 1))
    np.testing.assert_allclose(ttm.add(f, g)(X), f(X) + g(X), atol=1e-13)


@given(st.integers(0, 2 ** 31), st.integers(2, 3), st.integers(1, 2), st.integers(0, 2),
       st.integers(0, 3), st.integers(0, 3))
def test_linearity(seed, b, D, m, LA, LB):
    rng = np.random.default_rng(seed)
    if D == 2:
        LA, LB = min(LA, 2), min(LB, 2)
    f = ttm.random_tt(EncodingParams(b, LA, D), m, rng=rng, max_rank=3)
    g = ttm.random_tt(EncodingParams(b, LB, D), m, rng=rng, max_rank=3)
    c = float(rng.normal())
    X = rng.random((10_000, D))
    fx, gx = f(X), g(X)
    h = ttm.add(f, g)
    scale_ = np.max(np.abs(fx)) + np.max(np.abs(gx))
    assert np.max(np.abs(h(X) - fx - gx)) <= 1e-11 * scale_
    assert np.max(np.abs(ttm.scale(f, c)(X) - c * fx)) <= 1e-11 * abs(c) * np.max(np.abs(fx)) + 1e-300
    assert ttm.check_admissible(ttm.computed_ranks(h), h.params, m)[0]


def test_add_rank_subadditivity(rng):
    P = EncodingParams(2, 3, 2)
    f, g = ttm.random_tt(P, 1, rng=rng), ttm.random_tt(P, 1, rng=rng)
    h = ttm.add(f, g)
    assert all(r == a + c for r, a, c in zip(h.ranks, f.ranks, g.ranks))


# level extension -----------------------------------------------------------------

def test_extend_constant_example():
    f = ttm.constant(EncodingParams(2, 0, 1), 0)
    g = ttm.extend_level(f, 2)
    added = measure(g).compl_S - measure(f).compl_S
    assert added == 4
    assert added <= 2 * 2 * 1 * 2 * 1


def test_extend_zero_levels_identity(rng):
    f = ttm.random_tt(EncodingParams(2, 2, 1), 1, rng=rng)
    assert ttm.extend_level(f, 2) is f
    with pytest.raises(ValueError):
        ttm.extend_level(f, 1)


def test_extend_identity_function():
    from conftest import sobol_points
    f = identity_tt(1)
    g = ttm.extend_level(f, 3)
    x = sobol_points(10_000, 1)
    assert np.max(np.abs(g(x) - x[:, 0])) <= 1e-12
    assert all(r <= 2 for r in g.ranks)


@given(st.integers(0, 2 ** 31), st.integers(2, 3), st.integers(1, 2), st.integers(0, 2),
       st.integers(0, 2), st.integers(1, 3))
def test_extend_properties(seed, b, D, m, LA, dL):
    from qttapprox.complexity import extension_sparse_bound
    rng = np.random.default_rng(seed)
    f = ttm.random_tt(EncodingParams(b, LA, D), m, rng=rng, density=0.6, max_rank=3)
    g = ttm.extend_level(f, LA + dL)
    X = rng.random((2000, D))
    fx = f(X)
    assert np.max(np.abs(g(X) - fx)) <= 1e-12 * max(1.0, np.max(np.abs(fx)))
    assert measure(g).compl_S <= extension_sparse_bound(measure(f).compl_S, b, m, D, LA, LA + dL)
    # bonds strictly inside the original digit block are untouched
    assert g.ranks[: max(LA * D - 1, 0)] == f.ranks[: max(LA * D - 1, 0)]
    assert all(np.array_equal(a, c) for a, c in zip(g.cores[: max(LA * D - 1, 0)], f.cores))


# ranks and rounding ---------------------------------------------------------------

def test_computed_ranks_examples():
    assert ttm.computed_ranks(ttm.constant(EncodingParams(2, 3, 2), 1)) == (1,) * 7
    f = sp.encode_dilated_spline(1, 0, 1, 2.0, 3, 2, 1)
    assert max(ttm.computed_ranks(f)) <= 2
    ix = sp.SplineIndex((1, 1), (0, 1))
    g = sp.encode_tensor_product(ix, 0, np.inf, 2, 2, 0)
    assert ttm.computed_ranks(g) == (1,) * len(g.ranks)
    assert unfolding_ranks(g) == ttm.computed_ranks(g)


def test_computed_ranks_scale_invariant(rng):
    f = ttm.random_tt(EncodingParams(2, 3, 1), 1, rng=rng)
    for c in (1e-8, -3.0, 1e6):
        assert ttm.computed_ranks(ttm.scale(f, c)) == ttm.computed_ranks(f)


def test_round_examples(rng):
    P = EncodingParams(2, 3, 1)
    f = ttm.random_tt(P, 1, rng=rng)
    X = rng.random((500, 1))
    r0 = ttm.round_tt(f, 0.0)
    np.testing.assert_allclose(r0(X), f(X), atol=1e-12)
    ff = ttm.round_tt(ttm.add(f, f), 1e-12)
    assert ff.ranks == ttm.computed_ranks(f)
    z = ttm.round_tt(ttm.zeros(P, 1))
    assert z.ranks == (1,) * len(f.ranks)
    assert np.all(z(X) == 0)
    r = ttm.round_tt(f, 1e-3)
    assert r.ranks == ttm.computed_ranks(f, 1e-3)


def test_round_error_bound(rng):
    P = EncodingParams(2, 4, 1)
    f = ttm.add(ttm.random_tt(P, 1, rng=rng), ttm.scale(ttm.random_tt(P, 1, rng=rng), 1e-4))
    tol = 1e-2
    g = ttm.round_tt(f, tol)
    a, c = ttm.full_tensor(f), ttm.full_tensor(g)
    # discrete-weighted norm: uniform weights on digits, orthonormal remainder basis
    w = 1.0 / a[..., 0].size
    err = math.sqrt(w * np.sum((a - c) ** 2))
    nrm = math.sqrt(w * np.sum(a ** 2))
    assert err <= tol * nrm * math.sqrt(len(f.ranks))


@pytest.mark.parametrize("b,L,D,m", [(2, L, D, m) for L in range(4) for D in (1, 2)
                                     for m in (0, 1) if L * D <= 6])
def test_brute_force_unfolding_ranks(b, L, D, m):
    rng = np.random.default_rng(100 * L + 10 * D + m)
    for _ in range(3):
        f = ttm.random_tt(EncodingParams(b, L, D), m, rng=rng, max_rank=3)
        assert unfolding_ranks(f) == ttm.computed_ranks(f)
        s = ttm.add(f, ttm.scale(f, 2.0))
        assert unfolding_ranks(s) == ttm.computed_ranks(s)


def test_check_admissible_examples():
    P = EncodingParams(2, 2, 1)
    assert ttm.check_admissible((1, 2), P, 1) == (True, None)
    ok, why = ttm.check_admissible((1, 3), P, 1)
    assert not ok and "3 > 2" in why
    assert not ttm.check_admissible((1,), P, 1)[0]
    assert ttm.check_admissible((0, 0), P, 1)[0]
    assert not ttm.check_admissible((0, 1), P, 1)[0]


@given(st.integers(0, 2 ** 31), st.integers(2, 3), st.integers(1, 2), st.integers(0, 2))
def test_constructions_admissible(seed, b, D, m):
    rng = np.random.default_rng(seed)
    P = EncodingParams(b, 2, D)
    f = ttm.random_tt(P, m, rng=rng)
    g = ttm.random_tt(EncodingParams(b, 1, D), m, rng=rng)
    for h in (f, ttm.add(f, g), ttm.extend_level(g, 3), ttm.round_tt(f, 1e-3), ttm.scale(f, 0.0)):
        assert ttm.check_admissible(ttm.computed_ranks(h), h.params, m)[0]


# complexity properties P1-P3 ------------------------------------------------------

def test_p1_zero():
    z = ttm.zeros(EncodingParams(2, 3, 2), 1)
    c = measure(z)
    assert (c.compl_F, c.compl_S, c.compl_N) == (0, 0, 0)


def test_p2_rank_padding(rng):
    f = ttm.random_tt(EncodingParams(2, 3, 1), 1, rng=rng)
    cores = [np.array(c) for c in f.cores]
    k = 1
    cores[k] = np.concatenate([cores[k], np.zeros(cores[k].shape[:2] + (1,))], axis=2)
    cores[k + 1] = np.concatenate([cores[k + 1], np.zeros((1,) + cores[k + 1].shape[1:])], axis=0)
    g = ttm.TTFunction(f.params, f.m, tuple(cores))
    X = rng.random((100, 1))
    np.testing.assert_allclose(g(X), f(X), atol=1e-14)
    a, c = measure(f), measure(g)
    assert c.compl_F >= a.compl_F and c.compl_N >= a.compl_N and c.compl_S == a.compl_S


# misc ---------------------------------------------------------------------------

def test_json_round_trip_bit_exact(rng):
    f = ttm.random_tt(EncodingParams(3, 2, 2), 2, rng=rng)
    g = ttm.from_json(ttm.to_json(f))
    assert all(np.array_equal(a, c) for a, c in zip(f.cores, g.cores))
    assert (g.b, g.L, g.D, g.m, g.basis) == (f.b, f.L, f.D, f.m, f.basis)
    assert measure(g) == measure(f)
    doc = json.loads(ttm.to_json(f))
    assert set(doc) == {"b", "L", "D", "m", "basis", "cores"}
    assert set(doc["cores"][0]) == {"left", "mode", "right", "entries"}


def test_json_validation(rng):
    doc = json.loads(ttm.to_json(ttm.constant(EncodingParams(2, 1, 1), 1)))
    bad = dict(doc)
    del bad["m"]
    with pytest.raises(ValueError):
        ttm.from_json(json.dumps(bad))
    doc["cores"][0]["entries"] = doc["cores"][0]["entries"][:-1]
    with pytest.raises(ValueError):
        ttm.from_json(json.dumps(doc))


def test_tt_svd_and_full_tensor(rng):
    t = rng.standard_normal((2, 3, 2, 4))
    cores = ttm.tt_svd(t, 1e-14)
    out = np.ones((1, 1))
    for c in cores:
        out = np.einsum("ar,rns->ans", out, c).reshape(-1, c.shape[2])
    np.testing.assert_allclose(out.reshape(t.shape), t, atol=1e-12)


def test_from_cell_coefficients(rng):
    P = EncodingParams(2, 2, 2)
    coeffs = rng.standard_normal((4, 4, 2, 2))
    f = ttm.from_cell_coefficients(coeffs, P, 1)
    from qttapprox.basis import legendre_values
    X = rng.random((200, 2))
    cells = np.floor(X * 4).astype(int)
    y = X * 4 - cells
    ph = legendre_values(1, y)
    expect = np.einsum("kab,ka,kb->k", coeffs[cells[:, 0], cells[:, 1]], ph[:, 0], ph[:, 1])
    np.testing.assert_allclose(f(X), expect, atol=1e-12)
    with pytest.raises(ValueError):
        ttm.from_cell_coefficients(coeffs[:2], P, 1)


def test_tensor_product(rng):
    f = ttm.random_tt(EncodingParams(2, 2, 1), 1, rng=rng)
    g = ttm.random_tt(EncodingParams(2, 3, 1), 1, rng=rng)
    h = ttm.tensor_product([f, g])
    X = rng.random((300, 2))
    np.testing.assert_allclose(h(X), f(X[:, :1]) * g(X[:, 1:]), atol=1e-12)


def test_mode_sizes_consistency(rng):
    P = EncodingParams(3, 2, 2)
    f = ttm.random_tt(P, 2, rng=rng)
    assert tuple(c.shape[1] for c in f.cores) == mode_sizes(P, 2)
