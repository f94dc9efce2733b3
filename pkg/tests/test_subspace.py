import numpy as np
import pytest

from conftest import make_hyper, make_mlr
from mixlearn._rng import stream
from mixlearn.model import MlrModel, sample_hyperplanes, sample_mlr
from mixlearn.subspace import (approx_block_svd, hyperplane_moment_matrix,
                               mlr_moment_matrix)


def test_rank_one_recovery():
    v = np.array([0.6, 0.8, 0.0, 0.0])
    sb = approx_block_svd(np.outer(v, v), 1, 1e-8, seed=3)
    err = min(np.linalg.norm(sb.u[:, 0] - v), np.linalg.norm(sb.u[:, 0] + v))
    assert err < 1e-10


def test_diagonal_top_block():
    sb = approx_block_svd(np.diag([3.0, 2.0, 1.0, 0.1]), 2, 1e-6, seed=3)
    proj = sb.u @ sb.u.T
    assert np.linalg.norm(proj - np.diag([1.0, 1.0, 0.0, 0.0])) < 1e-6
    assert np.linalg.norm(sb.u.T @ sb.u - np.eye(2)) < 1e-12


def test_block_svd_determinism_and_callable():
    m = np.diag([3.0, 2.0, 1.0, 0.1])
    a = approx_block_svd(m, 2, 1e-6, seed=3)
    b = approx_block_svd(m, 2, 1e-6, seed=3)
    assert np.array_equal(a.u, b.u)
    c = approx_block_svd(lambda blk: m @ blk, 2, 1e-6, seed=3, dim=4)
    assert np.array_equal(a.u, c.u)


def test_mlr_moment_matrix_expectation():
    m = make_mlr(2, 6, 1)
    a = 0.1 * np.ones(6)
    s = sample_mlr(m, 400_000, 17)
    got = mlr_moment_matrix(s, a)
    b = m.regressors - a
    want = sum(m.weights[i] * np.outer(b[i], b[i]) for i in range(2))
    assert np.linalg.norm(got - want) < 0.05


def test_hyperplane_moment_matrix_expectation():
    m = make_hyper(2, 5, 2)
    x = sample_hyperplanes(m, 400_000, 21)
    got = hyperplane_moment_matrix(x)
    want = sum(m.weights[i] * np.outer(m.directions[i], m.directions[i])
               for i in range(2))
    assert np.linalg.norm(got - want) < 0.05


def _wick_expectation(expr, xs):
    """E[expr] for independent standard normal symbols via moment rules."""
    import sympy as sp

    expr = sp.expand(expr)
    terms = expr.as_ordered_terms() if expr.is_Add else [expr]
    total = sp.Integer(0)
    for term in terms:
        coeff = term
        for x in xs:
            deg = sp.degree(sp.Poly(term, x), x)
            if deg % 2 == 1:
                coeff = sp.Integer(0)
                break
            coeff = coeff.subs(x, 1) if deg == 0 else coeff
            if deg >= 2:
                coeff = (coeff / x**deg).subs(x, 1) * sp.factorial2(deg - 1)
        total += coeff
    return sp.simplify(total)


def test_symbolic_expectation_small_dimension():
    """E[(r^2/2)(x x^T - I)] equals sum_i p_i (w_i - a)(w_i - a)^T exactly,
    including under additive label noise, worked symbolically at d = 4."""
    sp = pytest.importorskip("sympy")
    d, k = 4, 2
    xs = sp.symbols("x0:%d" % d)
    z = sp.symbols("z")  # standard normal label noise factor
    varsig = sp.symbols("varsigma", positive=True)
    ps = sp.symbols("p0:%d" % k, positive=True)
    bs = [sp.symbols("b%d_0:%d" % (i, d)) for i in range(k)]
    for i_row in range(d):
        for j_col in range(i_row, d):
            total = sp.Integer(0)
            for c in range(k):
                r = sum(bs[c][t] * xs[t] for t in range(d)) + varsig * z
                ent = sp.Rational(1, 2) * r**2 * (
                    xs[i_row] * xs[j_col] - (1 if i_row == j_col else 0))
                total += ps[c] * _wick_expectation(ent, list(xs) + [z])
            want = sum(ps[c] * bs[c][i_row] * bs[c][j_col] for c in range(k))
            assert sp.simplify(total - want) == 0


def test_span_captures_shifted_regressors():
    wins = 0
    for trial in range(8):
        rng = stream(900, trial)
        k, d, n = 3, 16, 100_000
        w = rng.standard_normal((k, d))
        w /= np.linalg.norm(w, axis=1)[:, None] * 2
        model = MlrModel(np.full(k, 1 / k), w)
        a = rng.standard_normal(d) * 0.1
        s = sample_mlr(model, n, 900, trial, 1)
        sb = approx_block_svd(mlr_moment_matrix(s, a), k, 0.01, seed=trial)
        good = True
        for i in range(k):
            b = w[i] - a
            good &= np.linalg.norm(sb.u.T @ b) / np.linalg.norm(b) >= 0.5
        wins += good
    assert wins == 8


def test_invalid_inputs():
    with pytest.raises(ValueError):
        approx_block_svd(np.ones((2, 3)), 1, 0.1)
    with pytest.raises(ValueError):
        approx_block_svd(np.eye(3), 4, 0.1)
    with pytest.raises(ValueError):
        approx_block_svd(lambda b: b, 1, 0.1)  # callable without dim
