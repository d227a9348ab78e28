import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma

from gevreysum.borel import (BorelTable, FNormParams, beta_convolve, beta_fn, borel_monomial_mult,
                             borel_transform, euler_borel_diff, f_norm, inverse_borel,
                             operator_bound_check, shift_down)
from gevreysum.instance import PolySpec
from gevreysum.mode_space import ModeGrid
from gevreysum.series import CoeffTable, apply_linear_term, cauchy_star

G7 = ModeGrid(3.0, 7)


def _table(N1, N2, seed, grid=G7, eps=0.1):
    rng = np.random.default_rng(seed)
    shape = (N1 + 1, N2 + 1, grid.n_points)
    v = (rng.normal(size=shape) + 1j * rng.normal(size=shape)) * np.exp(-np.abs(grid.nodes))
    v[0] = 0
    v[:, 0] = 0
    return CoeffTable(grid, eps, v)


def _single(N1, N2, n1, n2, k1, k2, val=1.0):
    w = BorelTable.zeros(G7, 0.1, N1, N2, k1, k2)
    w.values[n1, n2] = val
    return w


def test_borel_divisors():
    U = CoeffTable.zeros(G7, 0.1, 3, 3)
    U.values[2, 3] = 1.0
    U.values[1, 3] = 1.0
    w = borel_transform(U, 2, 3)
    assert np.all(w.values[2, 3] == 1.0)
    assert w.values[1, 3, 0].real == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)


def test_borel_round_trip():
    U = _table(8, 8, 0)
    back = inverse_borel(borel_transform(U, 2, 3)).values
    assert np.max(np.abs(back - U.values)) <= 1e-15 * np.max(np.abs(U.values))


def test_beta_function_matches_quadrature():
    rng = np.random.default_rng(7)
    for x, y in rng.uniform(0.05, 4.0, size=(20, 2)):
        ref, _ = quad(lambda t: 1.0, 0, 1, weight="alg", wvar=(x - 1, y - 1), epsabs=0, epsrel=1e-13)
        assert float(beta_fn(x, y)) == pytest.approx(ref, rel=1e-10)


def test_beta_convolve_weights():
    a = _single(3, 0, 1, 0, 1, 1)
    out = beta_convolve(a, a, plain=True)
    assert out.values[2, 0, 0] == pytest.approx(1.0)
    a = _single(3, 0, 1, 0, 2, 1)
    out = beta_convolve(a, a, plain=True)
    assert out.values[2, 0, 0] == pytest.approx(math.pi, rel=1e-14)
    assert not np.any(beta_convolve(a, a.like(np.zeros_like(a.values)), plain=True).values)


def test_monomial_mult_identity_and_gamma_identity():
    w = borel_transform(_table(6, 6, 1), 2, 3)
    assert np.array_equal(borel_monomial_mult(w, 0, 0).values, w.values)
    for k in (1, 2, 3):
        for q in range(1, 5):
            for m in range(1, 5):
                t = _single(10, 0, q, 0, k, 1, 1 / gamma(q / k))
                out = borel_monomial_mult(t, m, 0).values[q + m, 0, 0]
                assert out.real == pytest.approx(1 / gamma((m + q) / k), rel=1e-13)


def test_euler_single_entry():
    t = _single(10, 10, 3, 2, 2, 3)
    out = euler_borel_diff(t, 0).values
    assert out[5, 2, 0] == 2.0
    out[5, 2] = 0
    assert not np.any(out)
    assert not np.any(euler_borel_diff(t.like(np.zeros_like(t.values)), 1).values)


@pytest.mark.parametrize("k1, k2", [(1, 2), (2, 3), (3, 3)])
def test_coefficient_identities_commute_with_borel(k1, k2):
    U = _table(12, 12, k1 * 10 + k2)
    w = borel_transform(U, k1, k2)
    scale = np.max(np.abs(w.values))
    # T^{k+1} d/dT
    lhs = borel_transform(apply_linear_term(U, k1 + 1, 1, 0, 0), k1, k2).values
    assert np.max(np.abs(lhs - euler_borel_diff(w, 0).values)) <= 1e-12 * scale * k1 * 12
    # T^m times
    lhs = borel_transform(apply_linear_term(U, 2, 0, 3, 0), k1, k2).values
    assert np.max(np.abs(lhs - borel_monomial_mult(w, 2, 3).values)) <= 1e-12 * scale
    # product with the star kernel; cauchy_star carries (2 pi)^-1/2
    V = _table(12, 12, 99)
    P1, P2 = PolySpec((1.0, 0.3)), PolySpec((0.5, 0.0, 0.2))
    lhs = borel_transform(cauchy_star(U, V, P1, P2), k1, k2).values * math.sqrt(2 * math.pi)
    rhs = beta_convolve(w, borel_transform(V, k1, k2), P1, P2).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))


def test_shift_down_rejects_poles():
    t = _single(4, 4, 1, 2, 1, 1)
    assert shift_down(t, 1, 2).values[0, 0, 0] == 1.0
    with pytest.raises(ValueError, match="pole"):
        shift_down(t, 2, 0)


def _params(eps=0.1):
    return FNormParams(0.5, 0.5, 1.0, 2.0, 2, 3, eps, 0.5)


def test_f_norm_basic_properties():
    w = borel_transform(_table(5, 5, 3), 2, 3)
    v = borel_transform(_table(5, 5, 4), 2, 3)
    p = _params()
    assert f_norm(w.like(np.zeros_like(w.values)), p).value == 0.0
    assert f_norm(w.like(3j * w.values), p).value == pytest.approx(3 * f_norm(w, p).value, rel=1e-14)
    assert f_norm(w.like(w.values + v.values), p).value <= f_norm(w, p).value + f_norm(v, p).value
    assert f_norm(w, p).label == "disc-restricted"


def test_f_norm_reports_the_maximizer(inst_a0, grid33):
    from gevreysum.series import solve_recursion
    w = borel_transform(solve_recursion(inst_a0, 0.1, 4, 4, grid33), 2, 3)
    r = f_norm(w, FNormParams(0.5, 0.5, 1.0, 2.0, 2, 3, 0.1, 0.5))
    # brute-force the same sup to locate it independently
    s = FNormParams(0.5, 0.5, 1.0, 2.0, 2, 3, 0.1, 0.5).samples()
    best = 0.0
    for t1 in s:
        for t2 in s:
            val = np.abs(np.einsum("a,b,abm->m", t1 ** np.arange(5), t2 ** np.arange(5), w.values))
            wt = ((1 + np.abs(t1 / 0.1) ** 4) / np.abs(t1 / 0.1) * np.exp(-0.5 * np.abs(t1 / 0.1) ** 2)
                  * (1 + np.abs(t2 / 0.1) ** 6) / np.abs(t2 / 0.1) * np.exp(-0.5 * np.abs(t2 / 0.1) ** 3))
            best = max(best, float(np.max(wt * (1 + np.abs(grid33.nodes)) ** 2
                                          * np.exp(np.abs(grid33.nodes)) * val)))
    assert r.value == pytest.approx(best, rel=1e-12)
    assert abs(r.tau1) <= 0.5 and abs(r.tau2) <= 0.5


@pytest.mark.parametrize("op", ["P2", "P2'", "P5", "P6"])
def test_operator_scaling_slopes(op, inst_a0, grid33):
    rep = operator_bound_check(op, inst_a0, np.logspace(-3, -1, 5), grid33)
    assert abs(rep.slope - rep.expected_slope) <= 0.15
    assert rep.flagged == ""


def test_operator_scaling_flags_and_errors(inst_a0, grid33):
    rep = operator_bound_check("P1", inst_a0, np.logspace(-3, -1, 4), grid33, zero_input=True)
    assert "zero input" in rep.flagged
    assert np.all(rep.ratios == 0)
    with pytest.raises(ValueError, match="degenerate fit"):
        operator_bound_check("P1", inst_a0, [1e-2, 1e-1], grid33)
