import numpy as np
import pytest

from gevreysum.instance import GeneratorSpec, PolySpec, generate_coefficients
from gevreysum.mode_space import ModeGrid
from gevreysum.series import (CoeffTable, IllFounded, ResonantIndex, apply_linear_term, cauchy_star,
                              read_table_csv, scp_residual, solve_recursion, write_table_csv)


def _single(grid, N1, N2, n1, n2, fn=lambda m: np.exp(-m ** 2)):
    T = CoeffTable.zeros(grid, 0.1, N1, N2)
    T.values[n1, n2] = fn(grid.nodes)
    return T


def _random_table(grid, N1, N2, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(N1 + 1, N2 + 1, grid.n_points)) + 1j * rng.normal(size=(N1 + 1, N2 + 1, grid.n_points))
    v *= np.exp(-np.abs(grid.nodes))
    v[0] = 0
    v[:, 0] = 0
    return CoeffTable(grid, 0.1, v)


# ---------------------------------------------------------------- products

def test_cauchy_star_with_zero_factor():
    g = ModeGrid(6.0, 61)
    A = _random_table(g, 4, 4, 0)
    assert not np.any(cauchy_star(A, CoeffTable.zeros(g, 0.1, 4, 4)).values)


def test_single_entries_multiply_into_single_entry():
    g = ModeGrid(12.0, 241)
    A = _single(g, 4, 4, 1, 1)
    out = cauchy_star(A, A).values
    nz = {tuple(i) for i in np.argwhere(np.abs(out).max(axis=-1) > 0)}
    assert nz == {(2, 2)}
    # Gaussian self-convolution times (2 pi)^-1/2
    assert out[2, 2, g.center].real == pytest.approx(np.sqrt(np.pi / 2) / np.sqrt(2 * np.pi), rel=1e-12)


def test_symmetric_kernel_product_commutes():
    g = ModeGrid(6.0, 61)
    A, B = _random_table(g, 5, 4, 1), _random_table(g, 5, 4, 2)
    P = PolySpec((1.0, 0.5))
    ab = cauchy_star(A, B, P, P).values
    ba = cauchy_star(B, A, P, P).values
    assert np.max(np.abs(ab - ba)) <= 1e-12 * np.max(np.abs(ab))


# ---------------------------------------------------------------- linear terms

def test_linear_term_identity_and_euler():
    g = ModeGrid(3.0, 7)
    A = _random_table(g, 5, 5, 3)
    assert np.array_equal(apply_linear_term(A, 0, 0, 0, 0).values, A.values)
    out = apply_linear_term(A, 1, 1, 0, 0).values
    for n in range(6):
        assert np.allclose(out[n], n * A.values[n], rtol=0, atol=0)


def test_cubic_times_second_derivative():
    g = ModeGrid(3.0, 7)
    A = CoeffTable.zeros(g, 0.1, 5, 2)
    A.values[2, 1] = 1.0
    out = apply_linear_term(A, 3, 2, 0, 0).values
    assert np.array_equal(out[3, 1], np.full(7, 2.0 + 0j))
    out[3, 1] = 0
    assert not np.any(out)


# ---------------------------------------------------------------- recursion

def test_first_nonzero_coefficient(inst_a0, grid129):
    eps = 0.1
    U = solve_recursion(inst_a0, eps, 3, 3, grid129)
    x = 1j * grid129.nodes
    F11 = generate_coefficients(inst_a0.gen, inst_a0.space, 1, 1, grid129).values
    expect = eps ** -2 * F11 / (4 * inst_a0.Q1(x) * inst_a0.Q2(x))
    assert np.allclose(U.values[2, 2], expect, rtol=1e-14, atol=0)
    assert not np.any(U.values[1]) and not np.any(U.values[:, 1])


def test_reduced_top_power_coincident_shift(inst_a0, grid129):
    eps = 0.1
    inst = inst_a0.with_(top_power="reduced")
    U = solve_recursion(inst, eps, 2, 2, grid129)
    x = 1j * grid129.nodes
    F11 = generate_coefficients(inst.gen, inst.space, 1, 1, grid129).values
    expect = eps ** -2 * F11 / (2 * (inst.Q1(x) - 1) * 2 * inst.Q2(x))
    assert np.allclose(U.values[2, 2], expect, rtol=1e-14, atol=0)


def test_reduced_top_power_hits_a_resonance(inst_a0, grid129):
    # 3 Q1(im) - 3*2 = 3 m^2 vanishes at m = 0
    with pytest.raises(ResonantIndex) as info:
        solve_recursion(inst_a0.with_(top_power="reduced"), 0.1, 4, 4, grid129)
    assert info.value.n1 == 3 and info.value.m == 0.0


def test_ill_founded_top_power(inst_a0, grid129):
    from dataclasses import replace
    e = inst_a0.exponents
    bad = inst_a0.with_(exponents=replace(e, k1=1, d=(1, 1)), top_power="reduced")
    with pytest.raises(IllFounded, match="ill-founded"):
        solve_recursion(bad, 0.1, 3, 3, grid129)


def test_zero_data_gives_zero_solution(inst_a, grid33):
    inst = inst_a.with_(gen=GeneratorSpec(c_support="none", f_support="none"))
    assert not np.any(solve_recursion(inst, 0.1, 5, 5, grid33).values)


@pytest.mark.parametrize("which", ["inst_a", "inst_a0"])
def test_residual_is_at_rounding_level(which, request, grid33):
    inst = request.getfixturevalue(which)
    U = solve_recursion(inst, 0.05 + 0.02j, 7, 7, grid33)
    assert np.max(scp_residual(inst, U)) < 1e-12


def test_truncation_is_stable(inst_a, grid33):
    small = solve_recursion(inst_a, 0.1, 5, 4, grid33)
    big = solve_recursion(inst_a, 0.1, 7, 6, grid33)
    assert np.array_equal(big.truncate(5, 4).values, small.values)


def test_linear_in_forcing_without_nonlinearity(inst_a0, grid33):
    inst = inst_a0.with_(P1=PolySpec((0.0,)))
    U1 = solve_recursion(inst, 0.1, 6, 6, grid33)
    U3 = solve_recursion(inst.with_(gen=GeneratorSpec(3.0, 2.0, "exp_poly", "none", inst.gen.f_support)),
                         0.1, 6, 6, grid33)
    assert np.allclose(U3.values, 3 * U1.values, rtol=1e-13, atol=1e-300)


def test_table_csv_round_trip(inst_a, grid33, tmp_path):
    U = solve_recursion(inst_a, 0.1, 3, 3, grid33)
    p = tmp_path / "u.csv"
    write_table_csv(U, p)
    back, header = read_table_csv(p, eps=0.1)
    assert header is None
    assert back.grid == grid33
    assert np.array_equal(back.values, U.values)
