"""The Borel-plane convolution equation as an exact fixed-point problem on coefficient tables."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .borel import (BorelTable, FNormParams, beta_convolve, borel_monomial_mult,
                    borel_transform, euler_borel_diff, f_norm, shift_down)
from .instance import ProblemInstance, coefficient_array, derived_exponents, eps_power
from .mode_space import SQRT_2PI, ModeGrid
from .series import CoeffTable, falling


@dataclass(frozen=True)
class OperatorExpansion:
    """T^{delta(k+1)} d^delta = (T^{k+1} d)^delta + sum_p A[p-1] T^{k(delta-p)} (T^{k+1} d)^p."""
    delta: int
    k: int
    A: tuple


def _rising(n: int, p: int, k: int) -> int:
    out = 1
    for i in range(p):
        out *= n + i * k
    return out


def expansion_coeffs(delta: int, k: int) -> OperatorExpansion:
    if delta < 1:
        raise ValueError("delta must be >= 1")
    if delta == 1:
        return OperatorExpansion(1, k, ())
    ns = np.arange(1, delta)
    M = np.array([[_rising(int(n), p, k) for p in range(1, delta)] for n in ns], dtype=float)
    rhs = np.array([falling(int(n), delta) - _rising(int(n), delta, k) for n in ns], dtype=float)
    A = np.linalg.solve(M, rhs)
    A = np.where(np.abs(A - np.round(A)) < 1e-9 * np.maximum(1, np.abs(A)), np.round(A), A)
    n = delta
    check = falling(n, delta) - _rising(n, delta, k) - sum(a * _rising(n, p + 1, k) for p, a in enumerate(A))
    if abs(check) > 1e-8 * max(1.0, abs(_rising(n, delta, k))):
        raise ArithmeticError("operator expansion failed its consistency check")
    return OperatorExpansion(delta, k, tuple(float(a) for a in A))


@dataclass
class PmReciprocal:
    """Coefficients of 1/(a - b tau^s): coeffs[q] multiplies tau^(s q), per node."""
    power: int
    coeffs: np.ndarray   # [q, node]


def reciprocal_Pm(inst: ProblemInstance, j: int, m, N: int) -> PmReciprocal:
    e = inst.exponents
    Q, RD, k, delta = ((inst.Q1, inst.RD1, e.k1, e.delta[-1]) if j == 1
                       else (inst.Q2, inst.RD2, e.k2, e.deltat[-1]))
    x = 1j * np.atleast_1d(np.asarray(m, dtype=float))
    a = Q(x) * k
    b = RD(x) * k ** delta
    s = (delta - 1) * k
    if np.any(a == 0):
        raise ZeroDivisionError("zero constant term in P_m")
    if s == 0:
        if np.any(a - b == 0):
            raise ZeroDivisionError("P_m vanishes identically")
        return PmReciprocal(0, (1.0 / (a - b))[None, :])
    nq = N // s + 1
    r = b / a
    coeffs = (1.0 / a)[None, :] * r[None, :] ** np.arange(nq)[:, None]
    return PmReciprocal(s, coeffs)


def _times_reciprocal(X: np.ndarray, rec: PmReciprocal, axis: int) -> np.ndarray:
    if rec.power == 0:
        return X * rec.coeffs[0]
    out = np.zeros_like(X)
    N = X.shape[axis] - 1
    for q in range(rec.coeffs.shape[0]):
        sh = q * rec.power
        if sh > N:
            break
        if axis == 0:
            out[sh:] += rec.coeffs[q] * X[:N + 1 - sh]
        else:
            out[:, sh:] += rec.coeffs[q] * X[:, :N + 1 - sh]
    return out


def _script_A(w: BorelTable, exp: OperatorExpansion, axis: int) -> BorelTable:
    """Borel image of the lower-order part of the expansion, in one variable."""
    out = w.like(np.zeros_like(w.values))
    for p, a in enumerate(exp.A, start=1):
        t = w
        for _ in range(p):
            t = euler_borel_diff(t, axis)
        sh = exp.k * (exp.delta - p)
        t = borel_monomial_mult(t, sh, 0) if axis == 0 else borel_monomial_mult(t, 0, sh)
        out = out.like(out.values + a * t.values)
    return out


def _euler_full(w: BorelTable, exp: OperatorExpansion, axis: int) -> BorelTable:
    """Borel image of T^{delta(k+1)} d^delta in one variable."""
    t = w
    for _ in range(exp.delta):
        t = euler_borel_diff(t, axis)
    return t.like(t.values + _script_A(w, exp, axis).values)


@dataclass
class HContext:
    inst: ProblemInstance
    eps: complex
    grid: ModeGrid
    N1: int
    N2: int
    pad1: int
    pad2: int
    exp1: OperatorExpansion
    exp2: OperatorExpansion
    rec1: PmReciprocal
    rec2: PmReciprocal
    phi: BorelTable       # C with n1, n2 >= 1
    phi1: BorelTable      # C with n2 = 0, n1 >= 1
    phi2: BorelTable      # C with n1 = 0, n2 >= 1
    c00: BorelTable       # C at (0, 0)
    psi: BorelTable       # F


def make_context(inst: ProblemInstance, eps: complex, N1: int, N2: int, grid: ModeGrid) -> HContext:
    if inst.top_power != "irregular":
        raise ValueError("the Borel-plane equation needs the irregular top power")
    eps = complex(eps)
    if eps == 0:
        raise ValueError("eps must be nonzero")
    e = inst.exponents
    k1, k2 = e.k1, e.k2
    dmax1 = max(e.delta)
    dmax2 = max(e.deltat)
    M1, M2 = N1 + k1 * dmax1 + 2, N2 + k2 * dmax2 + 2
    x = 1j * grid.nodes
    C = coefficient_array(inst, grid, M1, M2, "C")
    F = coefficient_array(inst, grid, M1, M2, "F")
    parts = []
    for mask in ("full", "row", "col", "origin"):
        V = np.zeros_like(C)
        if mask == "full":
            V[1:, 1:] = C[1:, 1:]
        elif mask == "row":
            V[1:, 0] = C[1:, 0]
        elif mask == "col":
            V[0, 1:] = C[0, 1:]
        else:
            V[0, 0] = C[0, 0]
        parts.append(borel_transform(CoeffTable(grid, eps, V), k1, k2))
    psi = borel_transform(CoeffTable(grid, eps, F), k1, k2)
    return HContext(inst, eps, grid, N1, N2, M1 - N1, M2 - N2,
                    expansion_coeffs(e.delta[-1], k1), expansion_coeffs(e.deltat[-1], k2),
                    reciprocal_Pm(inst, 1, grid.nodes, M1), reciprocal_Pm(inst, 2, grid.nodes, M2),
                    *parts, psi)


def apply_H(inst: ProblemInstance, eps: complex, omega: BorelTable,
            ctx: HContext = None, terms: tuple = tuple(range(1, 9))) -> BorelTable:
    """The eight-term operator; `terms` selects a subset for term-by-term checks."""
    N1, N2 = omega.N1, omega.N2
    if ctx is None or (ctx.N1, ctx.N2) != (N1, N2):
        ctx = make_context(inst, eps, N1, N2, omega.grid)
    e = inst.exponents
    k1, k2 = e.k1, e.k2
    if (omega.k1, omega.k2) != (k1, k2):
        raise ValueError("Borel orders do not match the instance")
    eps = ctx.eps
    x = 1j * omega.grid.nodes
    M1, M2 = N1 + ctx.pad1, N2 + ctx.pad2
    w = BorelTable(omega.grid, eps, omega.padded(M1, M2).values, k1, k2)
    RD1, RD2 = inst.RD1(x), inst.RD2(x)
    lift = lambda t: shift_down(borel_monomial_mult(t, k1 + 1, k2 + 1), k1, k2).values
    both = lambda X: _times_reciprocal(_times_reciprocal(X, ctx.rec1, 0), ctx.rec2, 1)
    e2 = eps ** -2
    total = np.zeros_like(w.values)

    if 1 in terms:
        A1 = _script_A(w, ctx.exp1, 0)
        A2 = _script_A(w, ctx.exp2, 1)
        A12 = _script_A(A2, ctx.exp1, 0)
        total += _times_reciprocal(RD2 * shift_down(A2, 0, k2).values, ctx.rec2, 1)
        total += _times_reciprocal(RD1 * shift_down(A1, k1, 0).values, ctx.rec1, 0)
        total -= both(RD1 * RD2 * shift_down(A12, k1, k2).values)
    rest = np.zeros_like(w.values)
    if 2 in terms:
        rest += e2 / SQRT_2PI * lift(beta_convolve(w, w, inst.P1, inst.P2))
    if 3 in terms:
        der = derived_exponents(inst)
        for (l1, l2), R in sorted(inst.R.items()):
            el1 = expansion_coeffs(e.delta[l1 - 1], k1)
            el2 = expansion_coeffs(e.deltat[l2 - 1], k2)
            t = _euler_full(_euler_full(w, el2, 1), el1, 0)
            t = borel_monomial_mult(t, der.d_k[l1 - 1], der.dt_k[l2 - 1])
            rest += eps ** eps_power(inst, l1, l2) * R(x) * shift_down(t, k1, k2).values
    for j, part in ((4, ctx.phi), (5, ctx.phi1), (6, ctx.phi2), (7, ctx.c00)):
        if j in terms and np.any(part.values):
            rest += e2 / SQRT_2PI * lift(beta_convolve(part, w, None, inst.R0))
    if 8 in terms:
        rest += e2 * lift(ctx.psi)
    total += both(rest)
    return BorelTable(omega.grid, eps, total[:N1 + 1, :N2 + 1], k1, k2)


@dataclass
class PicardResult:
    omega: BorelTable
    iterations: int
    contraction_estimate: float


def default_fnorm(inst: ProblemInstance, eps: complex) -> FNormParams:
    """Disc samples plus geometric rays reaching down to |tau| ~ |eps|, where the weight concentrates."""
    sp, e = inst.space, inst.exponents
    radii = np.geomspace(abs(eps) / 20, sp.rho, 16)
    rays = tuple((2 * np.pi * j / 8, radii) for j in range(8))
    return FNormParams(sp.nu1, sp.nu2, sp.beta, sp.mu, e.k1, e.k2, eps, sp.rho, rays=rays)


def picard_solve(inst: ProblemInstance, eps: complex, N1: int, N2: int, grid: ModeGrid,
                 n_pairs: int = 3, seed: int = 0) -> PicardResult:
    """Iterate omega <- H(omega) from zero until the truncated table is fixed."""
    ctx = make_context(inst, eps, N1, N2, grid)
    e = inst.exponents
    w = BorelTable.zeros(grid, ctx.eps, N1, N2, e.k1, e.k2)
    limit = N1 + N2 + 2
    for it in range(limit + 1):
        nxt = apply_H(inst, eps, w, ctx)
        if np.array_equal(nxt.values, w.values):
            break
        w = nxt
    else:
        raise RuntimeError("fixed-point iteration did not stabilize; order-raising is broken")
    ratio = contraction_ratio(inst, eps, w, ctx, n_pairs, seed) if n_pairs else float("nan")
    return PicardResult(w, it + 1, ratio)


def contraction_ratio(inst, eps, w: BorelTable, ctx: HContext, n_pairs: int = 3, seed: int = 0) -> float:
    """Largest measured ||H(w1) - H(w2)|| / ||w1 - w2|| over random perturbations of w."""
    rng = np.random.default_rng(seed)
    p = default_fnorm(inst, ctx.eps)
    scale = max(float(np.max(np.abs(w.values))), 1e-12)
    hw = apply_H(inst, eps, w, ctx)
    best = 0.0
    mask = np.zeros(w.values.shape[:2])
    mask[1:, 1:] = 1.0
    for _ in range(n_pairs):
        d = rng.normal(size=w.values.shape) + 1j * rng.normal(size=w.values.shape)
        d = 1e-3 * scale * d * mask[..., None] * np.exp(-np.abs(w.grid.nodes))
        w2 = w.like(w.values + d)
        h2 = apply_H(inst, eps, w2, ctx)
        num = f_norm(h2.like(h2.values - hw.values), p).value
        den = f_norm(w.like(d), p).value
        if den > 0:
            best = max(best, num / den)
    return best
