"""Truncated bivariate power series in (T1, T2) with mode-function coefficients.

Tables store every index 0 <= nj <= Nj; for a formal solution the rows
n1 = 0 and n2 = 0 are identically zero.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from .instance import PolySpec, ProblemInstance, coefficient_array, eps_power, top_powers
from .mode_space import SQRT_2PI, ModeFunction, ModeGrid, fmt


class ResonantIndex(ArithmeticError):
    def __init__(self, n1, n2, m):
        super().__init__(f"resonant index: divisor vanishes at (n1, n2)=({n1}, {n2}), m={m:.17g}")
        self.n1, self.n2, self.m = n1, n2, m


class IllFounded(ValueError):
    pass


@dataclass
class CoeffTable:
    grid: ModeGrid
    eps: complex
    values: np.ndarray   # [n1, n2, node]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 3 or self.values.shape[2] != self.grid.n_points:
            raise ValueError("table shape does not match the grid")

    @property
    def N1(self) -> int:
        return self.values.shape[0] - 1

    @property
    def N2(self) -> int:
        return self.values.shape[1] - 1

    @classmethod
    def zeros(cls, grid, eps, N1, N2) -> "CoeffTable":
        return cls(grid, eps, np.zeros((N1 + 1, N2 + 1, grid.n_points), dtype=complex))

    def entry(self, n1: int, n2: int) -> ModeFunction:
        return ModeFunction(self.grid, self.values[n1, n2].copy())

    def like(self, values) -> "CoeffTable":
        return type(self)(self.grid, self.eps, values)

    def truncate(self, N1: int, N2: int) -> "CoeffTable":
        return self.like(self.values[:N1 + 1, :N2 + 1].copy())

    def padded(self, N1: int, N2: int) -> "CoeffTable":
        out = np.zeros((N1 + 1, N2 + 1, self.grid.n_points), dtype=complex)
        a, b = min(N1, self.N1), min(N2, self.N2)
        out[:a + 1, :b + 1] = self.values[:a + 1, :b + 1]
        return self.like(out)


def _check_pair(A: CoeffTable, B: CoeffTable):
    if A.values.shape != B.values.shape:
        raise ValueError("mismatched shapes")
    if A.grid != B.grid:
        raise ValueError("tables live on different grids")


# ---------------------------------------------------------------- mode convolution

def _fft_len(n: int) -> int:
    return sfft.next_fast_len(2 * n - 1)


def mode_fft(values: np.ndarray) -> np.ndarray:
    n = values.shape[-1]
    return sfft.fft(values, _fft_len(n), axis=-1)


def mode_ifft(spec: np.ndarray, grid: ModeGrid) -> np.ndarray:
    n, c = grid.n_points, grid.center
    return grid.h * sfft.ifft(spec, axis=-1)[..., c:c + n]


def weighted_cauchy(a: np.ndarray, b: np.ndarray, grid: ModeGrid,
                    w1: np.ndarray = None, w2: np.ndarray = None) -> np.ndarray:
    """out[n] = sum_{x+y=n} w1[x1,y1] w2[x2,y2] (a[x] * b[y]) with * the grid convolution in m.

    a, b have shape (N1+1, N2+1, n_points); weights default to 1.
    """
    N1, N2 = a.shape[0] - 1, a.shape[1] - 1
    fa, fb = mode_fft(a), mode_fft(b)
    out = np.zeros_like(fa)
    for x1 in range(N1 + 1):
        for x2 in range(N2 + 1):
            if not np.any(a[x1, x2]):
                continue
            blk = fb[:N1 + 1 - x1, :N2 + 1 - x2]
            if w1 is not None:
                blk = blk * (w1[x1, :N1 + 1 - x1][:, None] * w2[x2, :N2 + 1 - x2][None, :])[..., None]
            out[x1:, x2:] += fa[x1, x2] * blk
    return mode_ifft(out, grid)


def cauchy_star(A: CoeffTable, B: CoeffTable, P1: PolySpec = None, P2: PolySpec = None,
                b: PolySpec = None) -> CoeffTable:
    """Cauchy product in (T1, T2) with the kernel-weighted star product in m, times (2 pi)^-1/2."""
    _check_pair(A, B)
    x = 1j * A.grid.nodes
    p1 = np.ones_like(x) if P1 is None else P1(x, A.eps)
    p2 = np.ones_like(x) if P2 is None else P2(x, A.eps)
    out = weighted_cauchy(A.values * p1, B.values * p2, A.grid) / SQRT_2PI
    if b is not None:
        rv = b(x)
        if np.any(rv == 0):
            raise ValueError("kernel singular: divisor vanishes on the grid")
        out = out / rv
    return A.like(out)


# ---------------------------------------------------------------- linear terms

@lru_cache(maxsize=None)
def falling(n: int, k: int) -> int:
    """n (n-1) ... (n-k+1), zero when 0 <= n < k."""
    out = 1
    for j in range(k):
        out *= n - j
    return out


def _shift_weights(N: int, d: int, delta: int):
    """(target, source, weight) for T^d d^delta on indices 0..N."""
    out = []
    for n in range(N + 1):
        src = n - d + delta
        if 0 <= src <= N:
            w = falling(src, delta)
            if w:
                out.append((n, src, w))
    return out


def apply_linear_term(A: CoeffTable, d1: int, delta1: int, d2: int, delta2: int,
                      R: PolySpec = None) -> CoeffTable:
    """T1^d1 T2^d2 d1^delta1 d2^delta2 R(im) applied to the table; sources past N drop out."""
    out = np.zeros_like(A.values)
    rows = _shift_weights(A.N1, d1, delta1)
    cols = _shift_weights(A.N2, d2, delta2)
    for n1, s1, w1 in rows:
        for n2, s2, w2 in cols:
            out[n1, n2] = (w1 * w2) * A.values[s1, s2]
    if R is not None:
        out = out * R(1j * A.grid.nodes)
    return A.like(out)


# ---------------------------------------------------------------- recursion

def index_shifts(inst: ProblemInstance) -> tuple:
    e = inst.exponents
    a1, a2 = top_powers(inst)
    return e.delta[-1] - a1, e.deltat[-1] - a2


def solve_recursion(inst: ProblemInstance, eps: complex, N1: int, N2: int,
                    grid: ModeGrid) -> CoeffTable:
    """Formal solution by coefficient matching, targets in graded order."""
    eps = complex(eps)
    if eps == 0:
        raise ValueError("eps must be nonzero")
    e = inst.exponents
    sD, stD = e.delta[-1], e.deltat[-1]
    s1, s2 = index_shifts(inst)
    if s1 > 1 or s2 > 1:
        raise IllFounded(f"ill-founded: top-order source index exceeds the target (shifts {s1}, {s2})")
    x = 1j * grid.nodes
    n = grid.n_points
    Q1, Q2, RD1, RD2 = inst.Q1(x), inst.Q2(x), inst.RD1(x), inst.RD2(x)
    p1, p2 = inst.P1(x, eps), inst.P2(x, eps)
    r0 = inst.R0(x)
    inner = [(l1, l2, eps ** eps_power(inst, l1, l2), inst.R[(l1, l2)](x))
             for (l1, l2) in sorted(inst.R)]
    F = coefficient_array(inst, grid, N1, N2, "F")
    C = coefficient_array(inst, grid, N1, N2, "C")
    fC = mode_fft(C)
    e2 = eps ** -2

    U = np.zeros((N1 + 1, N2 + 1, n), dtype=complex)
    fU1 = np.zeros((N1 + 1, N2 + 1, fC.shape[-1]), dtype=complex)  # fft of P1 U
    fU2 = np.zeros_like(fU1)                                       # fft of P2 U
    fUR = np.zeros_like(fU1)                                       # fft of R0 U

    def axis_terms(Q, RD, delta, s, a):
        """Source (index, weight) pairs of L_j at output power a, top first."""
        top = Q * (a + 1)
        terms = []
        if s == 1:
            top = top - RD * falling(a + 1, delta)
        elif a + s >= 1 and falling(a + s, delta):
            terms.append((a + s, -RD * falling(a + s, delta)))
        return top, terms

    order = sorted(((a, b) for a in range(N1) for b in range(N2)), key=lambda t: (t[0] + t[1], t[0]))
    for a, b in order:
        rhs = np.zeros(n, dtype=complex)
        spec = np.zeros(fC.shape[-1], dtype=complex)
        for x1 in range(1, a):
            for x2 in range(1, b):
                spec += fU1[x1, x2] * fU2[a - x1, b - x2]
        spec_c = np.zeros_like(spec)
        for u1 in range(1, a + 1):
            for u2 in range(1, b + 1):
                spec_c += fC[a - u1, b - u2] * fUR[u1, u2]
        rhs += e2 / SQRT_2PI * mode_ifft(spec + spec_c, grid)
        for l1, l2, ep, rv in inner:
            i1 = a - e.d[l1 - 1] + e.delta[l1 - 1]
            i2 = b - e.dt[l2 - 1] + e.deltat[l2 - 1]
            if i1 >= 1 and i2 >= 1:
                w = falling(i1, e.delta[l1 - 1]) * falling(i2, e.deltat[l2 - 1])
                if w:
                    rhs += ep * w * rv * U[i1, i2]
        rhs += e2 * F[a, b]

        top1, low1 = axis_terms(Q1, RD1, sD, s1, a)
        top2, low2 = axis_terms(Q2, RD2, stD, s2, b)
        lhs_known = np.zeros(n, dtype=complex)
        for i1, w1 in low1:
            lhs_known += w1 * top2 * U[i1, b + 1]
            for i2, w2 in low2:
                lhs_known += w1 * w2 * U[i1, i2]
        for i2, w2 in low2:
            lhs_known += top1 * w2 * U[a + 1, i2]
        div = top1 * top2
        scale = np.max(np.abs(div))
        bad = np.abs(div) <= 1e-13 * max(scale, 1e-300)
        if np.any(bad):
            raise ResonantIndex(a + 1, b + 1, float(grid.nodes[np.argmax(bad)]))
        U[a + 1, b + 1] = (rhs - lhs_known) / div
        fU1[a + 1, b + 1] = mode_fft(p1 * U[a + 1, b + 1])
        fU2[a + 1, b + 1] = mode_fft(p2 * U[a + 1, b + 1])
        fUR[a + 1, b + 1] = mode_fft(r0 * U[a + 1, b + 1])
    return CoeffTable(grid, eps, U)


def scp_residual(inst: ProblemInstance, U: CoeffTable) -> np.ndarray:
    """Relative residual of the equation at each power (a, b), a < N1, b < N2.

    Both sides are rebuilt from apply_linear_term and cauchy_star; the
    residual is divided by the largest individual term at that power.
    """
    e = inst.exponents
    eps = U.eps
    N1, N2 = U.N1, U.N2
    a1, a2 = top_powers(inst)
    sD, stD = e.delta[-1], e.deltat[-1]
    x = 1j * U.grid.nodes
    Q1, Q2, RD1, RD2 = (p(x) for p in (inst.Q1, inst.Q2, inst.RD1, inst.RD2))
    d1 = apply_linear_term(U, 0, 1, 0, 1).values
    lhs_terms = [
        Q1 * Q2 * d1,
        -Q2 * RD1 * apply_linear_term(U, a1, sD, 0, 1).values,
        -Q1 * RD2 * apply_linear_term(U, 0, 1, a2, stD).values,
        RD1 * RD2 * apply_linear_term(U, a1, sD, a2, stD).values,
    ]
    C = U.like(coefficient_array(inst, U.grid, N1, N2, "C"))
    F = coefficient_array(inst, U.grid, N1, N2, "F")
    rhs_terms = [eps ** -2 * cauchy_star(U, U, inst.P1, inst.P2).values,
                 eps ** -2 * cauchy_star(C, U, None, inst.R0).values,
                 eps ** -2 * F]
    for (l1, l2), R in sorted(inst.R.items()):
        rhs_terms.append(eps ** eps_power(inst, l1, l2) * apply_linear_term(
            U, e.d[l1 - 1], e.delta[l1 - 1], e.dt[l2 - 1], e.deltat[l2 - 1], R).values)
    res = sum(lhs_terms) - sum(rhs_terms)
    scale = np.maximum.reduce([np.abs(t) for t in lhs_terms + rhs_terms])
    scale = np.max(scale, axis=-1)[:N1, :N2]
    r = np.max(np.abs(res), axis=-1)[:N1, :N2]
    return np.where(scale > 0, r / np.where(scale > 0, scale, 1.0), 0.0)


# ---------------------------------------------------------------- files

def write_table_csv(T: CoeffTable, path, header: str = None) -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header + "\n")
        w = csv.writer(fh)
        w.writerow(["n1", "n2", "m", "re", "im"])
        for n1 in range(1, T.N1 + 1):
            for n2 in range(1, T.N2 + 1):
                for m, v in zip(T.grid.nodes, T.values[n1, n2]):
                    w.writerow([n1, n2, fmt(m), fmt(v.real), fmt(v.imag)])


def read_table_csv(path, eps: complex = 0j):
    """Returns (table, header line or None)."""
    with open(path, newline="") as fh:
        first = fh.readline()
        header = None
        if not first.startswith("n1"):
            header = first.strip()
            first = fh.readline()
        rows = list(csv.reader(fh))
    n1 = np.array([int(r[0]) for r in rows])
    n2 = np.array([int(r[1]) for r in rows])
    m = np.array([float(r[2]) for r in rows])
    v = np.array([complex(float(r[3]), float(r[4])) for r in rows])
    ms = np.unique(m)
    grid = ModeGrid(float(ms[-1]), len(ms))
    T = CoeffTable.zeros(grid, eps, int(n1.max()), int(n2.max()))
    idx = np.searchsorted(ms, m)
    T.values[n1, n2, idx] = v
    return T, header
