"""Functions of the Fourier mode variable m sampled on a symmetric grid.

The space carries the weighted sup norm (1+|m|)^mu exp(beta|m|) |h(m)|.
Integrals over m are trapezoid sums on the uniform grid with zero
extension outside [-m_max, m_max]; for functions that vanish beyond the
grid the trapezoid rule on the whole line reduces to h * sum(values).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

Poly = Optional[Callable[[np.ndarray], np.ndarray]]

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ModeGrid:
    m_max: float
    n_points: int = 257

    def __post_init__(self):
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise ValueError("n_points must be an odd integer >= 3")
        if not self.m_max > 0:
            raise ValueError("m_max must be positive")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-self.m_max, self.m_max, self.n_points)

    @property
    def h(self) -> float:
        return 2.0 * self.m_max / (self.n_points - 1)

    @property
    def center(self) -> int:
        return (self.n_points - 1) // 2


def tail_cutoff(beta: float, mu: float, tol: float = 1e-10) -> float:
    """Smallest m with exp(-beta m)(1+m)^-mu below tol."""
    g = lambda m: -beta * m - mu * math.log1p(m) - math.log(tol)
    if g(0.0) <= 0:
        return 1.0
    hi = 1.0
    while g(hi) > 0:
        hi *= 2.0
    return brentq(g, 0.0, hi)


def default_grid(beta: float, mu: float, n_points: int = 257,
                 tol: float = 1e-10) -> ModeGrid:
    return ModeGrid(tail_cutoff(beta, mu, tol), n_points)


@dataclass
class ModeFunction:
    grid: ModeGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n_points,):
            raise ValueError("values do not match the grid")

    @classmethod
    def from_callable(cls, grid: ModeGrid, fn) -> "ModeFunction":
        return cls(grid, fn(grid.nodes))

    @classmethod
    def zeros(cls, grid: ModeGrid) -> "ModeFunction":
        return cls(grid, np.zeros(grid.n_points, dtype=complex))

    def __add__(self, other: "ModeFunction") -> "ModeFunction":
        _same_grid(self, other)
        return ModeFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "ModeFunction") -> "ModeFunction":
        _same_grid(self, other)
        return ModeFunction(self.grid, self.values - other.values)

    def __mul__(self, c) -> "ModeFunction":
        if isinstance(c, ModeFunction):
            _same_grid(self, c)
            return ModeFunction(self.grid, self.values * c.values)
        return ModeFunction(self.grid, self.values * c)

    __rmul__ = __mul__


def _same_grid(f: ModeFunction, g: ModeFunction):
    if f.grid != g.grid:
        raise ValueError("mode functions live on different grids")


def profile(m: np.ndarray, beta: float, mu: float) -> np.ndarray:
    """Unit-norm decaying profile exp(-beta|m|)(1+|m|)^-mu."""
    a = np.abs(m)
    return np.exp(-beta * a) * (1.0 + a) ** (-mu)


def norm_weight(m: np.ndarray, beta: float, mu: float) -> np.ndarray:
    a = np.abs(m)
    return (1.0 + a) ** mu * np.exp(beta * a)


def weighted_norm(f: ModeFunction, beta: float, mu: float) -> float:
    w = norm_weight(f.grid.nodes, beta, mu)
    return float(np.max(w * np.abs(f.values)))


def _eval_poly(p: Poly, x: np.ndarray) -> np.ndarray:
    if p is None:
        return np.ones_like(x, dtype=complex)
    return np.asarray(p(x), dtype=complex) * np.ones_like(x, dtype=complex)


def grid_convolve(a: np.ndarray, b: np.ndarray, h: float) -> np.ndarray:
    """h * sum_j a(m_i - m_j) b(m_j) on the grid, zero outside."""
    n = a.shape[-1]
    c = (n - 1) // 2
    full = np.convolve(a, b)
    return h * full[c:c + n]


def star_product(f: ModeFunction, g: ModeFunction, q1: Poly = None,
                 q2: Poly = None, r: Poly = None) -> ModeFunction:
    """(1/R(im)) int Q1(i(m-m1)) f(m-m1) Q2(im1) g(m1) dm1 on the grid.

    q1, q2, r are callables of X evaluated at X = i*m; None means 1.
    """
    _same_grid(f, g)
    m = f.grid.nodes
    x = 1j * m
    rv = _eval_poly(r, x)
    if np.any(np.abs(rv) <= 1e-14 * max(1.0, float(np.max(np.abs(rv))))):
        raise ValueError("kernel singular: R(im) vanishes on the grid")
    a = _eval_poly(q1, x) * f.values
    b = _eval_poly(q2, x) * g.values
    return ModeFunction(f.grid, grid_convolve(a, b, f.grid.h) / rv)


def inverse_fourier(f: ModeFunction, z, beta: Optional[float] = None):
    """(2 pi)^-1/2 int f(m) exp(i z m) dm by the trapezoid sum.

    If beta is given, points with |Im z| >= beta are rejected.
    """
    z = np.asarray(z, dtype=complex)
    if beta is not None and np.any(np.abs(z.imag) >= beta):
        raise ValueError("outside strip H_beta: |Im z| must be below beta")
    m = f.grid.nodes
    phase = np.exp(1j * np.multiply.outer(z, m))
    out = f.grid.h * (phase @ f.values) / SQRT_2PI
    return complex(out) if out.ndim == 0 else out


def write_mode_csv(f: ModeFunction, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "re", "im"])
        for m, v in zip(f.grid.nodes, f.values):
            w.writerow([fmt(m), fmt(v.real), fmt(v.imag)])


def read_mode_csv(path) -> ModeFunction:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    m = np.array([float(r["m"]) for r in rows])
    v = np.array([complex(float(r["re"]), float(r["im"])) for r in rows])
    grid = ModeGrid(float(m[-1]), len(m))
    return ModeFunction(grid, v)


def fmt(x: float) -> str:
    """17 significant digits, the round-trip format used in all CSV output."""
    return format(float(x), ".17g")
