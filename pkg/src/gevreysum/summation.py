"""Laplace-Fourier evaluation of sectorial solutions, growth-order fits and pair classification."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln, roots_legendre

from .borel import BorelTable
from .geometry import Cell, GoodCovering
from .instance import ProblemInstance
from .mode_space import ModeFunction, inverse_fourier


class CertificationError(RuntimeError):
    pass


class InvalidDirection(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    r_cut: float
    n_nodes: int = 96
    delta1: float = 0.1
    tol: float = 1e-10

    def __post_init__(self):
        if not 0 < self.delta1 <= 1:
            raise ValueError("delta1 must lie in (0, 1]")
        if not self.r_cut > 0:
            raise ValueError("r_cut must be positive")


@dataclass
class LaplaceResult:
    value: complex
    tail_bound: float


def _check_direction(k: int, gamma: float, T: complex, delta1: float) -> float:
    c = math.cos(k * (gamma - np.angle(T)))
    if c < delta1:
        raise InvalidDirection(f"invalid Laplace direction: cos(k(gamma - arg T)) = {c:.6g} < {delta1}")
    return c


def _nodes(q: QuadratureSpec, split: float):
    """Gauss-Legendre on [0, split] and, if split < r_cut, a second panel on [split, r_cut]."""
    x, w = roots_legendre(q.n_nodes)
    if split >= q.r_cut:
        return 0.5 * q.r_cut * (x + 1), 0.5 * q.r_cut * w
    x2, w2 = roots_legendre(max(q.n_nodes // 2, 8))
    h = 0.5 * (q.r_cut - split)
    return (np.concatenate([0.5 * split * (x + 1), split + h * (x2 + 1)]),
            np.concatenate([0.5 * split * w, h * w2]))


def laplace_ray(omega, k: int, gamma: float, T: complex, q: QuadratureSpec) -> LaplaceResult:
    """k int_0^{r_cut} omega(u) exp(-(u/T)^k) du/u along u = r e^{i gamma}.

    omega maps an array of u to an array of values (extra trailing axes allowed).
    The tail bound is exp(-c (r_cut/|T|)^k) with c = cos(k(gamma - arg T)) >= delta1.
    """
    T = complex(T)
    c = _check_direction(k, gamma, T, q.delta1)
    # the kernel has decayed to exp(-40) at the split, so the first panel carries the integral
    r, w = _nodes(q, abs(T) * (40.0 / c) ** (1.0 / k))
    u = r * np.exp(1j * gamma)
    vals = np.asarray(omega(u))
    kern = k * np.exp(-(u / T) ** k) * w / r
    kern = kern.reshape(kern.shape + (1,) * (vals.ndim - 1))
    value = np.sum(vals * kern, axis=0)
    tail = math.exp(-c * (q.r_cut / abs(T)) ** k)
    return LaplaceResult(complex(value) if np.ndim(value) == 0 else value, tail)


def laplace_powers(N: int, k: int, gamma: float, T: complex, q: QuadratureSpec) -> LaplaceResult:
    """laplace_ray applied to u^n for n = 0..N at once."""
    return laplace_ray(lambda u: u[:, None] ** np.arange(N + 1)[None, :], k, gamma, T, q)


def choose_gamma(d: float, eta: float, T: complex) -> float:
    """Direction in [d - eta, d + eta] closest to arg T."""
    off = float(np.angle(np.exp(1j * (np.angle(T) - d))))
    return d + max(-eta, min(eta, off))


def evaluate_u(inst: ProblemInstance, omega: BorelTable, cell: Cell, t1: complex, t2: complex,
               z: complex, eps: complex, q: QuadratureSpec, T1_sector=None, T2_sector=None,
               beta_prime: float = None) -> complex:
    """u(t, z, eps) = U(eps t1, eps t2, z) via iterated Laplace then inverse Fourier."""
    eps, t1, t2 = complex(eps), complex(t1), complex(t2)
    if q.r_cut > inst.space.rho * (1 + 1e-12):
        raise ValueError("r_cut must not exceed rho")
    if not cell.sector.contains(eps):
        raise ValueError("eps outside the cell's sector")
    for t, S in ((t1, T1_sector), (t2, T2_sector)):
        if S is not None and not S.contains(t):
            raise ValueError("t outside the time sector")
    e = inst.exponents
    T1, T2 = eps * t1, eps * t2
    g1 = choose_gamma(cell.d1, cell.eta1, T1)
    g2 = choose_gamma(cell.d2, cell.eta2, T2)
    L1 = laplace_powers(omega.N1, e.k1, g1, T1, q)
    L2 = laplace_powers(omega.N2, e.k2, g2, T2, q)
    scale = float(np.max(np.abs(omega.values))) if omega.values.size else 0.0
    tail = max(L1.tail_bound, L2.tail_bound)
    if scale > 0 and tail > q.tol:
        raise CertificationError(f"outside certified domain: tail bound {tail:.3g} exceeds {q.tol:.3g}")
    Um = np.einsum("a,b,abm->m", L1.value, L2.value, omega.values)
    beta = inst.space.beta if beta_prime is None else beta_prime
    return inverse_fourier(ModeFunction(omega.grid, Um), complex(z), beta)


def truncated_series_value(U, T1: complex, T2: complex, z: complex, beta: float = None) -> complex:
    """Oracle: sum U[n1,n2](m) T1^n1 T2^n2 pushed through the inverse Fourier transform."""
    p1 = T1 ** np.arange(U.N1 + 1)
    p2 = T2 ** np.arange(U.N2 + 1)
    Um = np.einsum("a,b,abm->m", p1, p2, U.values)
    return inverse_fourier(ModeFunction(U.grid, Um), complex(z), beta)


# ---------------------------------------------------------------- fits

@dataclass
class DecayFit:
    k_est: float
    M: float
    K: float
    residual: float
    flag: str = ""


def _refine(obj, grid: np.ndarray, lo: float, hi: float) -> float:
    vals = np.array([obj(x) for x in grid])
    i = int(np.argmin(vals))
    a = grid[max(i - 1, 0)] if i > 0 else lo
    b = grid[min(i + 1, len(grid) - 1)] if i < len(grid) - 1 else hi
    if b <= a:
        return float(grid[i])
    res = minimize_scalar(obj, bounds=(a, b), method="bounded", options={"xatol": 1e-10})
    return float(res.x) if res.fun <= vals[i] else float(grid[i])


def gevrey_fit(norms, k_candidates=None, n=None) -> DecayFit:
    """Fit log a_n = log C + n log M + log Gamma(1 + n/k); s = 1/k searched on [0, 3]."""
    a = np.asarray(norms, dtype=float)
    if len(a) < 8:
        raise ValueError("need at least 8 terms")
    if np.any(~(a > 0)):
        raise ValueError("non-positive entries")
    n = np.arange(len(a), dtype=float) if n is None else np.asarray(n, dtype=float)
    y = np.log(a)
    A = np.vstack([np.ones_like(n), n]).T

    def fit(s):
        r = y - gammaln(1 + n * s)
        coef, *_ = np.linalg.lstsq(A, r, rcond=None)
        return coef, r - A @ coef

    obj = lambda s: float(np.sum(fit(s)[1] ** 2))
    grid = np.linspace(0.0, 3.0, 301)
    if k_candidates is not None:
        grid = np.unique(np.concatenate([grid, 1.0 / np.asarray(k_candidates, dtype=float)]))
    s = _refine(obj, grid, 0.0, 3.0)
    coef, res = fit(s)
    rms = float(np.sqrt(np.mean(res ** 2)))
    if s < 1e-3:
        return DecayFit(math.inf, float(np.exp(coef[1])), float(np.exp(coef[0])), rms, "convergent-type")
    return DecayFit(1.0 / s, float(np.exp(coef[1])), float(np.exp(coef[0])), rms)


def decay_fit(samples) -> DecayFit:
    """Fit log diff = log K - M |eps|^-k over k, with (log K, M) by linear least squares."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 5:
        raise ValueError("need at least 5 (|eps|, diff) samples")
    x, d = arr[:, 0], arr[:, 1]
    if np.any(~(d > 0)) or np.any(~(x > 0)):
        raise ValueError("samples must be positive")
    if x.max() / x.min() < 10 * (1 - 1e-12):
        raise ValueError("|eps| must span at least one decade")
    y = np.log(d)

    def fit(k):
        A = np.vstack([np.ones_like(x), -x ** (-k)]).T
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        return coef, y - A @ coef

    obj = lambda k: float(np.sum(fit(k)[1] ** 2))
    grid = np.linspace(0.05, 10.0, 400)
    k = _refine(obj, grid, 0.05, 10.0)
    coef, res = fit(k)
    rms = float(np.sqrt(np.mean(res ** 2)))
    if not coef[1] > 1e-12 * max(1.0, abs(coef[0])):
        return DecayFit(0.0, 0.0, float(np.exp(np.mean(y))), rms, "non-decaying")
    return DecayFit(float(k), float(coef[1]), float(np.exp(coef[0])), rms)


# ---------------------------------------------------------------- classification

def classify_pairs(cov: GoodCovering) -> dict:
    """Split unordered cell pairs into U_0, U_k1 and U_k2 by sector overlap and labels."""
    out = {"U_0": [], "U_k1": [], "U_k2": []}
    cells = sorted(cov.cells, key=lambda c: tuple(c.label))
    for a, b in combinations(cells, 2):
        pair = (tuple(a.label), tuple(b.label))
        if not a.sector.intersects(b.sector):
            out["U_0"].append(pair)
        elif a.label[0] == b.label[0] and a.label[1] != b.label[1]:
            out["U_k2"].append(pair)
        else:
            out["U_k1"].append(pair)
    return out
