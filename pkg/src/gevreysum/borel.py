"""m_k-Borel calculus on coefficient tables, weighted norms and operator scaling checks.

Index 0 is allowed in either variable and carries the divisor 1, so a
table with a zero row represents a function constant in that variable.
All integral identities reduce to Beta-weighted index maps.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln, gammaln

from .instance import PolySpec, ProblemInstance
from .mode_space import ModeGrid, norm_weight, profile
from .series import CoeffTable, _check_pair, weighted_cauchy


# ---------------------------------------------------------------- Gamma/Beta kernel

def log_gamma_index(N: int, k: int) -> np.ndarray:
    """log Gamma(n/k) for n = 0..N, with 0 at n = 0."""
    n = np.arange(N + 1, dtype=float)
    out = np.zeros(N + 1)
    out[1:] = gammaln(n[1:] / k)
    return out


def beta_fn(x, y):
    return np.exp(betaln(x, y))


def beta_weights(N: int, k: int) -> np.ndarray:
    """W[a, b] = B(a/k, b/k) for a, b >= 1 and 1 when either index is 0."""
    a = np.arange(N + 1, dtype=float)
    W = np.ones((N + 1, N + 1))
    W[1:, 1:] = np.exp(betaln(a[1:, None] / k, a[None, 1:] / k))
    return W


# ---------------------------------------------------------------- tables

@dataclass
class BorelTable(CoeffTable):
    k1: int = 1
    k2: int = 1

    def like(self, values) -> "BorelTable":
        return BorelTable(self.grid, self.eps, values, self.k1, self.k2)

    @classmethod
    def zeros(cls, grid, eps, N1, N2, k1=1, k2=1) -> "BorelTable":
        return cls(grid, eps, np.zeros((N1 + 1, N2 + 1, grid.n_points), dtype=complex), k1, k2)


def _gamma_grid(N1, N2, k1, k2) -> np.ndarray:
    return np.exp(log_gamma_index(N1, k1)[:, None] + log_gamma_index(N2, k2)[None, :])[..., None]


def borel_transform(U: CoeffTable, k1: int, k2: int) -> BorelTable:
    g = _gamma_grid(U.N1, U.N2, k1, k2)
    return BorelTable(U.grid, U.eps, U.values / g, k1, k2)


def inverse_borel(w: BorelTable) -> CoeffTable:
    g = _gamma_grid(w.N1, w.N2, w.k1, w.k2)
    return CoeffTable(w.grid, w.eps, w.values * g)


def _check_k(a: BorelTable, b: BorelTable):
    if (a.k1, a.k2) != (b.k1, b.k2):
        raise ValueError("Borel orders differ")


def beta_convolve(phi: BorelTable, psi: BorelTable, P1: PolySpec = None, P2: PolySpec = None,
                  b: PolySpec = None, plain: bool = False) -> BorelTable:
    """Borel image of the product of the two underlying series.

    With plain=True the mode coefficients multiply pointwise; otherwise they
    combine by the star product with kernel P1(i(m-m1)) P2(i m1) / b(im).
    No (2 pi)^-1/2 factor is applied.
    """
    _check_pair(phi, psi)
    _check_k(phi, psi)
    N1, N2 = phi.N1, phi.N2
    W1, W2 = beta_weights(N1, phi.k1), beta_weights(N2, phi.k2)
    if plain:
        out = np.zeros_like(phi.values)
        for a1 in range(N1 + 1):
            for a2 in range(N2 + 1):
                if not np.any(phi.values[a1, a2]):
                    continue
                w = W1[a1, :N1 + 1 - a1][:, None] * W2[a2, :N2 + 1 - a2][None, :]
                out[a1:, a2:] += w[..., None] * phi.values[a1, a2] * psi.values[:N1 + 1 - a1, :N2 + 1 - a2]
        return phi.like(out)
    x = 1j * phi.grid.nodes
    p1 = 1.0 if P1 is None else P1(x, phi.eps)
    p2 = 1.0 if P2 is None else P2(x, phi.eps)
    out = weighted_cauchy(phi.values * p1, psi.values * p2, phi.grid, W1, W2)
    if b is not None:
        rv = b(x)
        if np.any(rv == 0):
            raise ValueError("kernel singular: divisor vanishes on the grid")
        out = out / rv
    return phi.like(out)


def _mono_weights(N: int, m: int, k: int) -> np.ndarray:
    """Weight taking index n to n + m, for n = 0..N-m."""
    n = np.arange(N - m + 1, dtype=float)
    lg = np.where(n > 0, gammaln(np.maximum(n, 1) / k), 0.0)
    return np.exp(lg - gammaln((n + m) / k))


def borel_monomial_mult(phi: BorelTable, m1: int, m2: int) -> BorelTable:
    """Borel image of T1^m1 T2^m2 times the series; indices past N drop out."""
    if m1 < 0 or m2 < 0:
        raise ValueError("monomial exponents must be non-negative")
    out = phi.values
    for axis, m, k, N in ((0, m1, phi.k1, phi.N1), (1, m2, phi.k2, phi.N2)):
        if m == 0:
            continue
        new = np.zeros_like(out)
        if m <= N:
            w = _mono_weights(N, m, k)
            shape = [1, 1, 1]
            shape[axis] = len(w)
            src = out[:N - m + 1] if axis == 0 else out[:, :N - m + 1]
            if axis == 0:
                new[m:] = src * w.reshape(shape)
            else:
                new[:, m:] = src * w.reshape(shape)
        out = new
    return phi.like(out.copy() if out is phi.values else out)


def euler_borel_diff(phi: BorelTable, axis: int) -> BorelTable:
    """Borel image of T^{k+1} d/dT in one variable: shift by k, multiply by k."""
    if axis not in (0, 1):
        raise ValueError("axis must be 0 or 1")
    k = phi.k1 if axis == 0 else phi.k2
    new = np.zeros_like(phi.values)
    N = phi.values.shape[axis] - 1
    if k <= N:
        if axis == 0:
            new[k + 1:] = k * phi.values[1:N - k + 1]
        else:
            new[:, k + 1:] = k * phi.values[:, 1:N - k + 1]
    return phi.like(new)


def shift_down(phi: BorelTable, s1: int, s2: int) -> BorelTable:
    """Division of the Borel function by tau1^s1 tau2^s2; lower entries must vanish."""
    v = phi.values
    if np.any(v[:s1]) or np.any(v[:, :s2]):
        raise ValueError("division by tau power leaves a pole")
    new = np.zeros_like(v)
    N1, N2 = phi.N1, phi.N2
    new[:N1 + 1 - s1, :N2 + 1 - s2] = v[s1:, s2:]
    return phi.like(new)


# ---------------------------------------------------------------- norms

@dataclass
class FNormParams:
    nu1: float
    nu2: float
    beta: float
    mu: float
    k1: int
    k2: int
    eps: complex
    rho: float
    n_radii: int = 8
    n_angles: int = 16
    rays: tuple = ()   # extra (direction, radii array) segments per variable

    def samples(self) -> np.ndarray:
        if self.n_radii < 1 or self.n_angles < 1:
            raise ValueError("empty sample set")
        r = self.rho * np.arange(1, self.n_radii + 1) / self.n_radii
        th = 2 * np.pi * np.arange(self.n_angles) / self.n_angles
        pts = (r[:, None] * np.exp(1j * th)[None, :]).ravel()
        extra = [np.asarray(rr) * np.exp(1j * d) for d, rr in self.rays]
        return np.concatenate([pts] + extra) if extra else pts


@dataclass
class FNormResult:
    value: float
    tau1: complex
    tau2: complex
    m: float
    label: str = "disc-restricted"


def tau_weight(tau: np.ndarray, eps: complex, k: int, nu: float) -> np.ndarray:
    x = np.abs(tau / eps)
    return (1.0 + x ** (2 * k)) / x * np.exp(-nu * x ** k)


def evaluate_series(w: CoeffTable, tau1: np.ndarray, tau2: np.ndarray) -> np.ndarray:
    """Sum of w[n1,n2](m) tau1^n1 tau2^n2 on the product of sample sets, shape (s1, s2, m)."""
    V1 = np.asarray(tau1)[:, None] ** np.arange(w.N1 + 1)[None, :]
    V2 = np.asarray(tau2)[:, None] ** np.arange(w.N2 + 1)[None, :]
    return np.einsum("ia,jb,abm->ijm", V1, V2, w.values)


def f_norm(phi: CoeffTable, p: FNormParams) -> FNormResult:
    """Sup of the two-variable weighted modulus over disc samples and grid nodes."""
    s = p.samples()
    vals = evaluate_series(phi, s, s)
    wt = (tau_weight(s, p.eps, p.k1, p.nu1)[:, None, None]
          * tau_weight(s, p.eps, p.k2, p.nu2)[None, :, None]
          * norm_weight(phi.grid.nodes, p.beta, p.mu)[None, None, :])
    a = wt * np.abs(vals)
    i, j, m = np.unravel_index(int(np.argmax(a)), a.shape)
    return FNormResult(float(a[i, j, m]), complex(s[i]), complex(s[j]), float(phi.grid.nodes[m]))


# ---------------------------------------------------------------- operator scaling

OPERATORS = ("P1", "P2", "P2'", "P3", "P5", "P6")


@dataclass
class ScalingReport:
    op_id: str
    slope: float
    intercept: float
    residual: float
    expected_slope: float
    eps: np.ndarray = field(repr=False)
    ratios: np.ndarray = field(repr=False)
    flagged: str = ""

    @property
    def constant(self) -> float:
        return float(np.exp(self.intercept))


def _sample_set(eps: float, n_x: int, n_angles: int) -> np.ndarray:
    x = np.geomspace(0.05, 5.0, n_x)
    th = 2 * np.pi * np.arange(n_angles) / n_angles
    return eps * (x[:, None] * np.exp(1j * th)[None, :]).ravel()


def _gen_eval(coef: dict, tau: np.ndarray, eps: float) -> np.ndarray:
    """One-variable generalized series sum c_e tau^e (real exponents e)."""
    out = np.zeros(tau.shape, dtype=complex)
    for e, c in coef.items():
        out = out + c * np.exp(e * np.log(tau))
    return out


def _apply_1d(kind: str, coef: dict, k: int, gamma: float = None, partner: dict = None) -> dict:
    """Exact action on generalized monomials tau^e in one variable."""
    out = {}
    for e, c in coef.items():
        if kind == "P1":          # int (T-s)^g f(s^{1/k}) ds/s
            out[e + k * gamma] = out.get(e + k * gamma, 0) + c * beta_fn(gamma + 1, e / k)
        elif kind == "P2":        # int f(s^{1/k}) ds
            out[e + k] = out.get(e + k, 0) + c * k / (e + k)
        elif kind == "id":
            out[e] = out.get(e, 0) + c
        elif kind == "outer":     # int (T-s)^{1/k} f(s^{1/k}) ds/s
            out[e + 1] = out.get(e + 1, 0) + c * beta_fn(1 + 1 / k, e / k)
        elif kind == "conv":      # outer of the Beta convolution with partner
            for e2, c2 in partner.items():
                ee = e + e2
                out[ee + 1] = out.get(ee + 1, 0) + c * c2 * beta_fn(e / k, e2 / k) * beta_fn(1 + 1 / k, ee / k)
        else:
            raise ValueError(kind)
    return out


def operator_bound_check(op_id: str, inst: ProblemInstance, eps_samples, grid: ModeGrid,
                         gammas: tuple = None, seed: int = 0, n_x: int = 24,
                         n_angles: int = 16, zero_input: bool = False) -> ScalingReport:
    """Log-log slope of output norm over input norm against |eps|.

    Inputs are random polynomials in tau/eps (degrees 1..3) times the
    (beta, mu) profile in m; outputs are evaluated exactly on the same
    scaled sample set, so only the eps-dependence of the operator remains.
    """
    if op_id not in OPERATORS:
        raise ValueError(f"unknown operator {op_id!r}")
    eps_samples = np.asarray(eps_samples, dtype=float)
    if len(eps_samples) < 3:
        raise ValueError("degenerate fit: need at least 3 eps samples")
    e = inst.exponents
    k1, k2 = e.k1, e.k2
    sp = inst.space
    rng = np.random.default_rng(seed)
    m = grid.nodes
    x = 1j * m
    g = profile(m, sp.beta, sp.mu)
    mw = norm_weight(m, sp.beta, sp.mu)
    if gammas is None:
        gammas = (1.0 / k1, 1.0 / k2)

    def rand_coef():
        if zero_input:
            return {1: 0.0}
        return {n: complex(*rng.normal(size=2)) for n in (1, 2, 3)}

    c1, c2 = rand_coef(), rand_coef()   # separable inputs f = g(m) f1(tau1) f2(tau2)
    d1, d2 = rand_coef(), rand_coef()
    star_m = None
    if op_id in ("P3", "P5"):
        from .mode_space import ModeFunction, star_product
        R = inst.RD1.times(inst.RD2)
        gf = ModeFunction(grid, g)
        star_m = star_product(gf, gf, inst.P1.at(0.0), inst.P2.at(0.0), R).values
    elif op_id == "P6":
        from .mode_space import ModeFunction, star_product
        R = inst.RD1.times(inst.RD2)
        gf = ModeFunction(grid, g)
        star_m = star_product(gf, gf, None, inst.R0, R).values

    sup_m = lambda h: float(np.max(mw * np.abs(h)))
    w_in = sup_m(g)
    expected = {"P1": k1 * gammas[0] + k2 * gammas[1], "P2": float(k1 + k2), "P2'": float(k1),
                "P3": 2.0, "P5": 2.0, "P6": 2.0}[op_id]

    ratios = []
    for eps in eps_samples:
        tau = _sample_set(eps, n_x, n_angles)
        w1 = tau_weight(tau, eps, k1, sp.nu1)
        w2 = tau_weight(tau, eps, k2, sp.nu2)
        sc = lambda c: {n: v * eps ** (-n) for n, v in c.items()}   # polynomial in tau/eps
        f1, f2, h1, h2 = sc(c1), sc(c2), sc(d1), sc(d2)
        tsup = lambda a, b: float(np.max(w1[:, None] * w2[None, :]
                                         * np.abs(_gen_eval(a, tau, eps)[:, None] * _gen_eval(b, tau, eps)[None, :])))
        tsup1 = lambda a: float(np.max(w1 * np.abs(_gen_eval(a, tau, eps))))
        nf = tsup(f1, f2) * w_in
        if op_id == "P1":
            o = (_apply_1d("P1", f1, k1, gammas[0]), _apply_1d("P1", f2, k2, gammas[1]))
            num, den = tsup(*o) * w_in, nf
        elif op_id == "P2":
            o = (_apply_1d("P2", f1, k1), _apply_1d("P2", f2, k2))
            num, den = tsup(*o) * w_in, nf
        elif op_id == "P2'":
            o = (_apply_1d("P2", f1, k1), f2)
            num, den = tsup(*o) * w_in, nf
        elif op_id == "P3":
            o = (_apply_1d("conv", f1, k1, partner=h1), _apply_1d("conv", f2, k2, partner=h2))
            num, den = tsup(*o) * sup_m(star_m), nf * tsup(h1, h2) * w_in
        elif op_id == "P5":
            # f depends on tau1 only; g on both
            o = (_apply_1d("conv", f1, k1, partner=h1), _apply_1d("outer", h2, k2))
            num, den = tsup(*o) * sup_m(star_m), tsup1(f1) * w_in * tsup(h1, h2) * w_in
        else:  # P6: f in E_(beta,mu), g two-variable
            o = (_apply_1d("outer", h1, k1), _apply_1d("outer", h2, k2))
            num, den = tsup(*o) * sup_m(star_m), w_in * tsup(h1, h2) * w_in
        ratios.append(num / den if den > 0 else 0.0)
    ratios = np.array(ratios)
    if not np.all(ratios > 0):
        return ScalingReport(op_id, float("nan"), float("nan"), float("nan"), expected,
                             eps_samples, ratios, "zero input: ratios vanish")
    A = np.vstack([np.log(eps_samples), np.ones_like(eps_samples)]).T
    coef, res, *_ = np.linalg.lstsq(A, np.log(ratios), rcond=None)
    resid = float(np.sqrt(res[0] / len(eps_samples))) if len(res) else 0.0
    return ScalingReport(op_id, float(coef[0]), float(coef[1]), resid, expected, eps_samples, ratios)
