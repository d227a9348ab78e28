"""Discrete data of the two-time singular Cauchy problem: load, validate, derive."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .mode_space import ModeFunction, ModeGrid, profile

TOP_POWERS = ("irregular", "reduced")


@dataclass(frozen=True)
class PolySpec:
    """Polynomial in X, lowest degree first.

    eps_coeffs, when given, makes coefficient i a polynomial in epsilon
    (eps_coeffs[i][j] multiplies eps**j); coeffs is then ignored.
    """
    coeffs: tuple = (1.0,)
    eps_coeffs: Optional[tuple] = None

    def coefficients(self, eps: complex = 0.0) -> np.ndarray:
        if self.eps_coeffs is None:
            c = np.array(self.coeffs, dtype=complex)
        else:
            c = np.array([sum(cj * eps ** j for j, cj in enumerate(row))
                          for row in self.eps_coeffs], dtype=complex)
        nz = np.nonzero(c)[0]
        return c[:nz[-1] + 1] if len(nz) else np.zeros(1, dtype=complex)

    @property
    def degree(self) -> int:
        if self.eps_coeffs is None:
            return len(self.coefficients()) - 1
        deg = -1
        for i, row in enumerate(self.eps_coeffs):
            if any(complex(c) != 0 for c in row):
                deg = i
        return max(deg, 0)

    def is_zero(self) -> bool:
        if self.eps_coeffs is None:
            return not np.any(self.coefficients())
        return all(complex(c) == 0 for row in self.eps_coeffs for c in row)

    def __call__(self, x, eps: complex = 0.0):
        c = self.coefficients(eps)
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=complex), c)

    def at(self, eps: complex):
        """Callable of X with epsilon frozen."""
        return lambda x: self(x, eps)

    def times(self, other: "PolySpec") -> "PolySpec":
        return PolySpec(tuple(np.polynomial.polynomial.polymul(
            self.coefficients(), other.coefficients())))

    def imaginary_axis_zeros(self, tol: float = 1e-12) -> list:
        """Real m with P(im) = 0, from the roots of m -> P(im)."""
        c = self.coefficients()
        cm = c * (1j) ** np.arange(len(c))
        if len(cm) < 2:
            return []
        roots = np.polynomial.polynomial.polyroots(cm)
        scale = max(1.0, float(np.max(np.abs(roots)))) if len(roots) else 1.0
        return sorted(float(r.real) for r in roots if abs(r.imag) <= tol * scale * 1e3)


@dataclass(frozen=True)
class SpaceParams:
    beta: float
    mu: float
    nu1: float = 0.5
    nu2: float = 0.5
    rho: float = 0.5
    eps0: float = 0.2


@dataclass(frozen=True)
class ExponentTables:
    k1: int
    k2: int
    D1: int
    D2: int
    d: tuple          # d[l-1] for l = 1..D1
    delta: tuple
    dt: tuple         # second-variable analogues, l = 1..D2
    deltat: tuple
    Delta: dict       # (l1, l2) -> int for inner indices
    stated: dict = field(default_factory=dict)  # optional declared derived values


@dataclass(frozen=True)
class GeneratorSpec:
    K0: float = 1.0
    T0: float = 2.0
    profile: str = "exp_poly"
    c_support: object = "all"   # "all", "none" or a set of (n1, n2), zeros allowed
    f_support: object = "all"   # "all", "none" or a set of (n1, n2), n >= 1

    def active(self, kind: str, n1: int, n2: int) -> bool:
        sup = self.c_support if kind == "C" else self.f_support
        if kind == "F" and (n1 < 1 or n2 < 1):
            return False
        if sup == "all":
            return True
        if sup == "none":
            return False
        return (n1, n2) in sup


@dataclass(frozen=True)
class ProblemInstance:
    exponents: ExponentTables
    Q1: PolySpec
    Q2: PolySpec
    R0: PolySpec
    RD1: PolySpec
    RD2: PolySpec
    P1: PolySpec
    P2: PolySpec
    R: dict           # (l1, l2) -> PolySpec for inner indices
    space: SpaceParams
    gen: GeneratorSpec = GeneratorSpec()
    top_power: str = "irregular"

    def with_(self, **kw) -> "ProblemInstance":
        from dataclasses import replace
        return replace(self, **kw)


# ---------------------------------------------------------------- derived data

@dataclass(frozen=True)
class DerivedExponents:
    Delta_DD: int
    Delta_D0: int
    Delta_0D: int
    d_k: tuple    # d_{l,k1} for l = 1..D1
    dt_k: tuple   # second variable


def derived_exponents(inst: ProblemInstance) -> DerivedExponents:
    e = inst.exponents
    D1, D2 = e.D1, e.D2
    dD, dtD = e.d[D1 - 1], e.dt[D2 - 1]
    sD, stD = e.delta[D1 - 1], e.deltat[D2 - 1]
    d_k = tuple(e.d[l] + e.k1 + 1 - e.delta[l] * (e.k1 + 1) for l in range(D1))
    dt_k = tuple(e.dt[l] + e.k2 + 1 - e.deltat[l] * (e.k2 + 1) for l in range(D2))
    if min(d_k) < 0 or min(dt_k) < 0:
        raise ValueError("inconsistent exponent tables: negative d_{l,k}")
    return DerivedExponents(dD + dtD - sD - stD + 2, dD - sD + 1, dtD - stD + 1,
                            d_k, dt_k)


def top_powers(inst: ProblemInstance) -> tuple:
    """T-exponents a_j of the top derivative term T^a d^delta in each factor."""
    e = inst.exponents
    sD, stD = e.delta[e.D1 - 1], e.deltat[e.D2 - 1]
    if inst.top_power == "irregular":
        return (sD - 1) * (e.k1 + 1), (stD - 1) * (e.k2 + 1)
    if inst.top_power == "reduced":
        return (sD - 1) * (e.k1 - 1), (stD - 1) * (e.k2 - 1)
    raise ValueError(f"unknown top_power {inst.top_power!r}")


def eps_power(inst: ProblemInstance, l1: int, l2: int) -> int:
    e = inst.exponents
    return (e.Delta[(l1, l2)] - e.d[l1 - 1] - e.dt[l2 - 1]
            + e.delta[l1 - 1] + e.deltat[l2 - 1] - 2)


# ---------------------------------------------------------------- coefficients

def generate_coefficients(gen: GeneratorSpec, space: SpaceParams, n1: int, n2: int,
                          grid: ModeGrid, kind: str = "F") -> ModeFunction:
    """C_{n1,n2} or F_{n1,n2}: K0 T0^-(n1+n2) times the unit-norm profile."""
    if not gen.active(kind, n1, n2):
        return ModeFunction.zeros(grid)
    if gen.profile != "exp_poly":
        raise ValueError(f"unknown profile {gen.profile!r}")
    scale = gen.K0 * gen.T0 ** (-(n1 + n2))
    return ModeFunction(grid, scale * profile(grid.nodes, space.beta, space.mu))


def coefficient_array(inst: ProblemInstance, grid: ModeGrid, N1: int, N2: int,
                      kind: str) -> np.ndarray:
    """Array [n1, n2, node] of generated coefficients for 0 <= nj <= Nj."""
    out = np.zeros((N1 + 1, N2 + 1, grid.n_points), dtype=complex)
    for a in range(N1 + 1):
        for b in range(N2 + 1):
            if inst.gen.active(kind, a, b):
                out[a, b] = generate_coefficients(inst.gen, inst.space, a, b, grid, kind).values
    return out


# ---------------------------------------------------------------- validation

@dataclass
class Condition:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    conditions: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    sector: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def failed(self) -> list:
        return [c.name for c in self.conditions if not c.passed]

    def get(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed,
                "conditions": [vars(c) for c in self.conditions],
                "warnings": list(self.warnings),
                "sector": self.sector}


def _sector_witness(num: PolySpec, den: PolySpec, m: np.ndarray) -> dict:
    """Direction, aperture and radius of a closed sector holding num(im)/den(im).

    Arguments are taken over the grid plus the two |m| -> infinity limits of
    the ratio of leading terms.
    """
    z = num(1j * m) / den(1j * m)
    cn, cd = num.coefficients(), den.coefficients()
    p = len(cn) - len(cd)
    lead = cn[-1] / cd[-1]
    tails = [lead * (1j) ** p, lead * (-1j) ** p]
    args = np.concatenate([np.angle(z), np.angle(tails)])
    ref = np.angle(np.mean(np.exp(1j * args)))
    dev = np.angle(np.exp(1j * (args - ref)))
    lo, hi = float(dev.min()), float(dev.max())
    radius = float(np.min(np.abs(z)))
    if p > 0:
        pass  # ratio grows at infinity; the grid minimum stands
    elif p == 0:
        radius = min(radius, float(abs(lead)))
    else:
        radius = 0.0
    return {"direction": float(ref + 0.5 * (lo + hi)),
            "aperture": float(max(0.5 * (hi - lo), 1e-9)),
            "radius": radius,
            "ok": bool(radius > 0 and 0.5 * (hi - lo) < math.pi / 2)}


def min_root_radius(inst: ProblemInstance, grid: ModeGrid) -> float:
    """Smallest modulus of the roots of the binomials in tau, over grid and tails."""
    e = inst.exponents
    out = math.inf
    for Q, RD, k, sD in ((inst.Q1, inst.RD1, e.k1, e.delta[e.D1 - 1]),
                         (inst.Q2, inst.RD2, e.k2, e.deltat[e.D2 - 1])):
        s = (sD - 1) * k
        if s == 0:
            continue
        x = 1j * grid.nodes
        rd = RD(x)
        ok = np.abs(rd) > 0
        mod = (np.abs(Q(x)[ok]) / (np.abs(rd[ok]) * k ** (sD - 1))) ** (1.0 / s)
        out = min(out, float(mod.min()) if len(mod) else math.inf)
        if Q.degree == RD.degree:
            lead = abs(Q.coefficients()[-1] / RD.coefficients()[-1]) / k ** (sD - 1)
            out = min(out, lead ** (1.0 / s))
    return out


def validate_instance(inst: ProblemInstance, grid: ModeGrid) -> ValidationReport:
    e = inst.exponents
    if inst.Q1.is_zero() or inst.Q2.is_zero() or inst.RD1.is_zero() or inst.RD2.is_zero():
        raise ValueError("invalid instance: degenerate polynomial")
    rep = ValidationReport()
    add = lambda name, ok, detail="": rep.conditions.append(Condition(name, bool(ok), detail))

    add("k_order", 1 <= e.k1 < e.k2, f"k1={e.k1}, k2={e.k2}")
    add("D_min", e.D1 >= 2 and e.D2 >= 2 and len(e.d) == e.D1 and len(e.dt) == e.D2
        and len(e.delta) == e.D1 and len(e.deltat) == e.D2, f"D1={e.D1}, D2={e.D2}")
    add("delta_start", e.delta[0] == 1 and e.deltat[0] == 1,
        f"delta[1]={e.delta[0]}, deltat[1]={e.deltat[0]}")
    inc = all(a < b for a, b in zip(e.delta, e.delta[1:])) and \
        all(a < b for a, b in zip(e.deltat, e.deltat[1:]))
    add("delta_increasing", inc, f"delta={e.delta}, deltat={e.deltat}")
    sD, stD = e.delta[-1], e.deltat[-1]
    add("d_top", e.d[-1] == (sD - 1) * (e.k1 + 1) and e.dt[-1] == (stD - 1) * (e.k2 + 1),
        f"d[D1]={e.d[-1]} vs {(sD - 1) * (e.k1 + 1)}, dt[D2]={e.dt[-1]} vs {(stD - 1) * (e.k2 + 1)}")
    inner_ok = all(e.d[l] > (e.delta[l] - 1) * (e.k1 + 1) for l in range(e.D1 - 1)) and \
        all(e.dt[l] > (e.deltat[l] - 1) * (e.k2 + 1) for l in range(e.D2 - 1))
    add("d_inner", inner_ok, "d[l] > (delta[l]-1)(k+1) for inner l")
    # delta_D >= delta_l + 2/k, checked as k*delta_D >= k*delta_l + 2
    gap = all(e.k1 * sD >= e.k1 * e.delta[l] + 2 for l in range(e.D1 - 1)) and \
        all(e.k2 * stD >= e.k2 * e.deltat[l] + 2 for l in range(e.D2 - 1))
    add("delta_gap", gap, f"delta[D1]={sD} needs >= delta[l]+2/k1; deltat[D2]={stD} needs >= deltat[l]+2/k2")
    lower = []
    for l1 in range(1, e.D1):
        for l2 in range(1, e.D2):
            v = e.Delta.get((l1, l2))
            if v is None or v + e.k1 * (1 - sD) + e.k2 * (1 - stD) + 2 < 0:
                lower.append((l1, l2))
    add("Delta_lower", not lower, f"violating pairs: {lower}" if lower else "")

    try:
        der = derived_exponents(inst)
        add("d_k_nonnegative", True, f"d_k={der.d_k}, dt_k={der.dt_k}")
        bad = [k for k, v in e.stated.items() if getattr(der, k, v) != v]
        add("Delta_top", not bad, f"stated values disagree: {bad}" if bad else
            f"Delta_DD={der.Delta_DD}, Delta_D0={der.Delta_D0}, Delta_0D={der.Delta_0D}")
    except ValueError as exc:
        add("d_k_nonnegative", False, str(exc))

    a1, a2 = top_powers(inst)
    s1, s2 = sD - a1, stD - a2
    add("top_power_wellfounded", s1 <= 1 and s2 <= 1,
        f"index shifts sigma=({s1}, {s2}) must not exceed 1")

    bad_r = [k for k in inst.R if not (1 <= k[0] < e.D1 and 1 <= k[1] < e.D2)]
    add("R_boundary_zero", not bad_r, f"R given at boundary indices {bad_r}" if bad_r else "")

    add("deg_Q_ge_RD", inst.Q1.degree >= inst.RD1.degree and inst.Q2.degree >= inst.RD2.degree,
        f"deg Q=({inst.Q1.degree},{inst.Q2.degree}), deg RD=({inst.RD1.degree},{inst.RD2.degree})")
    dDD = inst.RD1.degree + inst.RD2.degree
    add("deg_RDD_ge_R", all(p.degree <= dDD for p in inst.R.values()),
        f"deg R_DD={dDD}")
    add("deg_RDD_ge_P", inst.P1.degree <= dDD and inst.P2.degree <= dDD,
        f"deg P=({inst.P1.degree},{inst.P2.degree}), deg R_DD={dDD}")

    m = grid.nodes
    for name, poly in (("Q1", inst.Q1), ("Q2", inst.Q2)):
        zeros = poly.imaginary_axis_zeros()
        on_grid = np.abs(poly(1j * m)) == 0
        ok = not zeros and not np.any(on_grid)
        add(f"{name}_nonvanishing", ok,
            f"{name}(im)=0 at m={_fmt_roots(zeros)}" if not ok else "")
    rdd = inst.RD1.times(inst.RD2)
    zeros = rdd.imaginary_axis_zeros()
    add("RDD_nonvanishing", not zeros and not np.any(rdd(1j * m) == 0),
        f"R_DD(im)=0 at m={_fmt_roots(zeros)}" if zeros else "")

    mu_need = max(inst.P1.degree, inst.P2.degree) + 1
    add("mu_threshold", inst.space.mu > mu_need, f"mu={inst.space.mu} must exceed {mu_need}")
    mu_kernel = max(inst.Q1.degree, inst.Q2.degree) + 1
    if not inst.space.mu > mu_kernel:
        rep.warnings.append(f"mu={inst.space.mu} does not exceed max(deg Q1, deg Q2)+1={mu_kernel}")

    for j, (Q, RD) in enumerate(((inst.Q1, inst.RD1), (inst.Q2, inst.RD2)), start=1):
        if RD.imaginary_axis_zeros():
            w = {"direction": 0.0, "aperture": 0.0, "radius": 0.0, "ok": False}
        else:
            w = _sector_witness(Q, RD, m)
        rep.sector[f"Q{j}/RD{j}"] = w
        add(f"sector_{j}", w["ok"], f"direction={w['direction']:.6g}, aperture={w['aperture']:.6g}, radius={w['radius']:.6g}")

    rmin = min_root_radius(inst, grid)
    add("rho_below_roots", inst.space.rho < rmin, f"rho={inst.space.rho}, min root radius={rmin:.6g}")
    return rep


def _fmt_roots(r) -> str:
    return ", ".join(f"{x:.6g}" for x in r)


# ---------------------------------------------------------------- file format

def _cplx(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def _pair(c: complex) -> list:
    c = complex(c)
    return [c.real, c.imag]


def poly_from_json(obj) -> PolySpec:
    if isinstance(obj, dict):
        if "eps_coeffs" in obj:
            return PolySpec((0.0,), tuple(tuple(_cplx(c) for c in row) for row in obj["eps_coeffs"]))
        obj = obj["coeffs"]
    return PolySpec(tuple(_cplx(c) for c in obj))


def poly_to_json(p: PolySpec):
    if p.eps_coeffs is not None:
        return {"eps_coeffs": [[_pair(c) for c in row] for row in p.eps_coeffs]}
    return [_pair(c) for c in p.coeffs]


def _indexed(obj: dict, n: int) -> tuple:
    return tuple(int(obj[str(l)]) for l in range(1, n + 1))


def _key(s: str) -> tuple:
    a, b = s.split(",")
    return int(a), int(b)


def _support(v):
    if v in ("all", "none"):
        return v
    return frozenset(tuple(int(x) for x in p) for p in v)


def instance_from_dict(obj: dict) -> ProblemInstance:
    ex = obj["exponents"]
    D1, D2 = int(ex["D1"]), int(ex["D2"])
    stated = {k: int(ex[k]) for k in ("Delta_DD", "Delta_D0", "Delta_0D") if k in ex}
    exps = ExponentTables(int(ex["k1"]), int(ex["k2"]), D1, D2,
                          _indexed(ex["d"], D1), _indexed(ex["delta"], D1),
                          _indexed(ex["dt"], D2), _indexed(ex["deltat"], D2),
                          {_key(k): int(v) for k, v in ex["Delta"].items()}, stated)
    po = obj["polys"]
    one = PolySpec((1.0,))
    get = lambda name: poly_from_json(po[name]) if name in po else one
    R = {_key(k): poly_from_json(v) for k, v in po.get("R", {}).items()}
    sp = obj["space"]
    space = SpaceParams(float(sp["beta"]), float(sp["mu"]), float(sp.get("nu1", 0.5)),
                        float(sp.get("nu2", 0.5)), float(sp.get("rho", 0.5)),
                        float(sp.get("eps0", 0.2)))
    g = obj.get("gen", {})
    gen = GeneratorSpec(float(g.get("K0", 1.0)), float(g.get("T0", 2.0)),
                        g.get("profile", "exp_poly"),
                        _support(g.get("c_support", "all")), _support(g.get("f_support", "all")))
    return ProblemInstance(exps, get("Q1"), get("Q2"), get("R0"), get("RD1"), get("RD2"),
                           get("P1"), get("P2"), R, space, gen,
                           obj.get("top_power", "irregular"))


def instance_to_dict(inst: ProblemInstance) -> dict:
    e = inst.exponents
    ix = lambda t: {str(i + 1): int(v) for i, v in enumerate(t)}
    ex = {"k1": e.k1, "k2": e.k2, "D1": e.D1, "D2": e.D2, "d": ix(e.d), "delta": ix(e.delta),
          "dt": ix(e.dt), "deltat": ix(e.deltat),
          "Delta": {f"{a},{b}": v for (a, b), v in sorted(e.Delta.items())}}
    ex.update(e.stated)
    sup = lambda s: s if isinstance(s, str) else sorted([list(p) for p in s])
    return {
        "exponents": ex,
        "polys": {"Q1": poly_to_json(inst.Q1), "Q2": poly_to_json(inst.Q2),
                  "R0": poly_to_json(inst.R0), "RD1": poly_to_json(inst.RD1),
                  "RD2": poly_to_json(inst.RD2), "P1": poly_to_json(inst.P1),
                  "P2": poly_to_json(inst.P2),
                  "R": {f"{a},{b}": poly_to_json(p) for (a, b), p in sorted(inst.R.items())}},
        "space": vars(inst.space).copy(),
        "gen": {"K0": inst.gen.K0, "T0": inst.gen.T0, "profile": inst.gen.profile,
                "c_support": sup(inst.gen.c_support), "f_support": sup(inst.gen.f_support)},
        "top_power": inst.top_power,
    }


def load_instance(path) -> ProblemInstance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


def save_instance(inst: ProblemInstance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=2, sort_keys=True)


# ---------------------------------------------------------------- reference instances

def instance_a(**kw) -> ProblemInstance:
    """k=(2,3), D=(2,2), Q1=2-X^2, Q2=3-X^2, every other polynomial 1."""
    one = PolySpec((1.0,))
    exps = ExponentTables(2, 3, 2, 2, (1, 3), (1, 2), (1, 4), (1, 2), {(1, 1): 3})
    inst = ProblemInstance(exps, PolySpec((2.0, 0.0, -1.0)), PolySpec((3.0, 0.0, -1.0)),
                           one, one, one, one, one, {(1, 1): one},
                           SpaceParams(1.0, 2.0, 0.5, 0.5, 0.5, 0.2),
                           GeneratorSpec(1.0, 2.0))
    return inst.with_(**kw) if kw else inst


def instance_a0(**kw) -> ProblemInstance:
    """instance_a with C = 0 and forcing supported on (1,1) only."""
    inst = instance_a(gen=GeneratorSpec(1.0, 2.0, "exp_poly", "none", frozenset({(1, 1)})))
    return inst.with_(**kw) if kw else inst
