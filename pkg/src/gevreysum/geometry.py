"""Roots of the Borel-plane binomials, admissible directions and good coverings."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .instance import ProblemInstance, _sector_witness
from .mode_space import ModeGrid


def ang_dist(a, b):
    """Distance on the circle, in [0, pi]."""
    return np.abs(np.mod(np.asarray(a) - np.asarray(b) + np.pi, 2 * np.pi) - np.pi)


@dataclass(frozen=True)
class Sector:
    direction: float
    opening: float
    radius: float = math.inf

    def __post_init__(self):
        if not self.opening > 0:
            raise ValueError("sector opening must be positive")

    def contains(self, z) -> np.ndarray:
        """Half-open in angle: the counterclockwise edge belongs to the sector."""
        z = np.asarray(z, dtype=complex)
        off = np.angle(z * np.exp(-1j * self.direction))
        h = self.opening / 2
        if self.opening >= 2 * math.pi:
            inside = np.ones(z.shape, dtype=bool)
        else:
            inside = (off > -h) & (off <= h + 1e-15)
        return inside & (np.abs(z) < self.radius) & (z != 0)

    def contains_angle(self, theta) -> np.ndarray:
        return self.contains(np.exp(1j * np.asarray(theta, dtype=float)) * min(1.0, self.radius / 2))

    def intersects(self, other: "Sector") -> bool:
        return bool(ang_dist(self.direction, other.direction) < (self.opening + other.opening) / 2)


# ---------------------------------------------------------------- roots

def _axis(inst: ProblemInstance, j: int):
    e = inst.exponents
    if j == 1:
        return inst.Q1, inst.RD1, e.k1, e.delta[-1]
    if j == 2:
        return inst.Q2, inst.RD2, e.k2, e.deltat[-1]
    raise ValueError("axis must be 1 or 2")


def pm_roots(inst: ProblemInstance, j: int, m: float) -> np.ndarray:
    """The (delta-1) k roots of Q(im) k - RD(im) k^delta tau^((delta-1)k)."""
    Q, RD, k, delta = _axis(inst, j)
    s = (delta - 1) * k
    x = 1j * float(m)
    rd = complex(RD(x))
    if rd == 0:
        raise ValueError("degenerate: no roots (R_D vanishes)")
    if s == 0:
        return np.zeros(0, dtype=complex)
    w = complex(Q(x)) / (rd * k ** (delta - 1))
    mod = abs(w) ** (1.0 / s)
    return mod * np.exp(1j * (np.angle(w) + 2 * np.pi * np.arange(s)) / s)


def _tail_ratio(inst: ProblemInstance, j: int):
    """(power p, limits at m -> +inf and -inf) of Q(im)/(RD(im) k^(delta-1))."""
    Q, RD, k, delta = _axis(inst, j)
    cq, cr = Q.coefficients(), RD.coefficients()
    p = len(cq) - len(cr)
    lead = cq[-1] / (cr[-1] * k ** (delta - 1))
    return p, lead * (1j) ** p, lead * (-1j) ** p


def root_table(inst: ProblemInstance, j: int, grid: ModeGrid) -> np.ndarray:
    """Roots on every grid node, shape (node, s), branches continued along the grid."""
    Q, RD, k, delta = _axis(inst, j)
    s = (delta - 1) * k
    if s == 0:
        return np.zeros((grid.n_points, 0), dtype=complex)
    x = 1j * grid.nodes
    rd = RD(x)
    if np.any(rd == 0):
        raise ValueError("degenerate: no roots (R_D vanishes)")
    w = Q(x) / (rd * k ** (delta - 1))
    arg = np.unwrap(np.angle(w))
    mod = np.abs(w) ** (1.0 / s)
    return mod[:, None] * np.exp(1j * (arg[:, None] + 2 * np.pi * np.arange(s)[None, :]) / s)


def root_arguments(inst: ProblemInstance, j: int, grid: ModeGrid) -> np.ndarray:
    """All root arguments over the grid plus the |m| -> infinity limits."""
    Q, RD, k, delta = _axis(inst, j)
    s = (delta - 1) * k
    if s == 0:
        return np.zeros(0)
    args = [np.angle(root_table(inst, j, grid)).ravel()]
    p, lp, lm = _tail_ratio(inst, j)
    for lim in (lp, lm):
        args.append((np.angle(lim) + 2 * np.pi * np.arange(s)) / s)
    return np.unique(np.round(np.mod(np.concatenate(args), 2 * np.pi), 12))


# ---------------------------------------------------------------- direction report

@dataclass
class DirectionReport:
    j: int
    d: float
    rho: float
    M1: float
    M2: float
    C_P: float
    passed: bool
    threshold: float = 1e-6


def _ray_radii(roots: np.ndarray, d: float, n: int) -> np.ndarray:
    base = np.geomspace(1e-3, 1e3, n)
    proj = (roots * np.exp(-1j * d)).real.ravel()
    return np.unique(np.concatenate([base, proj[proj > 0]]))


def direction_report(inst: ProblemInstance, j: int, d: float, rho: float, grid: ModeGrid,
                     ray_samples: int = 200, n_radii: int = 8, n_angles: int = 16,
                     threshold: float = 1e-6) -> DirectionReport:
    Q, RD, k, delta = _axis(inst, j)
    s = (delta - 1) * k
    x = 1j * grid.nodes
    q = root_table(inst, j, grid)           # (node, s)
    r = rho * np.arange(1, n_radii + 1) / n_radii
    th = 2 * np.pi * np.arange(n_angles) / n_angles
    disc = np.concatenate([(r[:, None] * np.exp(1j * th)[None, :]).ravel(),
                           q.ravel()[np.abs(q.ravel()) <= rho]])
    ray = _ray_radii(q, d, ray_samples) * np.exp(1j * d)
    tau = np.concatenate([disc, ray])
    if s == 0:
        M1 = M2 = math.inf
    else:
        dist = np.abs(tau[None, None, :] - q[:, :, None])          # (node, root, sample)
        M1 = float(np.min(dist / (1 + np.abs(tau))[None, None, :]))
        qa = np.abs(q)
        per_root = np.min(dist / qa[:, :, None], axis=(0, 2))
        M2 = float(np.max(per_root))
        p, lp, lm = _tail_ratio(inst, j)
        if p < 0:
            M1 = 0.0     # roots approach the origin
        elif p > 0:
            for lim in (lp, lm):
                a = (np.angle(lim) + 2 * np.pi * np.arange(s)) / s
                M1 = min(M1, float(np.min(2 * np.sin(ang_dist(a, d) / 2))))
    a = Q(x)[:, None] * k
    b = RD(x)[:, None] * k ** delta
    P = a - b * tau[None, :] ** s
    denom = np.abs(RD(x))[:, None] * (1 + np.abs(tau)[None, :] ** k) ** (delta - 1 - 1.0 / k)
    if s == 0:
        C_P = float(np.min(np.abs(P) / denom))
    else:
        w = _sector_witness(Q, RD, grid.nodes)
        rad = max(w["radius"], 1e-300)
        C_P = float(np.min(np.abs(P) / denom)) / rad ** (1.0 / s)
    ok = M1 > threshold and M2 > threshold and C_P > threshold
    return DirectionReport(j, float(d), float(rho), float(M1), float(M2), float(C_P), bool(ok), threshold)


# ---------------------------------------------------------------- coverings

@dataclass
class Cell:
    p: int
    label: tuple              # (p1, p2)
    sector: Sector
    d1: float
    d2: float
    eta1: float               # half-aperture of the root-free Borel sector around d1
    eta2: float
    theta1: float             # opening of the associated time-parameter sector
    theta2: float


@dataclass
class GoodCovering:
    sigma1: int
    sigma2: int
    eps0: float
    k1: int
    k2: int
    cells: list
    T1: Sector
    T2: Sector
    delta1: float = 0.1

    @property
    def sectors(self) -> list:
        return [c.sector for c in self.cells]

    def cell(self, p1: int, p2: int) -> Cell:
        for c in self.cells:
            if tuple(c.label) == (p1, p2):
                return c
        raise KeyError((p1, p2))

    def to_dict(self) -> dict:
        sec = lambda s: {"direction": s.direction, "opening": s.opening,
                         "radius": None if math.isinf(s.radius) else s.radius}
        return {"sigma1": self.sigma1, "sigma2": self.sigma2, "eps0": self.eps0,
                "k1": self.k1, "k2": self.k2, "delta1": self.delta1,
                "T1": sec(self.T1), "T2": sec(self.T2),
                "cells": [{"p": c.p, "label": list(c.label), "sector": sec(c.sector),
                           "d1": c.d1, "d2": c.d2, "eta1": c.eta1, "eta2": c.eta2,
                           "theta1": c.theta1, "theta2": c.theta2} for c in self.cells]}

    @classmethod
    def from_dict(cls, obj: dict) -> "GoodCovering":
        sec = lambda s: Sector(float(s["direction"]), float(s["opening"]),
                               math.inf if s.get("radius") is None else float(s["radius"]))
        cells = [Cell(int(c["p"]), tuple(c["label"]), sec(c["sector"]), float(c["d1"]), float(c["d2"]),
                      float(c["eta1"]), float(c["eta2"]), float(c["theta1"]), float(c["theta2"]))
                 for c in obj["cells"]]
        return cls(int(obj["sigma1"]), int(obj["sigma2"]), float(obj["eps0"]), int(obj["k1"]),
                   int(obj["k2"]), cells, sec(obj["T1"]), sec(obj["T2"]), float(obj.get("delta1", 0.1)))


class CoveringError(ValueError):
    pass


def laplace_halfwidth(k: int, delta1: float) -> float:
    """Largest |k (gamma - arg T)| / k allowed by cos(k(gamma - arg T)) >= delta1."""
    return math.acos(delta1) / k


def _choose_direction(a: float, need: float, root_args: np.ndarray, k: int, delta1: float,
                      margin: float, step: float = math.radians(0.25)):
    """Candidates near a, best first: (d, eta) with containment slack > 0."""
    w = laplace_halfwidth(k, delta1)
    ds = a + np.arange(-math.pi / 2, math.pi / 2 + step / 2, step)
    if len(root_args):
        dist = np.min(ang_dist(ds[:, None], root_args[None, :]), axis=1)
    else:
        dist = np.full(len(ds), math.pi / 2 + margin)
    eta = np.minimum(dist, math.pi / 2 + margin) - margin
    slack = eta + w - ang_dist(ds, a) - need
    theta = 2 * (eta + w)
    ok = (eta > 0) & (slack > 0) & (theta > math.pi / k)
    idx = np.nonzero(ok)[0]
    idx = idx[np.lexsort((ang_dist(ds[idx], a), -np.round(eta[idx], 12)))]
    return [(float(np.angle(np.exp(1j * ds[i]))), float(eta[i])) for i in idx]


def build_good_covering(inst: ProblemInstance, sigma1: int, sigma2: int, eps0: float,
                        opening: float, T1_spec: Sector = None, T2_spec: Sector = None,
                        grid: ModeGrid = None, offset: float = None, delta1: float = 0.1,
                        margin: float = math.radians(2.0)) -> GoodCovering:
    e = inst.exponents
    k1, k2 = e.k1, e.k2
    if not opening > math.pi / k2:
        raise CoveringError(f"opening must exceed pi/k2 = {math.degrees(math.pi / k2):.6g} deg")
    n = sigma1 * sigma2
    if sigma1 < 1 or sigma2 < 1 or n < 2:
        raise CoveringError("need sigma1 * sigma2 >= 2")
    spacing = 2 * math.pi / n
    if opening <= spacing:
        raise CoveringError("coverage gap: opening does not exceed the sector spacing")
    if opening >= 2 * spacing and n > 2:
        raise CoveringError("triple overlap: opening reaches twice the sector spacing")
    if grid is None:
        from .mode_space import default_grid
        grid = default_grid(inst.space.beta, inst.space.mu)
    T1 = T1_spec or Sector(0.0, math.radians(10.0), 1.0)
    T2 = T2_spec or Sector(0.0, math.radians(10.0), 1.0)
    roots = (root_arguments(inst, 1, grid), root_arguments(inst, 2, grid))
    rho = inst.space.rho
    reports = {}

    def admissible(j, d):
        key = (j, round(d, 9))
        if key not in reports:
            reports[key] = direction_report(inst, j, d, rho, grid).passed
        return reports[key]

    def attempt(off):
        cells = []
        worst = math.inf
        for p in range(n):
            c = off + p * spacing
            dirs = []
            for j, (T, k) in enumerate(((T1, k1), (T2, k2))):
                a = c + T.direction
                need = (opening + T.opening) / 2
                chosen = None
                for d, eta in _choose_direction(a, need, roots[j], k, delta1, margin):
                    if admissible(j + 1, d):
                        chosen = (d, eta)
                        break
                if chosen is None:
                    return None, -math.inf
                dirs.append(chosen)
                worst = min(worst, chosen[1])
            (d1, eta1), (d2, eta2) = dirs
            cells.append(Cell(p, (p // sigma2, p % sigma2), Sector(float(np.angle(np.exp(1j * c))), opening, eps0),
                              d1, d2, eta1, eta2,
                              2 * (eta1 + laplace_halfwidth(k1, delta1)),
                              2 * (eta2 + laplace_halfwidth(k2, delta1))))
        return cells, worst

    if offset is not None:
        cells, _ = attempt(offset)
    else:
        best = (None, -math.inf)
        for off in np.linspace(0.0, spacing, 48, endpoint=False):
            got = attempt(float(off))
            if got[0] is not None and got[1] > best[1] + 1e-12:
                best = got
        cells = best[0]
    if cells is None:
        raise CoveringError("no admissible covering: root arguments obstruct the multidirections")
    return GoodCovering(sigma1, sigma2, eps0, k1, k2, cells, T1, T2, delta1)


@dataclass
class CoveringCheck:
    coverage_ok: bool
    triple_ok: bool
    opening_ok: bool
    containment_ok: bool
    min_count: int
    max_count: int
    details: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.coverage_ok and self.triple_ok and self.opening_ok and self.containment_ok

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def covering_check(cov: GoodCovering, angular_step: float = math.radians(0.1)) -> CoveringCheck:
    th = np.arange(0.0, 2 * math.pi, angular_step)
    z = 0.5 * cov.eps0 * np.exp(1j * th)
    counts = np.zeros(len(th), dtype=int)
    for s in cov.sectors:
        counts += s.contains(z)
    details = []
    cov_ok = bool(counts.min() >= 1)
    if not cov_ok:
        details.append(f"coverage gap near {math.degrees(th[np.argmin(counts)]):.3f} deg")
    tri_ok = bool(counts.max() <= 2)
    if not tri_ok:
        details.append(f"triple overlap near {math.degrees(th[np.argmax(counts)]):.3f} deg")
    op_ok = all(s.opening > math.pi / cov.k2 for s in cov.sectors)
    if not op_ok:
        details.append("a sector opening does not exceed pi/k2")
    cont_ok = True
    for c in cov.cells:
        for j, (T, d, theta, k) in enumerate(((cov.T1, c.d1, c.theta1, cov.k1),
                                              (cov.T2, c.d2, c.theta2, cov.k2)), start=1):
            if not theta > math.pi / k:
                cont_ok = False
                details.append(f"cell {c.label}: theta{j} does not exceed pi/k{j}")
            shrink = 1 - 1e-9
            ea = c.sector.direction + shrink * c.sector.opening / 2 * np.array([-1, 0, 1])
            ta = T.direction + shrink * T.opening / 2 * np.array([-1, 0, 1])
            prod = (ea[:, None] + ta[None, :]).ravel()
            if np.any(ang_dist(prod, d) >= theta / 2):
                cont_ok = False
                details.append(f"cell {c.label}: eps*t{j} leaves the sector around d{j}")
    return CoveringCheck(cov_ok, tri_ok, op_ok, cont_ok, int(counts.min()), int(counts.max()), details)
