import math
from dataclasses import replace

import numpy as np
import pytest

from gevreysum.geometry import (CoveringError, GoodCovering, Sector, build_good_covering,
                                covering_check, direction_report, pm_roots, root_table)
from gevreysum.instance import PolySpec

DEG = math.pi / 180


def test_sector_membership_is_half_open():
    s = Sector(0.0, 90 * DEG, 2.0)
    assert s.contains(np.exp(1j * 45 * DEG))            # counterclockwise edge
    assert not s.contains(np.exp(-1j * 45 * DEG))
    assert s.contains(1.0) and not s.contains(3.0) and not s.contains(0.0)
    with pytest.raises(ValueError):
        Sector(0.0, 0.0)


def test_sector_intersection():
    a = Sector(0.0, 70 * DEG)
    assert a.intersects(Sector(60 * DEG, 70 * DEG))
    assert not a.intersects(Sector(120 * DEG, 70 * DEG))


def test_roots_first_axis(inst_a):
    r = pm_roots(inst_a, 1, 0.0)
    assert np.allclose(sorted(r.real), [-1, 1]) and np.allclose(r.imag, 0, atol=1e-15)


def test_roots_second_axis(inst_a):
    # Q2(0) k2 = 9 = RD2 k2^2 tau^3, so the roots are the cube roots of unity
    r = pm_roots(inst_a, 2, 0.0)
    assert np.allclose(np.abs(r), 1.0, rtol=1e-15)
    assert np.allclose(sorted(np.degrees(np.angle(r))), [-120, 0, 120])


def test_root_modulus_formula_on_grid(inst_a, grid129):
    for j, (Q, k) in enumerate(((inst_a.Q1, 2), (inst_a.Q2, 3)), start=1):
        q = root_table(inst_a, j, grid129)
        assert q.shape == (129, k)
        mod = np.abs(Q(1j * grid129.nodes) / k) ** (1 / k)
        assert np.allclose(np.abs(q), mod[:, None], rtol=1e-12, atol=0)
        # each is a root of the binomial
        P = Q(1j * grid129.nodes)[:, None] * k - k ** 2 * q ** k
        assert np.max(np.abs(P)) < 1e-11 * np.max(np.abs(Q(1j * grid129.nodes)))


def test_vanishing_tail_has_no_roots(inst_a):
    with pytest.raises(ValueError, match="degenerate: no roots"):
        pm_roots(inst_a.with_(RD1=PolySpec((0.0, 1.0))), 1, 0.0)


def test_direction_report_examples(inst_a, grid129):
    good = direction_report(inst_a, 1, math.pi / 2, 0.5, grid129)
    assert good.passed and good.M1 > 0.3 and good.M2 > 0 and good.C_P > 0
    on_root = direction_report(inst_a, 1, 0.0, 0.5, grid129)
    assert not on_root.passed and on_root.M1 < 1e-12
    wide = direction_report(inst_a, 1, math.pi / 2, 2.0, grid129)
    assert not wide.passed


def test_direction_report_monotone_in_rho(inst_a, grid129):
    prev = None
    for rho in (0.9, 0.7, 0.5, 0.3, 0.1):
        rep = direction_report(inst_a, 2, math.pi / 3, rho, grid129)
        if prev is not None:
            assert rep.M1 >= prev.M1 - 1e-15
            assert rep.M2 >= prev.M2 - 1e-15
            assert rep.C_P >= prev.C_P - 1e-15
        prev = rep


def test_generated_covering_layout(cov23):
    assert len(cov23.cells) == 6
    dirs = sorted(np.degrees([c.sector.direction for c in cov23.cells]) % 360)
    assert np.allclose(np.diff(dirs), 60.0)
    assert all(c.sector.opening == pytest.approx(70 * DEG) for c in cov23.cells)
    assert sorted(c.label for c in cov23.cells) == [(p1, p2) for p1 in range(2) for p2 in range(3)]
    assert all(c.theta1 > math.pi / 2 and c.theta2 > math.pi / 3 for c in cov23.cells)
    chk = covering_check(cov23)
    assert chk.passed, chk.details
    assert (chk.min_count, chk.max_count) == (1, 2)


def test_adjacent_sectors_meet_and_others_do_not(cov23, cov33):
    for cov in (cov23, cov33):
        cells = sorted(cov.cells, key=lambda c: c.p)
        n = len(cells)
        for i in range(n):
            for j in range(i + 1, n):
                adjacent = (j - i) in (1, n - 1)
                assert cells[i].sector.intersects(cells[j].sector) == adjacent


def test_opening_must_exceed_pi_over_k2(inst_a):
    with pytest.raises(CoveringError, match="pi/k2"):
        build_good_covering(inst_a, 2, 3, 0.2, 50 * DEG)


def test_check_flags_triple_and_gap(cov23):
    c0 = cov23.cells[0]
    stacked = replace(cov23, cells=[c0, replace(c0, p=1), replace(c0, p=2)] + cov23.cells[1:])
    chk = covering_check(stacked)
    assert not chk.triple_ok and not chk.passed
    narrow = [replace(c, sector=replace(c.sector, opening=55 * DEG)) for c in cov23.cells]
    chk = covering_check(replace(cov23, cells=narrow))
    assert not chk.coverage_ok and not chk.opening_ok


def test_covering_file_round_trip(cov23):
    back = GoodCovering.from_dict(cov23.to_dict())
    assert back == cov23
