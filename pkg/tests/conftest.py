import pytest

from gevreysum.instance import instance_a, instance_a0
from gevreysum.mode_space import default_grid

_ACCEPTANCE = {}


@pytest.fixture
def record():
    """record(cid, title, ok, detail) stores one acceptance line for the terminal summary."""
    def _record(cid, title, ok, detail=""):
        prev = _ACCEPTANCE.get(cid)
        ok = bool(ok) and (prev is None or prev[1])
        detail = detail if prev is None or not detail else f"{prev[2]}; {detail}"
        _ACCEPTANCE[cid] = (title, ok, detail)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[cid]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {cid:>2}. {title}" + (f"  ({detail})" if detail else ""))


@pytest.fixture(scope="session")
def inst_a():
    return instance_a()


@pytest.fixture(scope="session")
def inst_a0():
    return instance_a0()


@pytest.fixture(scope="session")
def grid129():
    return default_grid(1.0, 2.0, n_points=129)


@pytest.fixture(scope="session")
def grid33():
    return default_grid(1.0, 2.0, n_points=33)


@pytest.fixture(scope="session")
def cov23(inst_a):
    import math
    from gevreysum.geometry import build_good_covering
    return build_good_covering(inst_a, 2, 3, inst_a.space.eps0, math.radians(70))


@pytest.fixture(scope="session")
def cov33(inst_a):
    import math
    from gevreysum.geometry import build_good_covering
    return build_good_covering(inst_a, 3, 3, inst_a.space.eps0, math.radians(70))
