import json
import math
import subprocess
import sys

import numpy as np
import pytest

from gevreysum.cli import main
from gevreysum.instance import PolySpec, instance_a, instance_a0, save_instance

SMALL = ["--grid-points", "33"]


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    save_instance(instance_a(), d / "a.json")
    save_instance(instance_a0(), d / "a0.json")
    save_instance(instance_a(Q1=PolySpec((1.0, 0.0, 1.0))), d / "bad.json")
    return d


@pytest.fixture(scope="module")
def cov_file(files):
    out = files / "cov.json"
    assert main(["covering", "--instance", str(files / "a.json"), "--s1", "2", "--s2", "3",
                 "--opening", "70deg", "--out", str(out)]) == 0
    return out


def test_validate_exit_codes(files, capsys):
    assert main(["validate", "--instance", str(files / "a.json")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["passed"] is True
    assert main(["validate", "--instance", str(files / "bad.json")]) == 2
    rep = json.loads(capsys.readouterr().out)
    assert "Q1_nonvanishing" in [c["name"] for c in rep["conditions"] if not c["passed"]]


def test_solve_is_byte_deterministic(files):
    args = ["solve", "--instance", str(files / "a.json"), "--eps", "0.1,0.02", "--order", "4,4"] + SMALL
    assert main(args + ["--out", str(files / "s1.csv")]) == 0
    assert main(args + ["--out", str(files / "s2.csv")]) == 0
    b1, b2 = (files / "s1.csv").read_bytes(), (files / "s2.csv").read_bytes()
    assert b1 == b2
    line = b1.decode().splitlines()[1].split(",")
    assert line[0:2] == ["1", "1"] and len(line[2].replace("-", "").replace(".", "")) >= 16


def test_borel_table_has_order_header(files):
    out = files / "b.csv"
    assert main(["borel", "--instance", str(files / "a0.json"), "--eps", "0.1", "--order", "3,3",
                 "--out", str(out)] + SMALL) == 0
    assert out.read_text().splitlines()[:2] == ["# k1=2,k2=3", "n1,n2,m,re,im"]


def test_fixedpoint_against_recursion(files, capsys):
    base = ["fixedpoint", "--instance", str(files / "a0.json"), "--eps", "0.05,0.01",
            "--order", "6,6", "--check-against", "recursion"] + SMALL
    assert main(base) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["match"] and rep["relative_error"] < 1e-12
    assert main(base + ["--tol", "-1"]) == 3


def test_covering_and_classify(cov_file, capsys):
    obj = json.loads(cov_file.read_text())
    assert obj["check"]["passed"] and len(obj["cells"]) == 6
    assert main(["classify", "--cov", str(cov_file)]) == 0
    part = json.loads(capsys.readouterr().out)
    assert [len(part[k]) for k in ("U_0", "U_k1", "U_k2")] == [9, 2, 4]
    assert ["0,0", "0,1"] in part["U_k2"]


def test_sum_inside_and_outside_the_certified_domain(files, cov_file, capsys):
    cell = next(c for c in json.loads(cov_file.read_text())["cells"] if c["label"] == [0, 0])
    e_in = 0.045 * np.exp(1j * cell["sector"]["direction"])
    e_out = 0.19 * np.exp(1j * cell["sector"]["direction"])
    base = ["sum", "--instance", str(files / "a0.json"), "--cov", str(cov_file), "--cell", "0,0",
            "--t1", "0.9,0", "--t2", "0.8,0.05", "--z", "0.3,0.2", "--order", "6,6"] + SMALL
    assert main(base + ["--eps", f"{e_in.real},{e_in.imag}"]) == 0
    u = json.loads(capsys.readouterr().out)["u"]
    assert all(math.isfinite(v) for v in u)
    assert main(base + ["--eps", f"{e_out.real},{e_out.imag}"]) == 3
    assert "outside certified domain" in capsys.readouterr().err


def test_fit_commands(tmp_path, capsys):
    n = np.arange(30)
    from scipy.special import gamma
    p = tmp_path / "norms.csv"
    p.write_text("n,a\n" + "".join(f"{i},{float(gamma(1 + i / 3))!r}\n" for i in n))
    assert main(["fit-gevrey", "--csv", str(p)]) == 0
    assert json.loads(capsys.readouterr().out)["k_est"] == pytest.approx(3.0, rel=0.1)
    x = np.geomspace(0.2, 2.0, 10)
    p = tmp_path / "diffs.csv"
    p.write_text("eps,diff\n" + "".join(f"{float(a)!r},{float(3 * np.exp(-2 / a ** 2))!r}\n" for a in x))
    assert main(["fit-decay", "--csv", str(p)]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert fit["k_est"] == pytest.approx(2.0, rel=0.05)
    p.write_text("eps,diff\nx,y\n0.1,0.2\n")
    assert main(["fit-decay", "--csv", str(p)]) == 2


@pytest.mark.parametrize("argv", [
    ["bogus"],
    [],
    ["--precision", "extended", "classify", "--cov", "x.json"],
    ["--threads", "0", "classify", "--cov", "x.json"],
    ["solve", "--instance", "a.json", "--eps", "abc", "--out", "x.csv"],
])
def test_usage_errors_exit_64(argv):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 64


def test_thread_env_fallback(cov_file, monkeypatch):
    monkeypatch.setenv("GEVREY_THREADS", "many")
    assert main(["classify", "--cov", str(cov_file)]) == 64
    monkeypatch.setenv("GEVREY_THREADS", "2")
    assert main(["classify", "--cov", str(cov_file)]) == 0


def test_module_entry_point(cov_file):
    r = subprocess.run([sys.executable, "-m", "gevreysum", "classify", "--cov", str(cov_file)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "U_k2" in r.stdout
