"""Command-line front end: one subcommand per computational stage."""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np
import scipy.fft

EXIT_OK, EXIT_INVALID, EXIT_CERT, EXIT_USAGE = 0, 2, 3, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _complex(s: str) -> complex:
    parts = s.split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected RE,IM, got {s!r}")


def _pair_int(s: str) -> tuple:
    try:
        a, b = (int(x) for x in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two integers A,B, got {s!r}")
    if a < 0 or b < 0:
        raise argparse.ArgumentTypeError("entries must be non-negative")
    return a, b


def _angle(s: str) -> float:
    t = s.strip().lower()
    try:
        if t.endswith("deg"):
            return math.radians(float(t[:-3]))
        if t.endswith("rad"):
            return float(t[:-3])
        return float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad angle {s!r}; use e.g. 70deg or 1.2rad")


def _odd(s: str) -> int:
    n = int(s)
    if n < 3 or n % 2 == 0:
        raise argparse.ArgumentTypeError("grid size must be odd and >= 3")
    return n


def _emit(obj, out=None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cjson(z: complex) -> list:
    return [float(z.real), float(z.imag)]


def resolve_threads(arg) -> int:
    if arg is not None:
        if arg < 1:
            raise UsageError("--threads must be >= 1")
        return arg
    env = os.environ.get("GEVREY_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"GEVREY_THREADS must be an integer, got {env!r}")
    return 1


# ---------------------------------------------------------------- helpers

def _load(args):
    from .instance import load_instance
    return load_instance(args.instance)


def _grid(inst, args):
    from .mode_space import default_grid
    return default_grid(inst.space.beta, inst.space.mu, n_points=args.grid_points)


def _recursion_table(inst, args):
    from .series import solve_recursion
    grid = _grid(inst, args)
    return solve_recursion(inst, args.eps, *args.order, grid)


# ---------------------------------------------------------------- subcommands

def cmd_validate(args) -> int:
    from .instance import validate_instance
    inst = _load(args)
    rep = validate_instance(inst, _grid(inst, args))
    _emit(rep.to_dict(), args.out)
    return EXIT_OK if rep.passed else EXIT_INVALID


def cmd_solve(args) -> int:
    from .series import write_table_csv
    U = _recursion_table(_load(args), args)
    write_table_csv(U, args.out)
    return EXIT_OK


def cmd_borel(args) -> int:
    from .borel import borel_transform
    from .series import write_table_csv
    inst = _load(args)
    e = inst.exponents
    w = borel_transform(_recursion_table(inst, args), e.k1, e.k2)
    write_table_csv(w, args.out, header=f"# k1={e.k1},k2={e.k2}")
    return EXIT_OK


def cmd_fixedpoint(args) -> int:
    from .borel import borel_transform
    from .fixed_point import picard_solve
    from .series import write_table_csv
    inst = _load(args)
    grid = _grid(inst, args)
    t0 = time.perf_counter()
    res = picard_solve(inst, args.eps, *args.order, grid, n_pairs=args.pairs)
    ratio = res.contraction_estimate
    report = {"iterations": res.iterations,
              "contraction_estimate": ratio if math.isfinite(ratio) else None,
              "seconds": round(time.perf_counter() - t0, 3)}
    code = EXIT_OK
    if args.check_against == "recursion":
        from .series import solve_recursion
        e = inst.exponents
        ref = borel_transform(solve_recursion(inst, args.eps, *args.order, grid), e.k1, e.k2)
        scale = max(float(np.max(np.abs(ref.values))), 1e-300)
        err = float(np.max(np.abs(res.omega.values - ref.values))) / scale
        report.update({"oracle": "recursion", "relative_error": err, "tolerance": args.tol,
                       "match": err <= args.tol})
        if err > args.tol:
            code = EXIT_CERT
    if args.out:
        e = inst.exponents
        write_table_csv(res.omega, args.out, header=f"# k1={e.k1},k2={e.k2}")
    _emit(report, args.report)
    return code


def cmd_covering(args) -> int:
    from .geometry import build_good_covering, covering_check
    inst = _load(args)
    eps0 = args.eps0 if args.eps0 is not None else inst.space.eps0
    cov = build_good_covering(inst, args.s1, args.s2, eps0, args.opening, grid=_grid(inst, args),
                              delta1=args.delta1)
    chk = covering_check(cov)
    obj = cov.to_dict()
    obj["check"] = chk.to_dict()
    _emit(obj, args.out)
    return EXIT_OK if chk.passed else EXIT_CERT


def _read_cov(path):
    from .geometry import GoodCovering
    with open(path) as fh:
        return GoodCovering.from_dict(json.load(fh))


def cmd_sum(args) -> int:
    from .borel import borel_transform
    from .summation import QuadratureSpec, evaluate_u
    inst = _load(args)
    cov = _read_cov(args.cov)
    cell = cov.cell(*args.cell)
    e = inst.exponents
    w = borel_transform(_recursion_table(inst, args), e.k1, e.k2)
    q = QuadratureSpec(args.r_cut if args.r_cut is not None else inst.space.rho,
                       args.nodes, cov.delta1, args.tol)
    val = evaluate_u(inst, w, cell, args.t1, args.t2, args.z, args.eps, q, cov.T1, cov.T2)
    _emit({"cell": list(args.cell), "t1": _cjson(args.t1), "t2": _cjson(args.t2),
           "z": _cjson(args.z), "eps": _cjson(args.eps), "u": _cjson(val)}, args.out)
    return EXIT_OK


def cmd_classify(args) -> int:
    from .summation import classify_pairs
    part = classify_pairs(_read_cov(args.cov))
    lab = lambda p: f"{p[0]},{p[1]}"
    _emit({k: [[lab(a), lab(b)] for a, b in v] for k, v in part.items()}, args.out)
    return EXIT_OK


def _read_columns(path, ncols):
    rows, header_seen = [], False
    with open(path, newline="") as fh:
        for r in csv.reader(fh):
            if not r or r[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(x) for x in r[:ncols]])
            except ValueError:
                if rows or header_seen:
                    raise ValueError(f"non-numeric row in {path}: {r}") from None
                header_seen = True
    return np.array(rows)


def _fit_json(fit) -> dict:
    num = lambda x: x if math.isfinite(x) else ("inf" if x > 0 else "-inf")
    return {"k_est": num(fit.k_est), "M": fit.M, "K": fit.K, "residual": fit.residual, "flag": fit.flag}


def cmd_fit_gevrey(args) -> int:
    from .summation import gevrey_fit
    data = _read_columns(args.csv, 2)
    if data.ndim == 2 and data.shape[1] == 2:
        fit = gevrey_fit(data[:, 1], n=data[:, 0])
    else:
        fit = gevrey_fit(data.ravel())
    _emit(_fit_json(fit), args.out)
    return EXIT_OK


def cmd_fit_decay(args) -> int:
    from .summation import decay_fit
    fit = decay_fit(_read_columns(args.csv, 2))
    _emit(_fit_json(fit), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gevreysum", description=__doc__)
    p.add_argument("--threads", type=int, default=None, help="worker cap (fallback: GEVREY_THREADS)")
    p.add_argument("--precision", choices=["double", "extended"], default="double")
    sub = p.add_subparsers(dest="cmd", parser_class=_Parser)

    def with_instance(sp, eps=True, order=True):
        sp.add_argument("--instance", required=True)
        sp.add_argument("--grid-points", type=_odd, default=129)
        if eps:
            sp.add_argument("--eps", type=_complex, required=True)
        if order:
            sp.add_argument("--order", type=_pair_int, default=(10, 10))

    sp = sub.add_parser("validate")
    with_instance(sp, eps=False, order=False)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_validate)

    for name, fn in (("solve", cmd_solve), ("borel", cmd_borel)):
        sp = sub.add_parser(name)
        with_instance(sp)
        sp.add_argument("--out", required=True)
        sp.set_defaults(fn=fn)

    sp = sub.add_parser("fixedpoint")
    with_instance(sp)
    sp.add_argument("--check-against", choices=["recursion"])
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--pairs", type=int, default=0, help="random pairs for the contraction estimate")
    sp.add_argument("--out", help="BorelTable CSV")
    sp.add_argument("--report", help="JSON report path (default stdout)")
    sp.set_defaults(fn=cmd_fixedpoint)

    sp = sub.add_parser("covering")
    with_instance(sp, eps=False, order=False)
    sp.add_argument("--s1", type=int, required=True)
    sp.add_argument("--s2", type=int, required=True)
    sp.add_argument("--opening", type=_angle, required=True)
    sp.add_argument("--eps0", type=float)
    sp.add_argument("--delta1", type=float, default=0.1)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_covering)

    sp = sub.add_parser("sum")
    with_instance(sp)
    sp.add_argument("--cov", required=True)
    sp.add_argument("--cell", type=_pair_int, required=True)
    for name in ("--t1", "--t2", "--z"):
        sp.add_argument(name, type=_complex, required=True)
    sp.add_argument("--r-cut", type=float)
    sp.add_argument("--nodes", type=int, default=96)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_sum)

    sp = sub.add_parser("classify")
    sp.add_argument("--cov", required=True)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_classify)

    for name, fn in (("fit-gevrey", cmd_fit_gevrey), ("fit-decay", cmd_fit_decay)):
        sp = sub.add_parser(name)
        sp.add_argument("--csv", required=True)
        sp.add_argument("--out")
        sp.set_defaults(fn=fn)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "cmd", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if args.precision != "double":
        sys.stderr.write("error: only double precision is implemented\n")
        return EXIT_USAGE
    from .geometry import CoveringError
    from .series import IllFounded, ResonantIndex
    from .summation import CertificationError, InvalidDirection
    try:
        threads = resolve_threads(args.threads)
        with scipy.fft.set_workers(threads):
            return args.fn(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (CertificationError, InvalidDirection, ResonantIndex) as exc:
        sys.stderr.write(f"certification failure: {exc}\n")
        return EXIT_CERT
    except (CoveringError, IllFounded, ValueError, KeyError, OSError) as exc:
        sys.stderr.write(f"validation failure: {exc}\n")
        return EXIT_INVALID
