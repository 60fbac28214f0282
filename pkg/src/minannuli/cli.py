"""Command-line front end: solve, mesh, verify, sweep.

Exit codes: 0 success, 1 a verification check failed, 2 solver or
quadrature failure, 3 I/O failure, 4 unparseable arguments or input file.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .asymptotics import CHECKS, DEFAULT_TOLERANCES, verify_family
from .periods import QuadratureError
from .solver import SolverError, SolveTarget, solve
from .surface import SurfaceError, export_mesh, sample_mesh
from .wdata import WeierstrassFamily

EXIT_OK, EXIT_CHECK, EXIT_SOLVER, EXIT_IO, EXIT_PARSE = 0, 1, 2, 3, 4

OUT_DIR_ENV = "MINANNULI_OUT_DIR"


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit 2, which is taken
        raise CliError(EXIT_PARSE, f"{self.prog}: {message}")


_PI_RE = re.compile(r"^\s*([-+]?[0-9.eE+-]*)\s*\*?\s*pi\s*$")


def parse_real(text: str) -> float:
    """A float, or a multiple of pi written like ``2pi`` / ``0.5*pi``."""
    s = text.strip().lower()
    m = _PI_RE.match(s)
    try:
        if m:
            k = m.group(1)
            coef = 1.0 if k in ("", "+") else -1.0 if k == "-" else float(k)
            v = coef * math.pi
        else:
            v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a real number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"not finite: {text!r}")
    return v


def parse_real_list(text: str) -> list[float]:
    return [parse_real(t) for t in text.split(",") if t.strip()]


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _meta(config: dict) -> dict:
    return {"tool": "minannuli", "version": __version__, "configHash": config_hash(config)}


def _out_path(args, default_name: str) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUT_DIR_ENV, ".")) / default_name


def _write(path: Path, data: bytes) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}") from None


def _dump(doc: dict) -> bytes:
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode()


def load_family(path: str) -> WeierstrassFamily:
    """Family document, or a solve result with an embedded family."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_PARSE, f"{path}: invalid JSON ({exc})") from None
    try:
        if isinstance(doc, dict) and "family" in doc:
            doc = doc["family"]
        return WeierstrassFamily.from_json(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_PARSE, f"{path}: not a family document ({exc})") from None


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    config = {"command": "solve", "a": args.a, "b": args.b, "branch": args.branch}
    if args.a < 0 or args.b < 0:
        raise CliError(EXIT_PARSE, "a and b must be nonnegative")
    try:
        res = solve(SolveTarget(args.a, args.b), branch=args.branch)
    except (SolverError, QuadratureError) as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        trace = getattr(exc, "trace", None)
        if trace:
            print(json.dumps(trace, default=str)[:4000], file=sys.stderr)
        return EXIT_SOLVER
    doc = res.to_json()
    doc["meta"] = _meta(config)
    path = _out_path(args, f"solve-{config_hash(config)}.json")
    _write(path, _dump(doc))
    f = res.achievedFlux
    print(f"{res.family.variant}: flux=({f[0]:.12g}, {f[1]:.3g}, {f[2]:.12g}) "
          f"periodResidual={res.periodResidual:.3e} -> {path}")
    return EXIT_OK


def cmd_mesh(args) -> int:
    family = load_family(args.family)
    rmin = family.rprime if args.r_min is None else args.r_min
    rmax = 4.0 * rmin if args.r_max is None else args.r_max
    config = {"command": "mesh", "family": family.to_json(), "rMin": rmin, "rMax": rmax,
              "nr": args.nr, "ntheta": args.ntheta, "thetaSpan": args.theta_span,
              "thetaStart": args.theta_start, "format": args.format}
    try:
        grid = sample_mesh(family, rmin, rmax, args.nr, args.ntheta, args.theta_span, args.theta_start)
    except ValueError as exc:
        raise CliError(EXIT_PARSE, str(exc)) from None
    except (SurfaceError, QuadratureError) as exc:
        print(f"mesh failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    meta = _meta(config)
    mesh = export_mesh(grid, args.format, comment=f"minannuli {meta['version']} config {meta['configHash']}")
    path = _out_path(args, f"mesh-{meta['configHash']}.{args.format}")
    _write(path, mesh.data)
    print(f"vertices={mesh.vertices} triangles={mesh.triangles} skipped={mesh.skipped} "
          f"closureDefect={grid.closure_defect:.3e} route={grid.meta.get('route')} -> {path}")
    return EXIT_OK


def _tolerances(args) -> dict:
    tol = {}
    for name in DEFAULT_TOLERANCES:
        v = getattr(args, f"tol_{name}", None)
        if v is not None:
            tol[name] = v
    if tol.get("period", 0.0) > DEFAULT_TOLERANCES["period"]:
        raise CliError(EXIT_PARSE, "--tol-period may not be looser than the solver certificate 1e-9")
    return tol


def cmd_verify(args) -> int:
    family = load_family(args.family)
    checks = list(CHECKS) if args.checks in (None, "all") else [c.strip() for c in args.checks.split(",") if c.strip()]
    bad = [c for c in checks if c not in CHECKS]
    if bad:
        raise CliError(EXIT_PARSE, f"unknown checks {bad}; choose from {','.join(CHECKS)}")
    tol = _tolerances(args)
    target = None
    if args.a is not None or args.b is not None:
        target = (args.a or 0.0, args.b or 0.0)
    config = {"command": "verify", "family": family.to_json(), "checks": sorted(checks),
              "tolerances": tol, "target": target}
    report, outcomes = verify_family(family, checks, tol, target)
    meta = _meta(config)
    doc = report.to_json()
    doc["meta"] = meta
    path = _out_path(args, f"verify-{meta['configHash']}.json")
    _write(path, _dump(doc))
    csv_path = path.with_suffix(".csv")
    _write(csv_path, (f"# minannuli {meta['version']} config {meta['configHash']}\n" + report.to_csv()).encode())
    failed = [o.name for o in outcomes if not o.passed]
    for o in outcomes:
        status = "skip" if o.skipped else ("pass" if o.passed else "FAIL")
        print(f"{status:4s} {o.name}: {o.detail}")
    if failed:
        print(f"failing checks: {','.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


SWEEP_COLUMNS = ["a", "b", "status", "variant", "t", "A_re", "A_im", "B", "rotation", "Rprime",
                 "periodResidual", "flux1", "flux2", "flux3", "error"]


def _sweep_row(ab: tuple[float, float]) -> dict:
    a, b = ab
    t0 = time.perf_counter()
    row = {"a": repr(a), "b": repr(b)}
    try:
        res = solve(SolveTarget(a, b))
        f = res.family
        row.update(status="ok", variant=f.variant, t=repr(f.t), A_re=repr(f.A.real), A_im=repr(f.A.imag),
                   B=repr(f.B), rotation=repr(f.rotation), Rprime=repr(f.rprime),
                   periodResidual=repr(res.periodResidual),
                   flux1=repr(res.achievedFlux[0]), flux2=repr(res.achievedFlux[1]),
                   flux3=repr(res.achievedFlux[2]), error="")
    except Exception as exc:  # recorded per row; the sweep goes on
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    row["wallTime"] = f"{time.perf_counter() - t0:.4f}"
    return row


def cmd_sweep(args) -> int:
    grid = [(a, b) for a in args.a_list for b in args.b_list]
    if any(a < 0 or b < 0 for a, b in grid):
        raise CliError(EXIT_PARSE, "sweep values must be nonnegative")
    config = {"command": "sweep", "a": args.a_list, "b": args.b_list, "timings": args.timings}
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_row, grid))
    else:
        rows = [_sweep_row(ab) for ab in grid]
    cols = SWEEP_COLUMNS + (["wallTime"] if args.timings else [])
    buf = io.StringIO()
    meta = _meta(config)
    buf.write(f"# minannuli {meta['version']} config {meta['configHash']}\n")
    wr = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
    wr.writeheader()
    wr.writerows(rows)
    path = _out_path(args, f"sweep-{meta['configHash']}.csv")
    _write(path, buf.getvalue().encode())
    nfail = sum(r["status"] != "ok" for r in rows)
    print(f"rows={len(rows)} failed={nfail} -> {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="minannuli", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"minannuli {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve the period problem for flux (a, 0, -b)")
    s.add_argument("--a", type=parse_real, required=True)
    s.add_argument("--b", type=parse_real, required=True)
    s.add_argument("--branch", type=int, default=1, help="argument-matching window (1 = first)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    m = sub.add_parser("mesh", help="sample a conformal grid and write OBJ/PLY")
    m.add_argument("--family", required=True)
    m.add_argument("--r-min", type=parse_real)
    m.add_argument("--r-max", type=parse_real)
    m.add_argument("--nr", type=int, default=16)
    m.add_argument("--ntheta", type=int, default=64)
    m.add_argument("--theta-span", type=parse_real, default=2 * math.pi)
    m.add_argument("--theta-start", type=parse_real, default=0.0)
    m.add_argument("--format", choices=("obj", "ply"), default="obj")
    m.add_argument("--out")
    m.set_defaults(func=cmd_mesh)

    v = sub.add_parser("verify", help="run asymptotic checks on a family")
    v.add_argument("--family", required=True)
    v.add_argument("--checks", help=f"comma list from {','.join(CHECKS)} (default all)")
    v.add_argument("--a", type=parse_real, help="expected horizontal flux")
    v.add_argument("--b", type=parse_real, help="expected vertical flux magnitude")
    for name, val in DEFAULT_TOLERANCES.items():
        v.add_argument(f"--tol-{name}", type=float, dest=f"tol_{name}", help=f"default {val:g}")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep", help="solve a grid of targets into a CSV table")
    w.add_argument("--a", type=parse_real_list, dest="a_list", required=True, help="comma list")
    w.add_argument("--b", type=parse_real_list, dest="b_list", required=True, help="comma list")
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--timings", action="store_true", help="add a wall-time column (not byte-stable)")
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
