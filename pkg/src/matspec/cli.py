"""Command-line front end: ``matspec {forward, inverse, check, roundtrip}``.

Exit codes: 0 success, 1 failed check or input error, 2 a Weyl-matrix pole is
not simple, 3 eigenvalue count mismatch, 4 singular main equation.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io_formats
from .conditions import run_checks
from .config import Tolerances
from .errors import AssumptionOneViolated, CountMismatch, MainEquationSingular, MatSpecError
from .forward import compute_omega, diagonalize_omega, forward_spectral_data
from .inverse import OmegaTailGrowth, TailTooLarge, reconstruct

EXIT_OK, EXIT_FAIL, EXIT_ASSUMPTION, EXIT_COUNT, EXIT_SINGULAR = 0, 1, 2, 3, 4


def _split_list(text, kind=str):
    return [kind(t) for t in str(text).split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="matspec", description="Forward and inverse spectral problems for matrix Sturm-Liouville operators.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", type=Path, help="output file")
        p.add_argument("--workers", type=int, default=1, help="worker threads")
        p.add_argument("--tol-override", action="append", default=[], metavar="KEY=VAL", help="override a tolerance")
        p.add_argument("--emit-plots", action="store_true", help="write CSV tables next to --out")

    p = sub.add_parser("forward", help="eigenvalues and weight matrices of a problem")
    p.add_argument("--problem", type=Path, required=True)
    p.add_argument("--nmax", type=int, default=10)
    common(p)

    p = sub.add_parser("inverse", help="reconstruct Q, h, H from spectral data")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--ntrunc", type=int, default=None, help="bands kept in the main equation (default n_max)")
    p.add_argument("--grid", type=int, default=257, help="reconstruction grid size")
    p.add_argument("--derivative", choices=("fd", "termwise"), default="fd")
    p.add_argument("--omega-policy", choices=("warn", "fail", "ignore"), default="warn")
    common(p)

    p = sub.add_parser("check", help="check conditions (A), (R), (S), (C) of spectral data")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--conditions", default="A,R,S,C")
    p.add_argument("--problem", type=Path, help="problem file, enables the structural check")
    p.add_argument("--nbands", type=int, default=None, help="bands used by the (C) check")
    common(p)

    p = sub.add_parser("roundtrip", help="forward then inverse, compared with the input")
    p.add_argument("--problem", type=Path, required=True)
    p.add_argument("--nmax", type=int, default=40)
    p.add_argument("--ntrunc", type=int, default=None)
    p.add_argument("--sweep", default=None, help="comma-separated N_trunc values")
    p.add_argument("--derivative", choices=("fd", "termwise"), default="fd")
    common(p)
    return parser


def _tolerances(args) -> Tolerances:
    return Tolerances.from_env().with_overrides(args.tol_override)


def _sibling(out: Path | None, suffix: str, default_stem: str) -> Path:
    base = out if out is not None else Path(default_stem)
    return base.with_name(base.stem + suffix)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _prepare_problem(problem, err):
    om = compute_omega(problem)
    if om.is_diagonal:
        return problem, None
    U, conj = diagonalize_omega(problem)
    print(
        f"note: omega is not diagonal (off-diagonal {om.offdiag:.2e}); working in the frame where it is",
        file=err,
    )
    return conj, U


def cmd_forward(args, out=sys.stdout, err=sys.stderr) -> int:
    tol = _tolerances(args)
    problem = io_formats.read_problem(args.problem)
    problem, U = _prepare_problem(problem, err)
    try:
        data = forward_spectral_data(problem, args.nmax, tol, workers=args.workers)
    except AssumptionOneViolated as exc:
        print(f"error: {exc}", file=err)
        return EXIT_ASSUMPTION
    except CountMismatch as exc:
        print(f"error: {exc} (band {exc.band})", file=err)
        return EXIT_COUNT
    report = run_checks(data, ("A", "R", "S", "C", "structural"), problem=problem, tolerances=tol)
    print(report.table(), file=out)
    if args.out is not None:
        io_formats.write_spectral(data, args.out)
        rep = {"conditions": report.to_dict()}
        if U is not None:
            rep["frame"] = [[[float(z.real), float(z.imag)] for z in row] for row in U]
        _sibling(args.out, ".report.json", "forward").write_text(json.dumps(rep, indent=1) + "\n", encoding="utf-8")
    if args.emit_plots:
        rows = []
        w = data.omega_diag
        for n in range(data.n_max + 1):
            for q in range(data.m):
                rho = data.rho[n, q]
                res = n * (rho - n - w[q] / (np.pi * n)) if n > 0 else 0j
                rows.append((n, q + 1, data.lam[n, q].real, data.lam[n, q].imag, abs(res)))
        _write_csv(
            _sibling(args.out, "_rho_residuals.csv", "forward"),
            ("n", "q", "lambda_re", "lambda_im", "rho_residual"),
            rows,
        )
    return EXIT_OK


def _run_inverse(data, N, grid, tol, args, err):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = reconstruct(
            data,
            N,
            grid=grid,
            tolerances=tol,
            derivative=getattr(args, "derivative", "fd"),
            workers=args.workers,
            omega_policy=getattr(args, "omega_policy", "warn"),
        )
    for w in caught:
        if issubclass(w.category, (TailTooLarge, OmegaTailGrowth)):
            print(f"warning: {w.message}", file=err)
    return result


def cmd_inverse(args, out=sys.stdout, err=sys.stderr) -> int:
    tol = _tolerances(args)
    data = io_formats.read_spectral(args.data)
    N = data.n_max if args.ntrunc is None else args.ntrunc
    if not 2 <= N <= data.n_max:
        print(f"error: need 2 <= ntrunc <= n_max={data.n_max}", file=err)
        return EXIT_FAIL
    if args.grid < 65:
        print("error: --grid must be at least 65", file=err)
        return EXIT_FAIL
    grid = np.linspace(0, np.pi, args.grid)
    pre = run_checks(data.truncated(N), ("A", "R"), tolerances=tol)
    for name, r in pre.results.items():
        if r.verdict == "fail":
            print(f"warning: condition ({name}) fails on the input data; the reconstruction is not trustworthy", file=err)
    try:
        result = _run_inverse(data, N, grid, tol, args, err)
    except MainEquationSingular as exc:
        print(f"error: {exc}", file=err)
        return EXIT_SINGULAR
    d = result.diagnostics
    print(
        f"N_trunc={N}  Omega={result.Omega:.6e}  tail={result.tail:.3e} ({result.tail_rel:.3e} of max eps0)  "
        f"max residual={d['max_residual']:.2e}  max cond={d['max_cond']:.2e}",
        file=out,
    )
    print(f"h_rec={np.array2string(result.h_rec, precision=6)}", file=out)
    print(f"H_rec={np.array2string(result.H_rec, precision=6)}", file=out)
    if args.out is not None:
        io_formats.write_result(result, args.out, {"input_conditions": {k: r.verdict for k, r in pre.results.items()}})
    if args.emit_plots:
        _write_csv(
            _sibling(args.out, "_xi.csv", "inverse"), ("n", "xi"), [(n, v) for n, v in enumerate(result.xi)]
        )
        m = result.m
        rows = [
            [x] + [v for z in result.Q_rec[k].ravel() for v in (z.real, z.imag)] for k, x in enumerate(result.grid)
        ]
        header = ["x"] + [f"Q{i + 1}{j + 1}_{p}" for i in range(m) for j in range(m) for p in ("re", "im")]
        _write_csv(_sibling(args.out, "_Q_rec.csv", "inverse"), header, rows)
    return EXIT_OK


def cmd_check(args, out=sys.stdout, err=sys.stderr) -> int:
    tol = _tolerances(args)
    data = io_formats.read_spectral(args.data)
    conditions = _split_list(args.conditions)
    problem = io_formats.read_problem(args.problem) if args.problem else None
    if problem is not None:
        problem, _ = _prepare_problem(problem, err)
    report = run_checks(data, conditions, problem=problem, tolerances=tol, n_bands=args.nbands)
    print(report.table(), file=out)
    if args.out is not None:
        args.out.write_text(json.dumps(report.to_dict(), indent=1) + "\n", encoding="utf-8")
    return EXIT_OK if report.passed else EXIT_FAIL


def _l2(f, grid):
    return float(np.sqrt(np.trapezoid(np.linalg.norm(f, axis=(-2, -1)) ** 2, grid)))


def cmd_roundtrip(args, out=sys.stdout, err=sys.stderr) -> int:
    tol = _tolerances(args)
    original = io_formats.read_problem(args.problem)
    problem, U = _prepare_problem(original, err)
    sweep = _split_list(args.sweep, int) if args.sweep else [args.ntrunc or args.nmax]
    n_max = max(args.nmax, max(sweep))
    if min(sweep) < 2:
        print("error: N_trunc must be at least 2", file=err)
        return EXIT_FAIL
    try:
        data = forward_spectral_data(problem, n_max, tol, workers=args.workers)
    except AssumptionOneViolated as exc:
        print(f"error: {exc}", file=err)
        return EXIT_ASSUMPTION
    except CountMismatch as exc:
        print(f"error: {exc}", file=err)
        return EXIT_COUNT
    grid = original.grid
    Uinv = np.linalg.inv(U) if U is not None else None
    rows = []
    print(f"{'N_trunc':>8} {'L2 error':>12} {'sup error':>12} {'|h_rec-h|':>12} {'|H_rec-H|':>12} {'tail':>10}", file=out)
    last = None
    for N in sweep:
        try:
            res = _run_inverse(data, N, grid, tol, args, err)
        except MainEquationSingular as exc:
            print(f"error: {exc}", file=err)
            return EXIT_SINGULAR
        Q, h, H = res.Q_rec, res.h_rec, res.H_rec
        if U is not None:
            Q, h, H = U @ Q @ Uinv, U @ h @ Uinv, U @ H @ Uinv
        dQ = Q - original.Q
        row = (
            N,
            _l2(dQ, grid),
            float(np.abs(dQ).max()),
            float(np.abs(h - original.h).max()),
            float(np.abs(H - original.H).max()),
            res.tail,
        )
        rows.append(row)
        print(f"{row[0]:>8d} {row[1]:>12.4e} {row[2]:>12.4e} {row[3]:>12.4e} {row[4]:>12.4e} {row[5]:>10.2e}", file=out)
        last = (res, dQ)
    if args.out is not None:
        rep = {
            "sweep": [
                {"N_trunc": r[0], "L2": r[1], "sup": r[2], "h_err": r[3], "H_err": r[4], "tail": r[5]} for r in rows
            ]
        }
        args.out.write_text(json.dumps(rep, indent=1) + "\n", encoding="utf-8")
    if args.emit_plots:
        _write_csv(
            _sibling(args.out, "_sweep.csv", "roundtrip"),
            ("N_trunc", "L2_error", "sup_error", "h_error", "H_error", "tail"),
            rows,
        )
        res, dQ = last
        _write_csv(
            _sibling(args.out, "_error_x.csv", "roundtrip"),
            ("x", "error"),
            [(x, float(np.linalg.norm(dQ[k]))) for k, x in enumerate(grid)],
        )
    return EXIT_OK


COMMANDS = {"forward": cmd_forward, "inverse": cmd_inverse, "check": cmd_check, "roundtrip": cmd_roundtrip}


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be positive", file=err)
        return EXIT_FAIL
    try:
        return COMMANDS[args.command](args, out, err)
    except (MatSpecError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
