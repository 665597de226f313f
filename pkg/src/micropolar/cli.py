"""Command-line entry point.

Exit codes: 0 success, 2 non-convergence (artifacts still written), 1
configuration or I/O error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import sys
import warnings
from pathlib import Path

from .config import RunConfig, parse_config, parse_config_text
from .errors import DivergenceError, MicropolarError
from .fieldio import write_field, write_text_atomic

EXIT_OK, EXIT_ERROR, EXIT_NONCONVERGED = 0, 1, 2

DEFAULT_CONFIG = """\
[grid]
nx = 33

[fluid]
mu = 1.0
mu_r = 0.1
c_a = 0.5
c_d = 0.5

[bc]
mms = duct
"""


def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI run configuration")
    common.add_argument("--out", type=Path, help="output directory (overrides [output] directory)")
    common.add_argument("--grid", type=int, metavar="N", help="nodes per side (finest grid for verify-mms)")
    common.add_argument("--tol", type=float, help="convergence tolerance on |du|_H1")
    common.add_argument("--max-iter", type=int, help="iteration cap per homotopy stage")
    common.add_argument("--lambda-steps", type=int, metavar="K", help="uniform homotopy schedule with K stages")
    common.add_argument("--emit", choices=("csv", "vtk", "both"), help="field output formats")
    common.add_argument("--seed", type=int, help="seed of the randomized diagnostics")
    common.add_argument("--quiet", action="store_true", help="print nothing on success")
    common.add_argument("--plots", action="store_true", help="also render PNG figures (matplotlib)")
    parser = argparse.ArgumentParser(prog="micropolar",
                                     description="Steady 2D nonhomogeneous micropolar flow solver.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve the configured problem")
    sub.add_parser("verify-mms", parents=[common], help="manufactured-solution convergence study")
    sub.add_parser("reduction", parents=[common], help="model-reduction checks")
    sub.add_parser("check-config", parents=[common], help="validate a configuration")
    return parser


def _load(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else parse_config_text(DEFAULT_CONFIG)
    if args.grid is not None:
        cfg.override("grid", "nx", args.grid)
        cfg.override("grid", "ny", "")
    if args.tol is not None:
        cfg.override("solver", "tol", args.tol)
    if args.max_iter is not None:
        cfg.override("solver", "max_iter", args.max_iter)
    if args.lambda_steps is not None:
        cfg.override("solver", "lambda_steps", args.lambda_steps)
        cfg.override("solver", "lambda_schedule", "")
    if args.emit is not None:
        cfg.override("output", "formats", args.emit)
    if args.seed is not None:
        cfg.override("solver", "seed", args.seed)
    if args.plots:
        cfg.override("output", "plots", "true")
    if args.out is not None:
        cfg.override("output", "directory", args.out)
    # re-validate after overrides
    cfg.grid, cfg.params, cfg.solver_options(), cfg.formats
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    return Path(cfg.get("output", "directory"))


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def _write_fields(state, cfg: RunConfig, out: Path) -> list:
    fields = {"v": state.v, "w": state.w_total, "psi": state.psi, "rho": state.rho}
    if state.p is not None:
        fields["p"] = state.p
    written = []
    for fmt in cfg.formats:
        for name, fld in fields.items():
            written.append(write_field(fld, fmt, out / f"{name}.{fmt}", name))
    if cfg.get("output", "plots").lower() == "true":
        from .plotting import render_fields

        written += render_fields(fields, out / "plots")
    return written


def _report_text(body: str) -> str:
    return f"# generated {_timestamp()}\n{body}"


def cmd_solve(args, cfg: RunConfig, out: Path) -> int:
    from .picard import run_fixed_point, solvability_margin

    opts = cfg.solver_options()
    data = cfg.iteration_data()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            state, report = run_fixed_point(data, opts)
        except DivergenceError as exc:
            report = exc.report
            body = report.to_text() if report is not None else f"status = diverged\nmessage = {exc}\n"
            write_text_atomic(out / "report.txt", _report_text(body))
            if report is not None and cfg.get("output", "history").lower() == "true":
                write_text_atomic(out / "history.csv", report.history_csv())
            print(f"diverged: {exc}", file=sys.stderr)
            return EXIT_NONCONVERGED
    report.solvability = solvability_margin(data, cfg.c_user)
    warned = sorted({str(w.message) for w in caught})
    if warned:
        report.extra["warnings"] = "; ".join(warned)
    _write_fields(state, cfg, out)
    write_text_atomic(out / "report.txt", _report_text(report.to_text()))
    if cfg.get("output", "history").lower() == "true":
        write_text_atomic(out / "history.csv", report.history_csv())
    if report.solvability.margin < 0:
        print("warning: solvability margin negative (heuristic constant)", file=sys.stderr)
    if not report.converged:
        print(f"not converged: {report.message}", file=sys.stderr)
        return EXIT_NONCONVERGED
    _say(args, f"converged in {report.iterations} iterations; output in {out}")
    return EXIT_OK


def cmd_verify(args, cfg: RunConfig, out: Path) -> int:
    from .mms import build_mms_case
    from .verify import convergence_study

    finest = args.grid if args.grid is not None else 129
    if (finest - 1) % 4:
        raise MicropolarError("invariant violated: --grid must be 4k+1 for a three-grid study")
    grids = [(finest - 1) // 4 + 1, (finest - 1) // 2 + 1, finest]
    case = build_mms_case(cfg.mms_name or "duct", cfg.params)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        table = convergence_study(case, grids, cfg.solver_options())
    ok, verdict = table.verdict()
    write_text_atomic(out / "convergence.csv", table.to_csv())
    write_text_atomic(out / "verdict.txt", verdict)
    _say(args, table.to_csv() + verdict)
    return EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_reduction(args, cfg: RunConfig, out: Path) -> int:
    from .verify import reduction_tests

    n = args.grid if args.grid is not None else 33
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        results = reduction_tests(n, cfg.solver_options())
    text = "".join(r.line() + "\n" for r in results)
    write_text_atomic(out / "reduction.txt", text)
    _say(args, text.rstrip())
    return EXIT_OK if all(r.passed for r in results) else EXIT_NONCONVERGED


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        out = _out_dir(cfg)
        # the effective configuration is on disk before any solve starts
        write_text_atomic(out / "config_echo.ini", cfg.echo())
        if args.command == "check-config":
            _say(args, f"configuration valid; effective config in {out / 'config_echo.ini'}")
            return EXIT_OK
        handler = {"solve": cmd_solve, "verify-mms": cmd_verify, "reduction": cmd_reduction}[args.command]
        return handler(args, cfg, out)
    except (MicropolarError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
