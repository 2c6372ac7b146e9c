"""Command-line front end.

Subcommands
-----------
find-gaps    run the gap finder on a Matrix Market file
curves       export ``mu, q, upper, lower`` for one or more bound methods
gen-problem  write a test matrix, its recipe and (optionally) its exact gaps

Exit codes: 0 success, 1 I/O error, 2 invalid flags, 3 pipeline failure.
Errors are reported on stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .gapfinder import GapFinderConfig, run_pipeline, write_curves_csv
from .problems import (
    ProblemSpec,
    dirac_comb_eigenvalues,
    exact_gaps,
    gen_dirac_comb,
    gen_perturbed_logspace,
    shift_scale,
    tridiagonal_eigenvalues,
)
from .sparse import MatrixFormatError, SpectralInterval, load_matrix_market, write_matrix_market

EXIT_IO, EXIT_USAGE, EXIT_PIPELINE = 1, 2, 3


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind = code, kind


def _fail(code, kind, message):
    raise CliError(code, kind, message)


class _Parser(argparse.ArgumentParser):
    """Report usage errors through :class:`CliError` instead of exiting."""

    def error(self, message):
        _fail(EXIT_USAGE, "invalid-flags", f"{self.prog}: {message}")


# -- argument parsing -------------------------------------------------------


def _add_pipeline_flags(p: argparse.ArgumentParser):
    p.add_argument("--matrix", required=True, help="Matrix Market file")
    p.add_argument("--delta", type=float, default=0.01, help="failure probability (default 0.01)")
    p.add_argument("--theta", type=float, help="target relative gap width")
    p.add_argument("--iters", type=int, help="fixed number of Lanczos steps (overrides --theta)")
    p.add_argument("--samples", type=int, default=1, help="Gaussian probe vectors (default 1)")
    p.add_argument("--variant", choices=("safe", "robust"), default="safe")
    p.add_argument("--safety-c", type=float, default=2.0, help="consecutive-difference factor c")
    p.add_argument("--depth", type=int, default=3, help="number d of Lanczos steps combined")
    p.add_argument("--grid-count", type=int, default=10000)
    p.add_argument("--grid-scale", choices=("auto", "log", "linear"), default="auto")
    p.add_argument("--grid-range", type=float, nargs=2, metavar=("LO", "HI"),
                   help="mu range (default: the spectral interval)")
    p.add_argument("--interval", type=float, nargs=2, metavar=("LO", "HI"),
                   help="known interval containing the spectrum")
    p.add_argument("--L", type=int, default=1000, help="points for maximizing |g_m|")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-halve-theta", action="store_true",
                   help="size m for theta instead of theta/2")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="specgap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("find-gaps", help="detect spectral gaps")
    _add_pipeline_flags(p)
    p.add_argument("--method", choices=("diff", "posteriori"), default="diff")
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--curves", help="curves CSV path")

    p = sub.add_parser("curves", help="export bound curves as CSV")
    _add_pipeline_flags(p)
    p.add_argument("--method", choices=("diff", "posteriori"), action="append",
                   help="repeat for one CSV per method (default diff)")
    p.add_argument("--out", required=True,
                   help="CSV path; with several methods the method name is appended to the stem")

    p = sub.add_parser("gen-problem", help="generate a test matrix")
    p.add_argument("--kind", choices=("perturbed-logspace", "dirac-comb"), required=True)
    p.add_argument("--n", type=int, help="dimension (perturbed-logspace)")
    p.add_argument("--theta", type=float, help="relative gap width (perturbed-logspace)")
    p.add_argument("--n-below", type=int, help="eigenvalues below the gap (default 2n/3)")
    p.add_argument("--no-perturb", action="store_true", help="drop the random tridiagonal part")
    p.add_argument("--N", type=int, help="number of unit cells (dirac-comb)")
    p.add_argument("--k", type=int, help="grid points per unit (dirac-comb)")
    p.add_argument("--map-to", type=float, nargs=2, metavar=("LO", "HI"),
                   help="shift and scale the exact spectrum onto [LO, HI]")
    p.add_argument("--seed", type=int)
    p.add_argument("--oracle", action="store_true", help="also write exact gaps")
    p.add_argument("--oracle-theta-min", type=float, default=1e-3,
                   help="smallest relative width listed in the oracle file")
    p.add_argument("--out", required=True, help="Matrix Market output path")
    return parser


# -- helpers ----------------------------------------------------------------


def _config(args, method: str) -> GapFinderConfig:
    if args.theta is None and args.iters is None:
        _fail(EXIT_USAGE, "invalid-flags", "give --theta or --iters")
    try:
        return GapFinderConfig(
            delta=args.delta, theta=args.theta, grid_count=args.grid_count,
            grid_range=args.grid_range, grid_scale=args.grid_scale, m_override=args.iters,
            samples=args.samples, method=method, variant=args.variant, c=args.safety_c,
            d=args.depth, L=args.L, halve_theta=not args.no_halve_theta, seed=args.seed,
            interval=args.interval,
        )
    except ValueError as exc:
        _fail(EXIT_USAGE, "invalid-flags", str(exc))


def _load(path):
    try:
        return load_matrix_market(path)
    except (OSError, MatrixFormatError) as exc:
        _fail(EXIT_IO, "io", str(exc))


def _run(A, config):
    try:
        return run_pipeline(A, config)
    except ValueError as exc:
        _fail(EXIT_USAGE, "invalid-flags", str(exc))
    except (ArithmeticError, RuntimeError) as exc:
        _fail(EXIT_PIPELINE, "pipeline", f"{type(exc).__name__}: {exc}")


def _write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        _fail(EXIT_IO, "io", str(exc))


def _write_csv(curves, path):
    try:
        write_curves_csv(curves, path)
    except OSError as exc:
        _fail(EXIT_IO, "io", str(exc))


def format_table(report, elapsed: float) -> str:
    lines = [f"{'est. gap':>30}  {'est. nu(mu)':>11}  {'rel. width':>10}  {'certified':>9}  {'constant':>8}"]
    for g in report.gaps:
        span = f"[{g.a:.6g}, {g.b:.6g}]"
        width = "-" if g.relative_width is None else f"{g.relative_width:.4f}"
        lines.append(f"{span:>30}  {g.eigcount_below:>11d}  {width:>10}  "
                     f"{'yes' if g.certified else 'no':>9}  {'yes' if g.constancy_ok else 'no':>8}")
    if not report.gaps:
        lines.append("no gaps found")
    si = report.spectral_interval
    lines.append(f"m = {report.m}, epsilon = {report.epsilon:.4g}, "
                 f"interval = [{si.lo:.6g}, {si.hi:.6g}], time = {elapsed:.2f} s")
    lines.extend(f"note: {n}" for n in report.notes)
    return "\n".join(lines)


# -- subcommands ------------------------------------------------------------


def cmd_find_gaps(args) -> int:
    config = _config(args, args.method)
    A = _load(args.matrix)
    t0 = time.perf_counter()
    report = _run(A, config)
    elapsed = time.perf_counter() - t0
    if args.curves and report.curves is not None:
        _write_csv(report.curves, args.curves)
    if args.out:
        _write_text(args.out, report.to_json(curves_ref=args.curves))
    print(format_table(report, elapsed))
    return 0


def curves_paths(out, methods):
    out = Path(out)
    if len(methods) == 1:
        return {methods[0]: out}
    return {m: out.with_name(f"{out.stem}.{m}{out.suffix}") for m in methods}


def cmd_curves(args) -> int:
    methods = list(dict.fromkeys(args.method or ["diff"]))
    configs = {m: _config(args, m) for m in methods}
    A = _load(args.matrix)
    for method, path in curves_paths(args.out, methods).items():
        report = _run(A, configs[method])
        if report.curves is None:
            _fail(EXIT_PIPELINE, "pipeline", "; ".join(report.notes) or "no curves produced")
        _write_csv(report.curves, path)
        print(f"{method}: wrote {path} (m = {report.m}, {len(report.curves.grid)} points)")
    return 0


def _generate(args):
    if args.kind == "perturbed-logspace":
        if args.n is None or args.theta is None:
            _fail(EXIT_USAGE, "invalid-flags", "perturbed-logspace needs --n and --theta")
        A = gen_perturbed_logspace(args.n, args.theta, args.n_below, seed=args.seed,
                                   perturb=not args.no_perturb)
        params = {"n": args.n, "theta": args.theta,
                  "n_below": args.n_below if args.n_below is not None else (2 * args.n) // 3,
                  "perturb": not args.no_perturb}
        return A, params, lambda: tridiagonal_eigenvalues(A)
    if args.N is None or args.k is None:
        _fail(EXIT_USAGE, "invalid-flags", "dirac-comb needs --N and --k")
    A = gen_dirac_comb(args.N, args.k)
    return A, {"N": args.N, "k": args.k}, lambda: dirac_comb_eigenvalues(args.N, args.k)


def cmd_gen_problem(args) -> int:
    try:
        A, params, oracle = _generate(args)
    except ValueError as exc:
        _fail(EXIT_USAGE, "invalid-flags", str(exc))
    scale, shift = 1.0, 0.0
    eigs = None
    if args.map_to is not None:
        eigs = oracle()
        try:
            A, amap = shift_scale(A, args.map_to[0], args.map_to[1],
                                  SpectralInterval(float(eigs[0]), float(eigs[-1]), True))
        except ValueError as exc:
            _fail(EXIT_USAGE, "invalid-flags", str(exc))
        scale, shift = amap.scale, amap.shift
        eigs = amap(eigs)
    spec = ProblemSpec(args.kind, params, args.seed, scale, shift)
    out = Path(args.out)
    try:
        write_matrix_market(out, A, comment=json.dumps(spec.to_dict(), sort_keys=True))
    except OSError as exc:
        _fail(EXIT_IO, "io", str(exc))
    sidecar = {"problem": spec.to_dict(), "n": A.n, "nnz": A.nnz, "matrix": out.name}
    if args.oracle:
        if eigs is None:
            eigs = oracle()
        gaps = exact_gaps(eigs, args.oracle_theta_min)
        sidecar["oracle"] = {
            "lambda_min": float(eigs[0]),
            "lambda_max": float(eigs[-1]),
            "theta_min": args.oracle_theta_min,
            "gaps": [g.to_dict() for g in gaps],
        }
    _write_text(out.with_suffix(".json"), json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out} (n = {A.n}, nnz = {A.nnz})")
    return 0


COMMANDS = {"find-gaps": cmd_find_gaps, "curves": cmd_curves, "gen-problem": cmd_gen_problem}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(json.dumps({"error": exc.kind, "message": str(exc), "exit_code": exc.code}),
              file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
