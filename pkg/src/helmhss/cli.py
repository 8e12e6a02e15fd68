"""Command-line entry point: ``helmhss run | table | verify``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import driver


def _k_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="helmhss", description="Shifted-HSS preconditioned Helmholtz solves")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one outer FGMRES solve, written as a CSV row")
    run.add_argument("--formulation", choices=["primal", "mixed"], default="primal")
    run.add_argument("--source", choices=list(driver.SOURCES) + ["zero"], default="uniform")
    run.add_argument("--k", type=float, default=16.0)
    run.add_argument("--theta", type=float, default=1.0)
    run.add_argument("--c0", type=float, default=1.0)
    run.add_argument("--delta-hat", type=float, default=2.0)
    run.add_argument("--inner", choices=["direct", "mg"], default="direct")
    run.add_argument("--mg-cycles", type=int)
    run.add_argument("--mg-smooth", type=int)
    run.add_argument("--mg-levels", type=int, default=4)
    run.add_argument("--rtol", type=float, default=1e-6)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--zero-guess", action="store_true", help="start FGMRES from zero instead")
    run.add_argument("--maxiter", type=int, default=200)
    run.add_argument("--out", type=Path, required=True, help="CSV report path")
    run.add_argument("--verbose", action="store_true",
                     help="also write the residual trace and multigrid log next to --out")
    run.add_argument("--dump-operators", type=Path, metavar="DIR")
    run.add_argument("--dump-solution", type=Path, metavar="PATH")
    run.add_argument("--no-plot", action="store_true", help="skip the residual-history PNG")

    tab = sub.add_parser("table", help="reproduce one results table")
    tab.add_argument("--name", choices=driver.TABLE_NAMES, required=True)
    tab.add_argument("--k", type=_k_list, default=[16, 32, 64])
    tab.add_argument("--big", action="store_true", help="allow k >= 128")
    tab.add_argument("--seed", type=int, default=0)
    tab.add_argument("--out-dir", type=Path, default=Path("."))
    tab.add_argument("--no-plot", action="store_true")

    sub.add_parser("verify", help="run the built-in self-checks")
    return p


def _cmd_run(args) -> int:
    cfg = driver.ExperimentConfig(
        formulation=args.formulation, source=args.source, k=args.k, theta=args.theta, c0=args.c0,
        delta_hat=args.delta_hat, inner=args.inner, mg_levels=args.mg_levels,
        mg_smooth=args.mg_smooth, mg_cycles=args.mg_cycles, rtol=args.rtol,
        seed=None if args.zero_guess else args.seed, maxiter=args.maxiter,
    )
    report = driver.run_experiment(cfg, keep_solution=args.dump_solution is not None,
                                   dump_operators=args.dump_operators)
    out = args.out
    out.parent.mkdir(parents=True, exist_ok=True)
    driver.write_reports_csv([report], out)
    if args.verbose:
        driver.write_trace_csv(report, out.with_name(out.stem + "_trace.csv"))
        if cfg.inner == "mg":
            driver.write_mg_log(report, out.with_name(out.stem + "_mg.csv"))
    if args.dump_solution is not None:
        driver.write_solution(report, args.dump_solution)
    if not args.no_plot and report.outer_its > 0:
        from .plotting import plot_residual_history

        plot_residual_history(report, out.with_suffix(".png"))
    status = "converged" if report.converged else "NOT converged"
    print(f"{cfg.formulation}/{cfg.source} k={cfg.k:g} theta={cfg.theta:g}: "
          f"{report.outer_its} outer ({report.inner_total} inner), {status}, "
          f"{report.seconds:.1f}s -> {out}")
    return 0


def _cmd_table(args) -> int:
    table = driver.reproduce_table(args.name, args.k, big=args.big, seed=args.seed)
    print(table.format())
    args.out_dir.mkdir(parents=True, exist_ok=True)
    stem = args.out_dir / args.name
    table.write_csv(stem.with_suffix(".csv"))
    driver.write_reports_csv(table.reports, args.out_dir / f"{args.name}_runs.csv")
    if not args.no_plot:
        from .plotting import plot_table

        plot_table(table, stem.with_suffix(".png"))
    return 0


def _cmd_verify(args) -> int:
    from .verify import verify_suite

    return 0 if verify_suite() else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return {"run": _cmd_run, "table": _cmd_table, "verify": _cmd_verify}[args.command](args)
    except ValueError as exc:
        print(f"helmhss: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
