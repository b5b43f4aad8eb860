"""psatune command line: ``tune`` one instance, ``bench`` a matrix, ``report`` on results."""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import os
import sys
from pathlib import Path

from .adapters import AdapterError, SolverTask, format_number, load_adapter
from .bench import (
    ExperimentMatrix,
    MatrixError,
    baseline_variant,
    describe_matrix,
    expand_instances,
    factorial_variants,
    load_matrix,
    read_results,
    run_matrix,
)
from .engine import run_psa
from .gp import GpError
from .report import ReportError, pairwise_compare, strategy_frequency
from .settings import PsaSettings, SettingsError, parse_evolution, parse_stop, parse_timeout_init
from .space import SpaceError, load_space
from .strategies import STRATEGIES

EXIT_OK, EXIT_NO_SOLUTION, EXIT_CONFIG = 0, 1, 2
CONFIG_ERRORS = (SpaceError, AdapterError, SettingsError, MatrixError, GpError, OSError, json.JSONDecodeError)


def default_run_dir() -> Path:
    root = Path(os.environ.get("PSA_RUN_DIR", "runs"))
    return root / dt.datetime.now().strftime("%Y%m%d-%H%M%S-%f")


def _settings_from_args(args: argparse.Namespace) -> PsaSettings:
    fields = {
        "global_timeout_s": args.time_limit,
        "probing_ratio": args.rho,
        "global_time_mode": args.global_time,
        "max_tries": args.max_tries,
        "strategy": args.strategy,
        "seed": args.seed,
    }
    fields.update(parse_timeout_init(args.timeout_init))
    fields.update(parse_evolution(args.evolve))
    fields.update(parse_stop(args.stop))
    return PsaSettings(**fields)


def cmd_tune(args: argparse.Namespace) -> int:
    try:
        settings = _settings_from_args(args)
        space = load_space(args.space)
        adapter = load_adapter(args.adapter)
        task = SolverTask(Path(args.instance), args.sense, adapter)
        task.check()
    except CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run_dir = Path(args.run_dir) if args.run_dir else default_run_dir()
    result = run_psa(task, space, settings, run_dir=run_dir, variant=args.variant)
    objective = task.from_canonical(result.final_objective)
    probe_s, solve_s = result.phase_durations
    print(f"status: {result.final_status.value}")
    print(f"objective: {format_number(objective) if objective is not None else 'none'} ({task.objective_sense})")
    print(f"best configuration: {result.flags}")
    print(
        f"probe: {probe_s:.3f}s ({len(result.probe_rounds)} rounds, stop: {result.stop_reason})"
        f"  solve: {solve_s:.3f}s  total: {result.total_wall_s:.3f}s"
    )
    print(f"seed: {settings.seed}")
    print(f"run dir: {run_dir}")
    return EXIT_OK if result.final_objective is not None else EXIT_NO_SOLUTION


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        if args.matrix:
            matrix = load_matrix(args.matrix)
            if args.parallel:
                matrix.parallelism = args.parallel
        else:
            if not (args.factorial and args.strategy and args.instances and args.space and args.adapter):
                print("bench needs --matrix, or --factorial --strategy --instances --space --adapter", file=sys.stderr)
                return EXIT_CONFIG
            space = load_space(args.space)
            adapter = load_adapter(args.adapter)
            base = PsaSettings(global_timeout_s=args.time_limit)
            variants = factorial_variants(args.strategy, base)
            if args.baseline:
                variants.append(baseline_variant(base))
            tasks = [SolverTask(p, args.sense, adapter) for p in expand_instances(args.instances)]
            matrix = ExperimentMatrix(tasks, variants, space, args.seeds, args.parallel or 1)
        for t in matrix.instances:
            t.check()
    except CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run_dir = Path(args.run_dir) if args.run_dir else default_run_dir()
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "matrix.json").write_text(json.dumps(describe_matrix(matrix), indent=2) + "\n")
    before = _count_rows(run_dir / "results.csv")
    results = run_matrix(matrix, run_dir)
    added = _count_rows(results) - before
    print(f"{len(matrix.variants)} variants x {len(matrix.instances)} instances x {len(matrix.seeds)} seeds")
    print(f"{added} new rows -> {results}")
    return EXIT_OK


def _count_rows(path: Path) -> int:
    if not path.exists() or path.stat().st_size == 0:
        return 0
    return len(read_results(path))


def _filter(rows, variant: str | None, seed: str | None):
    if variant is not None:
        rows = [r for r in rows if r["variant"] == variant]
    if seed is not None:
        rows = [r for r in rows if r["seed"] == seed]
    return rows


def _write_csv(path: str, rows: list[dict[str, str]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def cmd_report(args: argparse.Namespace) -> int:
    try:
        if args.compare:
            a_path, b_path = args.compare
            rows_a = _filter(read_results(a_path), args.variant_a, args.seed)
            rows_b = _filter(read_results(b_path), args.variant_b, args.seed)
            report = pairwise_compare(
                rows_a, rows_b,
                label_a=args.variant_a or Path(a_path).stem, label_b=args.variant_b or Path(b_path).stem,
            )
            print(report.text())
            if args.out:
                _write_csv(args.out, report.rows())
        else:
            rows = _filter(read_results(args.frequencies), None, args.seed)
            if args.strategy:
                rows = [r for r in rows if r["strategy"] == args.strategy]
            table = strategy_frequency(rows)
            print(table.text())
            if args.out:
                _write_csv(args.out, table.rows())
    except ReportError as exc:
        print(f"report error: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except (OSError, MatrixError) as exc:
        print(f"cannot read results: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="psatune", description="Probe-and-solve hyperparameter tuning for solvers.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tune", help="tune and solve one instance")
    t.add_argument("--space", required=True)
    t.add_argument("--adapter", required=True)
    t.add_argument("--instance", required=True)
    t.add_argument("--time-limit", type=float, default=1800.0)
    t.add_argument("--rho", type=float, default=0.2)
    t.add_argument("--strategy", choices=sorted(STRATEGIES), default="bo")
    t.add_argument("--timeout-init", default="static:5", help="static:S | first-runtime")
    t.add_argument("--evolve", default="static", help="static | geometric:B | luby")
    t.add_argument("--stop", default="timeout", help="timeout | first-solution | stagnation:L")
    t.add_argument("--global-time", choices=["percent", "dynamic"], default="percent")
    t.add_argument("--max-tries", type=int, default=30)
    t.add_argument("--sense", choices=["minimize", "maximize"], default="minimize")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--variant", default="psa")
    t.add_argument("--run-dir")
    t.set_defaults(func=cmd_tune)

    b = sub.add_parser("bench", help="run an experiment matrix")
    b.add_argument("--matrix")
    b.add_argument("--factorial", action="store_true", help="expand the 24-variant factorial design")
    b.add_argument("--strategy", choices=sorted(STRATEGIES))
    b.add_argument("--instances", nargs="+", help="instance files or glob patterns")
    b.add_argument("--space")
    b.add_argument("--adapter")
    b.add_argument("--time-limit", type=float, default=1800.0)
    b.add_argument("--sense", choices=["minimize", "maximize"], default="minimize")
    b.add_argument("--seeds", type=int, nargs="+", default=[0])
    b.add_argument("--baseline", action="store_true", help="add the default-configuration baseline variant")
    b.add_argument("--parallel", type=int, default=None)
    b.add_argument("--run-dir")
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("report", help="compare results or tabulate component frequencies")
    group = r.add_mutually_exclusive_group(required=True)
    group.add_argument("--compare", nargs=2, metavar=("A.csv", "B.csv"))
    group.add_argument("--frequencies", metavar="results.csv")
    r.add_argument("--variant-a")
    r.add_argument("--variant-b")
    r.add_argument("--strategy")
    r.add_argument("--seed")
    r.add_argument("--out", help="also write the report as CSV")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "tune":
        try:
            _settings_from_args(args)
        except SettingsError as exc:
            parser.print_usage(sys.stderr)
            print(f"psatune tune: error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
