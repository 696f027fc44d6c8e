"""Command-line entry points: run, grid, fingerprint, trace."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config, load_grid_config
from .sim_harness import (
    NOT_REACHED,
    Simulation,
    run_experiment,
    run_grid,
    summarize_reductions,
    write_summary_csv,
)


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="TOML config file")
    parser.add_argument("--strategy", type=str, default=None,
                        help="greedy | gossip | data | network | contextual")
    parser.add_argument("--cr", type=float, default=None, help="connection rate in (0, 1]")
    parser.add_argument("--classes-per-client", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", type=str, default=None, help="output path")


def _config_from_args(args: argparse.Namespace):
    overrides = {
        "strategy": args.strategy,
        "connection_rate": args.cr,
        "classes_per_client": args.classes_per_client,
        "seed": args.seed,
        "output_path": args.out,
    }
    return load_config(args.config, overrides)


def _cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    records = run_experiment(config)
    sim_time = records[-1].sim_time_end if records else 0.0
    reached = [r for r in records if r.test_accuracy is not None and r.test_accuracy >= 0.5]
    if reached:
        print(f"time_to_accuracy(0.5) = {reached[0].sim_time_end:.2f} s")
    else:
        print(f"time_to_accuracy(0.5) = {NOT_REACHED}")
    print(f"rounds = {len(records)}, simulated time = {sim_time:.2f} s")
    print(f"results written to {config.output_path}")
    return 0


def _cmd_grid(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    grid = load_grid_config(args.config)
    out = Path(config.output_path)
    cells = run_grid(config, grid, out)
    failures = [c for c in cells if c["error"]]
    for cell in failures:
        print(f"cell {cell['run_id']} failed: {cell['error']}", file=sys.stderr)
    try:
        summary = summarize_reductions(out)
    except ValueError as exc:
        print(f"no summary: {exc}", file=sys.stderr)
        print(f"combined CSV: {out}")
        return 1 if failures else 0
    summary_path = out.with_suffix(".summary.csv")
    write_summary_csv(summary, summary_path)
    header = f"{'CR':>5} {'cpc':>4} {'strategy':>12} {'time_to_0.5_s':>14} {'reduction':>10}"
    print(header)
    for row in summary:
        t = row["time_to_half_acc_s"]
        r = row["reduction_vs_gossip"]
        print(
            f"{row['connection_rate']:>5g} {row['classes_per_client']:>4} "
            f"{row['strategy']:>12} "
            f"{NOT_REACHED if t is None else format(t, '.2f'):>14} "
            f"{'' if r is None else format(r, '.2f') + 'x':>10}"
        )
    print(f"combined CSV: {out}; summary: {summary_path}")
    return 1 if failures else 0


def _cmd_fingerprint(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    sim = Simulation(config)
    assignment = sim.bootstrap_assignment()
    payload = {
        "cluster_count": assignment.cluster_count,
        "assignment": {str(cid): int(k) for cid, k in sorted(assignment.assignment.items())},
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"cluster assignment written to {args.out}")
    else:
        print(text)
    return 0


def _cmd_trace(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    trace_dir = Path(args.out or "trace")
    config.output_path = str(trace_dir / "results.csv")
    sim = Simulation(config, trace_dir=trace_dir)
    from .sim_harness import CsvSink

    sink = CsvSink(config.output_path)
    try:
        sim.run(sink)
    finally:
        sink.close()
    print(f"traces and results written to {trace_dir}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="vflsim",
        description="Simulate federated learning over a vehicular network",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, handler, text in [
        ("run", _cmd_run, "run a single experiment"),
        ("grid", _cmd_grid, "run an experiment grid and summarize"),
        ("fingerprint", _cmd_fingerprint, "dump the gradient-cluster assignment"),
        ("trace", _cmd_trace, "run with JSON-lines message/selection traces"),
    ]:
        p = sub.add_parser(name, help=text)
        _add_common_flags(p)
        p.set_defaults(handler=handler)
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
