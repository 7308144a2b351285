"""Command-line front end for sweeps, aggregation, and the interval benchmark.

Every flag can be preloaded from a plain ``key = value`` config file passed
with ``--config``; explicit flags win over the file, which wins over the
built-in defaults. Exit status is nonzero only for infrastructure failures,
never for optimization misses (those are inf entries in the outputs).
"""

from __future__ import annotations

import argparse
import os
import sys

from . import harness
from .benchmarks import load_problems, problem_by_name
from .ftg import FtgConfig
from .gp import GpConfig
from .lsp import LspProblem, run_lsp_experiment

_DEFAULTS = {
    "problems": "all",
    "algorithms": "all",
    "runs": 100,
    "budget": 100_000.0,
    "seed": 1,
    "workers": 1,
    "degree": 10,
    "algo": "ftg",
    "lower": 0.0,
    "upper": 1.0,
}


def load_config(path: str) -> dict:
    """Parse a flat key = value file; values become int, float, or str."""
    values: dict = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {raw.rstrip()}")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = _coerce(value.strip("'\""))
    return values


def _coerce(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _resolve(args: argparse.Namespace, keys: list[str]) -> argparse.Namespace:
    config = load_config(args.config) if getattr(args, "config", None) else {}
    for key in keys:
        if getattr(args, key, None) is None:
            setattr(args, key, config.get(key, _DEFAULTS.get(key)))
    return args


def _parse_problems(text: str):
    if text == "all":
        return load_problems()
    return [problem_by_name(name.strip()) for name in text.split(",") if name.strip()]


def _parse_algorithms(text: str):
    if text == "all":
        return list(harness.ALGORITHMS)
    names = [name.strip() for name in text.split(",") if name.strip()]
    for name in names:
        if name not in harness.ALGORITHMS:
            raise ValueError(f"unknown algorithm {name!r}; choose from {harness.ALGORITHMS}")
    return names


def _cmd_run(args: argparse.Namespace) -> int:
    args = _resolve(args, ["problems", "algorithms", "runs", "budget", "seed", "workers"])
    problems = _parse_problems(args.problems)
    algorithms = _parse_algorithms(args.algorithms)
    os.makedirs(args.out, exist_ok=True)
    records = harness.run_sweep(
        problems, algorithms, runs=int(args.runs), budget=float(args.budget),
        master_seed=int(args.seed), workers=int(args.workers),
        out_dir=args.out, collect_traces=args.trace)
    print(f"wrote {len(records)} records to {os.path.join(args.out, 'records.json')}")
    return 0


def _cmd_aggregate(args: argparse.Namespace) -> int:
    source = args.input
    if os.path.isdir(source):
        source = os.path.join(source, "records.json")
    records = harness.read_records(source)
    stats = harness.aggregate(records)
    harness.emit(stats, args.out)
    print(f"wrote {len(stats)} stat rows to {args.out}")
    return 0


def _cmd_heatmap(args: argparse.Namespace) -> int:
    stats = harness.read_stats(args.input)
    cells = harness.heatmap_delta(stats)
    harness.write_heatmap(cells, args.out)
    print(f"wrote {len(cells)} heatmap cells to {args.out}")
    return 0


def _cmd_lsp(args: argparse.Namespace) -> int:
    args = _resolve(args, ["degree", "algo", "runs", "budget", "seed", "lower", "upper"])
    problem = LspProblem.power_sum(int(args.degree), float(args.lower), float(args.upper))
    os.makedirs(args.out, exist_ok=True)
    traces = []
    for i in range(int(args.runs)):
        rng = harness.derive_rng(int(args.seed), 1_000_000 + int(args.degree), i, 1)
        if args.algo == "ftg":
            config = FtgConfig(budget=float(args.budget))
        elif args.algo == "canonical":
            config = GpConfig.canonical(budget=float(args.budget))
        elif args.algo == "gp11":
            config = GpConfig.one_plus_one(budget=float(args.budget))
        elif args.algo == "gp1l":
            config = GpConfig.one_plus_lambda(budget=float(args.budget))
        else:
            raise ValueError(f"unknown algorithm {args.algo!r}")
        trace = run_lsp_experiment(args.algo, problem, config, rng)
        traces.append(trace)
        harness.write_lsp_trace(
            trace, os.path.join(args.out, f"lsp_{args.algo}_deg{args.degree}_run{i:03d}.csv"))
    harness.write_lsp_summary(
        traces, os.path.join(args.out, f"lsp_{args.algo}_deg{args.degree}_summary.csv"))
    print(f"wrote {len(traces)} trace files to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ftg", description="Projection-based symbolic regression benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="sweep algorithms over benchmark problems")
    run.add_argument("--problems", help="comma list of problem names, or 'all'")
    run.add_argument("--algorithms", help="comma list from ftg,gp11,gp1l,canonical, or 'all'")
    run.add_argument("--runs", type=int)
    run.add_argument("--budget", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--trace", action="store_true", help="keep full loss traces in records")
    run.add_argument("--out", required=True)
    run.add_argument("--config")
    run.set_defaults(fn=_cmd_run)

    agg = sub.add_parser("aggregate", help="summarize a records file into table cells")
    agg.add_argument("--in", dest="input", required=True)
    agg.add_argument("--out", required=True)
    agg.add_argument("--config")
    agg.set_defaults(fn=_cmd_aggregate)

    heat = sub.add_parser("heatmap", help="FTG-vs-GP success and median deltas")
    heat.add_argument("--in", dest="input", required=True)
    heat.add_argument("--out", required=True)
    heat.add_argument("--config")
    heat.set_defaults(fn=_cmd_heatmap)

    lsp = sub.add_parser("lsp", help="interval benchmark with per-generation traces")
    lsp.add_argument("--degree", type=int)
    lsp.add_argument("--algo", choices=list(harness.ALGORITHMS))
    lsp.add_argument("--runs", type=int)
    lsp.add_argument("--budget", type=float)
    lsp.add_argument("--seed", type=int)
    lsp.add_argument("--lower", type=float)
    lsp.add_argument("--upper", type=float)
    lsp.add_argument("--out", required=True)
    lsp.add_argument("--config")
    lsp.set_defaults(fn=_cmd_lsp)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # infrastructure failure -> nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
