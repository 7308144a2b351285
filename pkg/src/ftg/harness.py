"""Seeded experiment sweeps, first-hitting statistics, and file emission.

A sweep runs every requested algorithm on the same per-run datasets: the
dataset for run i of a problem is derived from (master seed, problem index,
run index) only, so all algorithms face identical instances. Each run yields
one record holding the first traversal count at which the sum of squared
errors fell below each tolerance in the grid, read off a single trajectory.

Statistics follow the usual conventions for fixed-budget comparisons: mean,
population standard deviation, standard error, and linearly interpolated
quartiles over the successful runs only; misses enter the success rate.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .benchmarks import ProblemSpec
from .ftg import FtgConfig, run_ftg
from .gp import GpConfig, run_canonical, run_one_plus_lambda
from .hilbert import write_dataset_csv
from .trees import to_sexpr

TOLERANCES: tuple[float, ...] = tuple(10.0 ** -i for i in range(9))  # 1.0 .. 1e-8
ALGORITHMS: tuple[str, ...] = ("ftg", "gp11", "gp1l", "canonical")

STATS_HEADER = ["problem", "algorithm", "tolerance", "mean_fe", "sd", "sem",
                "q1", "median", "q3", "success_rate"]


@dataclass
class RunRecord:
    """One algorithm run: first-hitting budget per tolerance plus metadata."""

    problem: str
    algorithm: str
    run_index: int
    master_seed: int
    budget: float
    fe_by_tolerance: dict[float, float]  # math.inf marks a miss
    final_loss: float
    final_mse: float | None = None
    model: str | None = None
    trace: list[tuple[int, float]] | None = None
    extensions: list[tuple[int, float, bool, int]] | None = None  # (k, cond, accepted, traversals)

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "algorithm": self.algorithm,
            "run_index": self.run_index,
            "master_seed": self.master_seed,
            "budget": _enc(self.budget),
            "fe_by_tolerance": {repr(t): _enc(fe) for t, fe in self.fe_by_tolerance.items()},
            "final_loss": _enc(self.final_loss),
            "final_mse": None if self.final_mse is None else _enc(self.final_mse),
            "model": self.model,
            "trace": None if self.trace is None else [[s, _enc(l)] for s, l in self.trace],
            "extensions": None if self.extensions is None else
                [[k, _enc(c), acc, t] for k, c, acc, t in self.extensions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        ext = d.get("extensions")
        return cls(
            problem=d["problem"],
            algorithm=d["algorithm"],
            run_index=int(d["run_index"]),
            master_seed=int(d["master_seed"]),
            budget=_dec(d["budget"]),
            fe_by_tolerance={float(k): _dec(v) for k, v in d["fe_by_tolerance"].items()},
            final_loss=_dec(d["final_loss"]),
            final_mse=None if d.get("final_mse") is None else _dec(d["final_mse"]),
            model=d.get("model"),
            trace=None if d.get("trace") is None else [(int(s), _dec(l)) for s, l in d["trace"]],
            extensions=None if ext is None else
                [(int(k), _dec(c), bool(a), int(t)) for k, c, a, t in ext],
        )


@dataclass(frozen=True)
class AggregateStats:
    """One table cell: FE statistics for (problem, algorithm, tolerance)."""

    problem: str
    algorithm: str
    tolerance: float
    mean_fe: float
    sd: float
    sem: float
    q1: float
    median: float
    q3: float
    success_rate: float


def _enc(x: float):
    # Non-finite floats are not valid JSON; the file format spells them "inf".
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return x


def _dec(x) -> float:
    return float(x)


def derive_rng(master_seed: int, problem_index: int, run_index: int,
               stream: int) -> np.random.Generator:
    """Deterministic per-run generator; stream 0 draws data, 1 runs the search."""
    return np.random.default_rng([master_seed, problem_index, run_index, stream])


def first_hits(trajectory: Iterable[tuple[int, float]], tolerances: Sequence[float],
               budget: float) -> dict[float, float]:
    """First traversal stamp with loss strictly below each tolerance.

    Only stamps within the budget count; misses map to inf. The trajectory is
    reduced through a running best so any measured-loss sequence works.
    """
    remaining = sorted(tolerances, reverse=True)
    hits: dict[float, float] = {}
    best = math.inf
    for stamp, loss in trajectory:
        if stamp > budget:
            break
        if loss < best:
            best = loss
            while remaining and best < remaining[0]:
                hits[remaining.pop(0)] = float(stamp)
        if not remaining:
            break
    for tol in remaining:
        hits[tol] = math.inf
    return {t: hits[t] for t in tolerances}


def make_algorithm_config(algorithm: str, budget: float):
    if algorithm == "ftg":
        return FtgConfig(budget=budget)
    if algorithm == "gp11":
        return GpConfig.one_plus_one(budget=budget)
    if algorithm == "gp1l":
        return GpConfig.one_plus_lambda(budget=budget)
    if algorithm == "canonical":
        return GpConfig.canonical(budget=budget)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def run_single(spec: ProblemSpec, algorithm: str, run_index: int, budget: float,
               master_seed: int, tolerances: Sequence[float] = TOLERANCES,
               collect_trace: bool = False, stop_loss: float | None = None) -> RunRecord:
    """Execute one (problem, algorithm, run) cell and extract its hit map."""
    data_rng = derive_rng(master_seed, spec.index, run_index, 0)
    algo_rng = derive_rng(master_seed, spec.index, run_index, 1)
    problem = spec.sample(data_rng)
    config = make_algorithm_config(algorithm, budget)

    extensions = None
    if algorithm == "ftg":
        result = run_ftg(problem, config, algo_rng, stop_loss=stop_loss)
        trajectory = result.loss_trace
        final_loss = result.final_loss
        model = to_sexpr(result.model)
        if collect_trace:
            extensions = [(e.basis_size, e.cond_estimate, e.accepted, e.traversals)
                          for e in result.events]
    else:
        runner = run_canonical if algorithm == "canonical" else run_one_plus_lambda
        run = runner(problem, config, algo_rng, stop_loss=stop_loss)
        trajectory = run.trajectory
        final_loss = run.best.loss
        model = to_sexpr(run.best.tree)

    return RunRecord(
        problem=spec.name,
        algorithm=algorithm,
        run_index=run_index,
        master_seed=master_seed,
        budget=budget,
        fe_by_tolerance=first_hits(trajectory, tolerances, budget),
        final_loss=final_loss,
        final_mse=final_loss / problem.data.size if math.isfinite(final_loss) else math.inf,
        model=model,
        trace=list(trajectory) if collect_trace else None,
        extensions=extensions,
    )


def write_extension_log(record: RunRecord, path: str) -> None:
    """Per-extension projection log: basis size, conditioning, verdict, stamp."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["basis_size", "cond_estimate", "accepted", "traversals"])
        for k, cond, accepted, stamp in record.extensions or ():
            writer.writerow([k, cond, accepted, stamp])


def _run_task(args) -> RunRecord:
    return run_single(*args)


def run_sweep(problems: Sequence[ProblemSpec], algorithms: Sequence[str],
              runs: int = 100, budget: float = 100_000, master_seed: int = 1,
              tolerances: Sequence[float] = TOLERANCES, workers: int | None = None,
              out_dir: str | None = None, collect_traces: bool = False,
              stop_loss: float | None = None) -> list[RunRecord]:
    """All (problem, algorithm, run) cells, optionally in parallel processes.

    Results are deterministic for a fixed master seed regardless of worker
    count or scheduling. With ``out_dir`` set, the records and one dataset
    snapshot per (problem, run) are written there.
    """
    tasks = [(spec, algo, i, budget, master_seed, tuple(tolerances), collect_traces, stop_loss)
             for spec in problems for algo in algorithms for i in range(runs)]
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        records = [_run_task(t) for t in tasks]
    records.sort(key=lambda r: (r.problem, r.algorithm, r.run_index))

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_records(records, os.path.join(out_dir, "records.json"))
        snap_dir = os.path.join(out_dir, "datasets")
        os.makedirs(snap_dir, exist_ok=True)
        for spec in problems:
            for i in range(runs):
                problem = spec.sample(derive_rng(master_seed, spec.index, i, 0))
                write_dataset_csv(problem.data,
                                  os.path.join(snap_dir, f"{spec.name}_run{i:03d}.csv"))
    return records


def aggregate(records: Sequence[RunRecord],
              tolerances: Sequence[float] | None = None) -> list[AggregateStats]:
    """Per-cell statistics over successful runs; inf/0 rows when none succeed."""
    if not records:
        raise ValueError("no records to aggregate")
    if tolerances is None:
        tolerances = sorted({t for r in records for t in r.fe_by_tolerance}, reverse=True)
    cells: dict[tuple[str, str], list[RunRecord]] = {}
    for rec in records:
        cells.setdefault((rec.problem, rec.algorithm), []).append(rec)

    stats: list[AggregateStats] = []
    for (problem, algorithm), group in sorted(cells.items()):
        for tol in tolerances:
            fes = [r.fe_by_tolerance.get(tol, math.inf) for r in group]
            successes = [fe for fe in fes if math.isfinite(fe)]
            rate = 100.0 * len(successes) / len(fes)
            if successes:
                arr = np.asarray(successes)
                sd = float(np.std(arr))  # population convention, matches n=1 -> 0
                q1, med, q3 = (float(v) for v in np.percentile(arr, [25, 50, 75]))
                stats.append(AggregateStats(problem, algorithm, tol, float(np.mean(arr)),
                                            sd, sd / math.sqrt(len(arr)), q1, med, q3, rate))
            else:
                stats.append(AggregateStats(problem, algorithm, tol, math.inf,
                                            0.0, 0.0, math.inf, math.inf, math.inf, 0.0))
    return stats


@dataclass(frozen=True)
class HeatmapCell:
    """FTG versus the best GP baseline for one (problem, tolerance) cell."""

    problem: str
    tolerance: float
    success_diff: float  # FTG success rate minus the best GP success rate
    median_ratio: float  # FTG median FE over the smallest GP median FE


def heatmap_delta(stats: Sequence[AggregateStats]) -> list[HeatmapCell]:
    by_cell: dict[tuple[str, float], dict[str, AggregateStats]] = {}
    for s in stats:
        by_cell.setdefault((s.problem, s.tolerance), {})[s.algorithm] = s

    cells: list[HeatmapCell] = []
    for (problem, tol), algos in sorted(by_cell.items(), key=lambda kv: (kv[0][0], -kv[0][1])):
        ftg_row = algos.get("ftg")
        gp_rows = [s for name, s in algos.items() if name != "ftg"]
        if ftg_row is None or not gp_rows:
            raise ValueError("heatmap needs ftg plus at least one GP algorithm per cell")
        success_diff = ftg_row.success_rate - max(s.success_rate for s in gp_rows)
        gp_median = min(s.median for s in gp_rows)
        if math.isinf(ftg_row.median):
            ratio = math.inf
        elif math.isinf(gp_median):
            ratio = 0.0
        else:
            ratio = ftg_row.median / gp_median
        cells.append(HeatmapCell(problem, tol, success_diff, ratio))
    return cells


# ---------------------------------------------------------------------------
# file emission


def emit(items, path: str, fmt: str | None = None) -> None:
    """Write records or stats to ``path``; format inferred from the suffix."""
    fmt = fmt or ("json" if str(path).endswith(".json") else "csv")
    first = items[0] if items else None
    if isinstance(first, AggregateStats) or first is None:
        write_stats(items, path, fmt)
    elif isinstance(first, RunRecord):
        write_records(items, path, fmt)
    elif isinstance(first, HeatmapCell):
        write_heatmap(items, path)
    else:
        raise TypeError(f"cannot emit items of type {type(first)}")


def write_records(records: Sequence[RunRecord], path: str, fmt: str | None = None) -> None:
    fmt = fmt or ("json" if str(path).endswith(".json") else "csv")
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump([r.to_dict() for r in records], fh, indent=1, sort_keys=True)
            fh.write("\n")
        return
    tolerances = sorted({t for r in records for t in r.fe_by_tolerance}, reverse=True)
    header = ["problem", "algorithm", "run_index", "master_seed", "budget",
              "final_loss", "final_mse"] + [f"fe@{repr(t)}" for t in tolerances]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in records:
            row = [r.problem, r.algorithm, r.run_index, r.master_seed, r.budget,
                   r.final_loss, "" if r.final_mse is None else r.final_mse]
            row += [r.fe_by_tolerance.get(t, math.inf) for t in tolerances]
            writer.writerow(row)


def read_records(path: str) -> list[RunRecord]:
    if str(path).endswith(".json"):
        with open(path) as fh:
            return [RunRecord.from_dict(d) for d in json.load(fh)]
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            fe = {float(k[3:]): float(v) for k, v in row.items() if k.startswith("fe@")}
            records.append(RunRecord(
                problem=row["problem"], algorithm=row["algorithm"],
                run_index=int(row["run_index"]), master_seed=int(row["master_seed"]),
                budget=float(row["budget"]), fe_by_tolerance=fe,
                final_loss=float(row["final_loss"]),
                final_mse=float(row["final_mse"]) if row["final_mse"] else None))
    return records


def write_stats(stats: Sequence[AggregateStats], path: str, fmt: str | None = None) -> None:
    fmt = fmt or ("json" if str(path).endswith(".json") else "csv")
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump([{k: _enc(getattr(s, k)) for k in STATS_HEADER} for s in stats],
                      fh, indent=1, sort_keys=True)
            fh.write("\n")
        return
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STATS_HEADER)
        for s in stats:
            writer.writerow([getattr(s, k) for k in STATS_HEADER])


def read_stats(path: str) -> list[AggregateStats]:
    rows: list[AggregateStats] = []
    if str(path).endswith(".json"):
        with open(path) as fh:
            raw = json.load(fh)
        for d in raw:
            rows.append(AggregateStats(d["problem"], d["algorithm"],
                                       *(float(_dec(d[k])) for k in STATS_HEADER[2:])))
        return rows
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(AggregateStats(row["problem"], row["algorithm"],
                                       *(float(row[k]) for k in STATS_HEADER[2:])))
    return rows


def write_heatmap(cells: Sequence[HeatmapCell], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["problem", "tolerance", "success_diff", "median_ratio"])
        for c in cells:
            writer.writerow([c.problem, c.tolerance, c.success_diff, c.median_ratio])


def write_lsp_trace(trace, path: str) -> None:
    """Per-generation rows of one interval-benchmark run."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algorithm", "degree", "generation", "traversals",
                         "best_loss", "span", "nodes", "mean_loss", "mean_nodes"])
        for row in trace.rows:
            writer.writerow([trace.algorithm, trace.degree, row.generation,
                             row.traversals, row.best_loss, row.span, row.nodes,
                             "" if row.mean_loss is None else row.mean_loss,
                             "" if row.mean_nodes is None else row.mean_nodes])


def write_lsp_summary(traces, path: str) -> None:
    """Cross-run summary: final loss/span plus the dual-improvement counter."""
    duals = np.asarray([t.dual_improvements for t in traces], dtype=float)
    spans = np.asarray([t.final_span for t in traces], dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algorithm", "degree", "runs", "mean_final_loss",
                         "mean_final_span", "sd_final_span",
                         "mean_dual_improvements", "sd_dual_improvements"])
        losses = [t.final_loss for t in traces if math.isfinite(t.final_loss)]
        writer.writerow([
            traces[0].algorithm, traces[0].degree, len(traces),
            float(np.mean(losses)) if losses else math.inf,
            float(np.mean(spans)), float(np.std(spans)),
            float(np.mean(duals)), float(np.std(duals)),
        ])
