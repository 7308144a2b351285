import json
import math

import numpy as np
import pytest

from ftg import (
    AggregateStats,
    RunRecord,
    TOLERANCES,
    aggregate,
    emit,
    first_hits,
    heatmap_delta,
    load_problems,
    run_single,
    run_sweep,
)
from ftg.harness import HeatmapCell, derive_rng, read_records, read_stats, write_heatmap, \
    write_records, write_stats


def test_problem_table_contents():
    problems = load_problems()
    assert len(problems) == 9
    names = [p.name for p in problems]
    assert names == ["koza1", "koza2", "koza3", "nguyen3", "nguyen4", "nguyen5",
                     "nguyen6", "nguyen7", "nguyen8"]
    koza1 = problems[0]
    assert koza1.target(np.array([1.0]))[0] == 4.0  # 1 + 1 + 1 + 1
    assert koza1.bounds == (-1.0, 1.0)
    assert problems[8].bounds == (0.0, 4.0)
    assert problems[7].bounds == (0.0, 2.0)
    assert all(p.n_points == 20 for p in problems)


def test_first_hits_reads_a_single_trajectory():
    traj = [(3, 0.5), (10, 0.05), (20, 0.002), (120, 1e-9)]
    hits = first_hits(traj, [1.0, 0.1, 0.01, 1e-8], budget=100)
    assert hits == {1.0: 3.0, 0.1: 10.0, 0.01: 20.0, 1e-8: math.inf}


def test_first_hits_require_strict_improvement_below_tolerance():
    hits = first_hits([(5, 0.1)], [0.1], budget=100)
    assert hits == {0.1: math.inf}  # equality is not a hit


@pytest.mark.invariants
def test_first_hits_are_monotone_in_tolerance():
    rng = np.random.default_rng(0)
    for _ in range(200):
        stamps = np.cumsum(rng.integers(1, 10, size=30))
        losses = np.abs(rng.normal(size=30)) * 10.0 ** -rng.integers(0, 6, size=30)
        hits = first_hits(list(zip(stamps, losses)), TOLERANCES, budget=10_000)
        ordered = [hits[t] for t in sorted(TOLERANCES, reverse=True)]
        assert all(b >= a for a, b in zip(ordered, ordered[1:]))


def test_constant_projection_hit_is_stamped_at_three():
    spec = load_problems()[2]  # koza3 targets stay well inside the unit band
    for run_index in range(5):
        record = run_single(spec, "ftg", run_index, budget=10_000, master_seed=1)
        assert record.fe_by_tolerance[1.0] == 3.0


def test_datasets_are_shared_across_algorithms():
    spec = load_problems()[1]
    a = spec.sample(derive_rng(7, spec.index, 4, 0))
    b = spec.sample(derive_rng(7, spec.index, 4, 0))
    assert np.array_equal(a.data.points, b.data.points)
    assert np.array_equal(a.data.targets, b.data.targets)
    other_run = spec.sample(derive_rng(7, spec.index, 5, 0))
    assert not np.array_equal(a.data.points, other_run.data.points)


def test_sweep_is_deterministic_and_worker_invariant():
    problems = load_problems()[:1]
    serial = run_sweep(problems, ["ftg"], runs=3, budget=400, master_seed=5)
    again = run_sweep(problems, ["ftg"], runs=3, budget=400, master_seed=5)
    parallel = run_sweep(problems, ["ftg"], runs=3, budget=400, master_seed=5, workers=2)
    assert [r.to_dict() for r in serial] == [r.to_dict() for r in again]
    assert [r.to_dict() for r in serial] == [r.to_dict() for r in parallel]


def test_sweep_writes_records_and_snapshots(tmp_path):
    problems = load_problems()[:1]
    out = tmp_path / "sweep"
    records = run_sweep(problems, ["ftg"], runs=2, budget=300, master_seed=3,
                        out_dir=str(out))
    stored = read_records(str(out / "records.json"))
    assert [r.to_dict() for r in stored] == [r.to_dict() for r in records]
    assert (out / "datasets" / "koza1_run000.csv").exists()
    assert (out / "datasets" / "koza1_run001.csv").exists()


def make_record(problem, algorithm, run_index, fe):
    return RunRecord(problem=problem, algorithm=algorithm, run_index=run_index,
                     master_seed=1, budget=1000.0, fe_by_tolerance=fe, final_loss=0.5)


def test_aggregate_hand_computed_cell():
    records = [make_record("koza1", "ftg", i, {0.1: fe})
               for i, fe in enumerate([10.0, 20.0, 30.0])]
    (cell,) = aggregate(records)
    assert cell.mean_fe == pytest.approx(20.0)
    assert cell.sd == pytest.approx(math.sqrt(200.0 / 3.0))  # population convention
    assert cell.sem == pytest.approx(cell.sd / math.sqrt(3))
    assert (cell.q1, cell.median, cell.q3) == (15.0, 20.0, 25.0)
    assert cell.success_rate == 100.0


def test_aggregate_single_success_and_all_misses():
    lone = [make_record("koza1", "ftg", 0, {0.1: 5.0})]
    (cell,) = aggregate(lone)
    assert (cell.q1, cell.median, cell.q3) == (5.0, 5.0, 5.0)
    assert cell.sd == 0.0 and cell.sem == 0.0

    misses = [make_record("koza1", "gp11", i, {0.1: math.inf}) for i in range(4)]
    (cell,) = aggregate(misses)
    assert cell.mean_fe == math.inf
    assert cell.sd == 0.0 and cell.sem == 0.0
    assert cell.median == math.inf
    assert cell.success_rate == 0.0


def test_aggregate_success_counts_partial():
    fes = [5.0, math.inf, 15.0, math.inf]
    records = [make_record("koza1", "ftg", i, {0.1: fe}) for i, fe in enumerate(fes)]
    (cell,) = aggregate(records)
    assert cell.success_rate == 50.0
    assert cell.mean_fe == pytest.approx(10.0)


def test_success_rate_is_monotone_in_tolerance():
    # tighter tolerances can only lose hits along one trajectory
    problems = load_problems()[:2]
    records = run_sweep(problems, ["ftg"], runs=6, budget=2000, master_seed=9)
    stats = aggregate(records)
    for problem in ("koza1", "koza2"):
        rates = [s.success_rate for s in stats if s.problem == problem]
        tols = [s.tolerance for s in stats if s.problem == problem]
        paired = sorted(zip(tols, rates), reverse=True)
        values = [r for _, r in paired]
        assert all(b <= a for a, b in zip(values, values[1:]))


def test_heatmap_paper_style_cell():
    stats = [
        AggregateStats("koza1", "ftg", 0.01, 210.79, 499.682, 49.968,
                       117.75, 143.5, 198.25, 100.0),
        AggregateStats("koza1", "gp11", 0.01, 20535.662, 22551.856, 2570.023,
                       4941.0, 13087.0, 24691.0, 77.0),
        AggregateStats("koza1", "gp1l", 0.01, 21470.88, 18044.348, 1980.624,
                       8251.0, 15501.0, 29001.0, 83.0),
        AggregateStats("koza1", "canonical", 0.01, 25704.898, 15474.615, 1563.172,
                       16062.5, 21167.0, 31749.5, 98.0),
    ]
    (cell,) = heatmap_delta(stats)
    assert cell.success_diff == pytest.approx(2.0)   # 100 against the best GP's 98
    assert cell.median_ratio == pytest.approx(143.5 / 13087.0)


def test_heatmap_identical_stats_gives_zero_and_one():
    row = AggregateStats("koza1", "ftg", 0.1, 10.0, 1.0, 0.5, 9.0, 10.0, 11.0, 90.0)
    twin = AggregateStats("koza1", "gp11", 0.1, 10.0, 1.0, 0.5, 9.0, 10.0, 11.0, 90.0)
    (cell,) = heatmap_delta([row, twin])
    assert cell.success_diff == 0.0
    assert cell.median_ratio == 1.0


def test_heatmap_sentinels():
    ftg_inf = AggregateStats("p", "ftg", 0.1, math.inf, 0, 0, math.inf, math.inf,
                             math.inf, 0.0)
    gp = AggregateStats("p", "gp11", 0.1, 5.0, 0, 0, 5.0, 5.0, 5.0, 100.0)
    (cell,) = heatmap_delta([ftg_inf, gp])
    assert cell.median_ratio == math.inf
    ftg_fin = AggregateStats("p", "ftg", 0.1, 5.0, 0, 0, 5.0, 5.0, 5.0, 100.0)
    gp_inf = AggregateStats("p", "gp11", 0.1, math.inf, 0, 0, math.inf, math.inf,
                            math.inf, 0.0)
    (cell,) = heatmap_delta([ftg_fin, gp_inf])
    assert cell.median_ratio == 0.0
    with pytest.raises(ValueError):
        heatmap_delta([gp])


def test_records_round_trip_json(tmp_path):
    records = [make_record("koza1", "ftg", i, {t: float(i + 3) if t > 1e-5 else math.inf
                                               for t in TOLERANCES})
               for i in range(3)]
    records[0].model = "(* 2.0 1.0)"
    records[0].trace = [(3, 1.5), (10, 0.01)]
    path = tmp_path / "records.json"
    emit(records, str(path))
    back = read_records(str(path))
    assert [r.to_dict() for r in back] == [r.to_dict() for r in records]
    # misses serialize as the literal string "inf"
    assert '"inf"' in path.read_text()


def test_records_round_trip_csv(tmp_path):
    records = [make_record("koza1", "ftg", i, {1.0: 3.0, 1e-8: math.inf})
               for i in range(2)]
    path = tmp_path / "records.csv"
    write_records(records, str(path))
    back = read_records(str(path))
    for orig, copy in zip(records, back):
        assert copy.problem == orig.problem
        assert copy.fe_by_tolerance == orig.fe_by_tolerance
        assert copy.final_loss == orig.final_loss
    assert "inf" in path.read_text()


def test_stats_csv_header_and_round_trip(tmp_path):
    records = [make_record("koza1", "ftg", i, {0.1: 10.0 * (i + 1)}) for i in range(3)]
    stats = aggregate(records)
    path = tmp_path / "stats.csv"
    emit(stats, str(path))
    header = path.read_text().splitlines()[0]
    assert header == "problem,algorithm,tolerance,mean_fe,sd,sem,q1,median,q3,success_rate"
    assert read_stats(str(path)) == stats
    jpath = tmp_path / "stats.json"
    write_stats(stats, str(jpath))
    assert read_stats(str(jpath)) == stats


def test_full_sweep_cardinality():
    # 9 problems x 4 algorithms x 9 tolerances makes 324 table cells
    rng = np.random.default_rng(1)
    records = []
    for spec in load_problems():
        for algo in ("ftg", "gp11", "gp1l", "canonical"):
            for i in range(2):
                fe = {t: float(rng.integers(3, 1000)) for t in TOLERANCES}
                records.append(make_record(spec.name, algo, i, fe))
    stats = aggregate(records)
    assert len(stats) == 324


def test_heatmap_csv(tmp_path):
    cells = [HeatmapCell("koza1", 0.1, 2.0, 0.01), HeatmapCell("koza2", 0.1, 0.0, 1.0)]
    path = tmp_path / "heat.csv"
    write_heatmap(cells, str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "problem,tolerance,success_diff,median_ratio"
    assert len(lines) == 3


def test_repeated_sweeps_are_byte_identical(tmp_path):
    problems = load_problems()[:1]
    texts = []
    for attempt in range(2):
        out = tmp_path / f"try{attempt}"
        records = run_sweep(problems, ["ftg"], runs=2, budget=300, master_seed=11,
                            out_dir=str(out))
        stats = aggregate(records)
        write_stats(stats, str(out / "stats.csv"))
        texts.append((out / "records.json").read_text()
                     + (out / "stats.csv").read_text())
    assert texts[0] == texts[1]


@pytest.mark.invariants
def test_records_reproduce_exactly_per_master_seed():
    spec = load_problems()[2]
    for seed in range(1000):
        first = run_single(spec, "ftg", 0, budget=60, master_seed=seed)
        second = run_single(spec, "ftg", 0, budget=60, master_seed=seed)
        assert first.to_dict() == second.to_dict()


@pytest.mark.invariants
def test_run_datasets_depend_only_on_problem_and_run():
    specs = load_problems()
    rng = np.random.default_rng(13)
    for _ in range(1000):
        spec = specs[int(rng.integers(len(specs)))]
        run_index = int(rng.integers(50))
        seed = int(rng.integers(100))
        a = spec.sample(derive_rng(seed, spec.index, run_index, 0))
        b = spec.sample(derive_rng(seed, spec.index, run_index, 0))
        assert np.array_equal(a.data.points, b.data.points)
        assert np.array_equal(a.data.targets, b.data.targets)


def test_extension_log_round_trip(tmp_path):
    spec = load_problems()[0]
    record = run_single(spec, "ftg", 0, budget=500, master_seed=2, collect_trace=True)
    assert record.extensions, "projection runs log every attempted extension"
    ks = [k for k, _, accepted, _ in record.extensions if accepted]
    assert ks == list(range(1, len(ks) + 1))  # accepted sizes grow one at a time
    from ftg.harness import write_extension_log
    path = tmp_path / "ext.csv"
    write_extension_log(record, str(path))
    assert path.read_text().startswith("basis_size,cond_estimate,accepted,traversals")
    json_path = tmp_path / "rec.json"
    write_records([record], str(json_path))
    (back,) = read_records(str(json_path))
    assert back.extensions == record.extensions
