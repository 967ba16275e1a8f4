"""Benchmark harness: single runs, parameter sweeps and CSV output."""

from __future__ import annotations

import csv
import io
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from decimal import Decimal

from staeb.feasibility import Neighborhoods, validate_matching
from staeb.game import GameConfig, solve_ebgt
from staeb.greedy import GreedyConfig, solve_greedy
from staeb.instances import GenConfig, generate_instance
from staeb.model import Instance, Matching, SolveReport, matching_revenue, member_revenue, to_money
from staeb.oracle import OracleLimits, OracleOverflow, solve_exact, solve_random

ALGORITHMS = ("random", "greedy", "ebgt", "exact")
AXES = ("tasks", "workers", "skills", "fixed_radius", "extra_budget")
SCHEMA_LINE = "# schema=run_row.v1"

FULL_VALUES = {
    "tasks": [800, 900, 1000, 1100, 1200],
    "workers": [2400, 2700, 3000, 3300, 3600],
    "skills": [10, 11, 12, 13, 14],
    "fixed_radius": [600, 800, 1000, 1200, 1400],
    "extra_budget": [(400, 600), (600, 800), (800, 1000), (1000, 1200), (1200, 1400)],
}
DESK_VALUES = dict(FULL_VALUES, tasks=[8, 16, 24], workers=[24, 48, 72])
DESK_BASE = GenConfig(num_tasks=16, num_workers=48, bounding_box=(0.0, 0.0, 4000.0, 4000.0))
DESK_SEEDS = 30


class InvariantViolation(AssertionError):
    """A solver produced an infeasible matching or an inconsistent revenue."""


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: list
    base: GenConfig = GenConfig()
    seeds: list = field(default_factory=lambda: list(range(DESK_SEEDS)))
    algorithms: tuple = ("random", "greedy", "ebgt")

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown axis {self.axis!r}; expected one of {AXES}")
        if not self.values:
            raise ValueError("axis values must be non-empty")
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ValueError(f"unknown algorithms {sorted(bad)}")

    def config_for(self, value, seed) -> GenConfig:
        return apply_axis(self.base, self.axis, value).with_(seed=seed)


def desk_spec(axis: str, seeds=None, algorithms=("random", "greedy", "ebgt")) -> SweepSpec:
    return SweepSpec(axis, DESK_VALUES[axis], DESK_BASE, list(range(DESK_SEEDS)) if seeds is None else list(seeds), tuple(algorithms))


def full_spec(axis: str, seeds=(0,), algorithms=("random", "greedy", "ebgt")) -> SweepSpec:
    return SweepSpec(axis, FULL_VALUES[axis], GenConfig(), list(seeds), tuple(algorithms))


def apply_axis(cfg: GenConfig, axis: str, value) -> GenConfig:
    if axis == "tasks":
        return cfg.with_(num_tasks=int(value))
    if axis == "workers":
        return cfg.with_(num_workers=int(value))
    if axis == "skills":
        return cfg.with_(num_skills=int(value))
    if axis == "fixed_radius":
        return cfg.with_(fixed_radius=float(value))
    if axis == "extra_budget":
        lo, hi = value
        return cfg.with_(extra_budget_range=(float(lo), float(hi)))
    raise ValueError(f"unknown axis {axis!r}")


def format_axis_value(value) -> str:
    if isinstance(value, (tuple, list)):
        return "-".join(format_axis_value(v) for v in value)
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


@dataclass
class RunRow:
    axis: str
    axis_value: str
    algorithm: str
    seed: int
    revenue: str
    matched_tasks: int
    total_tasks: int
    rounds: int
    nash_certified: str
    wall_millis: float
    mean_subsidy: str
    served_ratio: float
    revenue_spread: str
    uncompensated_extra: float
    status: str = "ok"

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]


TIMING_COLUMNS = ("wall_millis",)


def run_algorithm(
    instance: Instance,
    algorithm: str,
    seed: int = 0,
    *,
    nb: Neighborhoods | None = None,
    game_cfg: GameConfig = GameConfig(),
    greedy_cfg: GreedyConfig = GreedyConfig(),
    limits: OracleLimits = OracleLimits(),
) -> tuple[Matching, SolveReport]:
    if algorithm == "random":
        return solve_random(instance, seed, nb)
    if algorithm == "greedy":
        return solve_greedy(instance, greedy_cfg, nb)
    if algorithm == "ebgt":
        return solve_ebgt(instance, game_cfg, nb)
    if algorithm == "exact":
        return solve_exact(instance, limits, nb)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def split_windows(instance: Instance, window: float) -> list[Instance]:
    """Sub-instances holding the tasks and workers arriving in each time window."""
    if not window > 0:
        raise ValueError("batch window must be positive")
    slots: dict[int, tuple[list, list]] = {}
    for t in instance.tasks:
        slots.setdefault(math.floor(t.arrival_time / window), ([], []))[0].append(t)
    for w in instance.workers:
        slots.setdefault(math.floor(w.arrival_time / window), ([], []))[1].append(w)
    return [instance.replace(tasks=tuple(ts), workers=tuple(ws)) for _, (ts, ws) in sorted(slots.items())]


def run_batched(instance: Instance, algorithm: str, seed: int, window: float | None, **kw):
    """Solve each arrival window independently and merge the results."""
    if window is None:
        return run_algorithm(instance, algorithm, seed, **kw)
    kw.pop("nb", None)
    pairs, reports = [], []
    for part in split_windows(instance, window):
        m, r = run_algorithm(part, algorithm, seed, **kw)
        pairs.extend(m.pairs)
        reports.append(r)
    matching = Matching(tuple(pairs))
    nash = [r.nash_certified for r in reports if r.nash_certified is not None]
    report = SolveReport(
        algorithm=algorithm,
        revenue=sum(r.revenue for r in reports),
        matched_tasks=len(matching),
        total_tasks=len(instance.tasks),
        wall_seconds=sum(r.wall_seconds for r in reports),
        rounds=sum(r.rounds for r in reports),
        moves=sum(r.moves for r in reports),
        nash_certified=all(nash) if nash else None,
        round_cap_hit=any(r.round_cap_hit for r in reports),
        extra={"windows": len(reports)},
    )
    return matching, report


def fairness(matching: Matching, instance: Instance) -> tuple[Decimal, Decimal, float]:
    """(mean subsidy per assigned worker, population std of worker revenues, uncompensated extra meters)."""
    params = instance.params
    subsidies, revenues = [], []
    uncompensated = 0.0
    for pair in matching.pairs:
        task = instance.task(pair.task_id)
        total = math.fsum(m.extra_cost for m in pair.members)
        uncompensated += max(0.0, total - task.extra_budget)
        for m in pair.members:
            subsidies.append(params.beta * Decimal(repr(m.extra_cost)))
            revenues.append(to_money(member_revenue(m, instance), params))
    mean_sub = (sum(subsidies, Decimal(0)) / len(subsidies)) if subsidies else Decimal(0)
    spread = Decimal(str(statistics.pstdev(revenues))) if len(revenues) > 1 else Decimal(0)
    return mean_sub, spread, uncompensated


def make_row(instance, matching, report, *, axis="", axis_value="", seed=0) -> RunRow:
    """Re-validate the matching and derive every reported number from it."""
    check = validate_matching(matching, instance)
    if not check.ok:
        raise InvariantViolation(f"{report.algorithm} produced an infeasible matching: {check.violations[:3]}")
    revenue = matching_revenue(matching, instance)
    if revenue != report.revenue:
        raise InvariantViolation(f"{report.algorithm} reported revenue {report.revenue}, recomputed {revenue}")
    mean_sub, spread, uncompensated = fairness(matching, instance)
    if uncompensated != 0:
        raise InvariantViolation("a worker's extra travel is not covered by the task budget")
    total = len(instance.tasks)
    return RunRow(
        axis=axis,
        axis_value=axis_value,
        algorithm=report.algorithm,
        seed=seed,
        revenue=str(to_money(revenue, instance.params)),
        matched_tasks=len(matching),
        total_tasks=total,
        rounds=report.rounds,
        nash_certified="" if report.nash_certified is None else str(report.nash_certified).lower(),
        wall_millis=round(report.wall_seconds * 1000, 3),
        mean_subsidy=str(mean_sub.quantize(Decimal("0.001"))),
        served_ratio=round(len(matching) / total, 6) if total else 0.0,
        revenue_spread=str(spread.quantize(Decimal("0.001"))),
        uncompensated_extra=uncompensated,
    )


def overflow_row(instance, algorithm, *, axis="", axis_value="", seed=0, status="oracle_overflow") -> RunRow:
    return RunRow(axis, axis_value, algorithm, seed, "", 0, len(instance.tasks), 0, "", 0.0, "", 0.0, "", 0.0, status)


def _run_cell(args):
    spec, value, seed, game_cfg, limits, window = args
    instance = generate_instance(spec.config_for(value, seed))
    nb = Neighborhoods(instance) if window is None else None
    label = format_axis_value(value)
    rows = []
    for algo in spec.algorithms:
        try:
            matching, report = run_batched(instance, algo, seed, window, nb=nb, game_cfg=game_cfg, limits=limits)
            rows.append(make_row(instance, matching, report, axis=spec.axis, axis_value=label, seed=seed))
        except OracleOverflow:
            rows.append(overflow_row(instance, algo, axis=spec.axis, axis_value=label, seed=seed))
        except InvariantViolation:
            rows.append(overflow_row(instance, algo, axis=spec.axis, axis_value=label, seed=seed, status="invariant_violation"))
        except Exception as exc:  # recorded per row; the sweep carries on
            rows.append(overflow_row(instance, algo, axis=spec.axis, axis_value=label, seed=seed, status=f"error:{type(exc).__name__}"))
    return rows


class CsvSink:
    """Append-only CSV writer with a fixed, versioned header."""

    def __init__(self, path=None, stream=None):
        self.path = path
        self.stream = stream
        cols = RunRow.columns()
        if path is not None:
            fresh = not os.path.exists(path) or os.path.getsize(path) == 0
            if not fresh:
                with open(path, newline="") as fh:
                    first = fh.readline().rstrip("\r\n")
                    second = fh.readline().rstrip("\r\n")
                if first != SCHEMA_LINE or second != ",".join(cols):
                    raise ValueError(f"{path} has a different CSV schema; refusing to append")
            self.stream = open(path, "a", newline="")
            if fresh:
                self._write_raw(SCHEMA_LINE + "\n" + ",".join(cols) + "\n")
        elif stream is not None:
            self._write_raw(SCHEMA_LINE + "\n" + ",".join(cols) + "\n")

    def _write_raw(self, text):
        self.stream.write(text)
        self.stream.flush()

    def write(self, row: RunRow):
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow([getattr(row, c) for c in RunRow.columns()])
        self._write_raw(buf.getvalue())

    def close(self):
        if self.path is not None and self.stream is not None:
            self.stream.close()


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\r\n")
        if first != SCHEMA_LINE:
            raise ValueError(f"{path} is not a {SCHEMA_LINE[2:]} file")
        return list(csv.DictReader(fh))


def run_sweep(
    spec: SweepSpec,
    out_path=None,
    *,
    jobs: int = 1,
    game_cfg: GameConfig = GameConfig(),
    limits: OracleLimits = OracleLimits(),
    batch_window: float | None = None,
    stream=None,
    summary=True,
) -> list[RunRow]:
    sink = CsvSink(out_path, stream) if (out_path is not None or stream is not None) else None
    cells = [(spec, v, s, game_cfg, limits, batch_window) for v in spec.values for s in spec.seeds]
    rows: list[RunRow] = []
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                batches = pool.map(_run_cell, cells)
                for batch in batches:
                    for row in batch:
                        rows.append(row)
                        if sink:
                            sink.write(row)
        else:
            for cell in cells:
                for row in _run_cell(cell):
                    rows.append(row)
                    if sink:
                        sink.write(row)
    finally:
        if sink:
            sink.close()
    if summary:
        print(summary_table(rows))
    return rows


def cell_means(rows) -> dict[tuple[str, str], Decimal]:
    """Mean revenue per (axis value, algorithm) over successful rows."""
    acc: dict[tuple[str, str], list[Decimal]] = {}
    for r in rows:
        r = asdict(r) if isinstance(r, RunRow) else r
        if r["status"] != "ok":
            continue
        acc.setdefault((r["axis_value"], r["algorithm"]), []).append(Decimal(r["revenue"]))
    return {k: sum(v, Decimal(0)) / len(v) for k, v in acc.items()}


def summary_table(rows) -> str:
    means = cell_means(rows)
    values = list(dict.fromkeys(k[0] for k in means))
    algos = [a for a in ALGORITHMS if any(k[1] == a for k in means)]
    lines = ["axis_value  " + "".join(f"{a:>14}" for a in algos)]
    for v in values:
        cells = "".join(f"{means[(v, a)]:>14.3f}" if (v, a) in means else f"{'-':>14}" for a in algos)
        lines.append(f"{v:<12}" + cells)
    return "\n".join(lines)


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start
