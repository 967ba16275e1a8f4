"""Candidate filtering, validity checks and a uniform-grid worker index."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from staeb.model import (
    Instance,
    Matching,
    PairAssignment,
    Point,
    Task,
    Worker,
    extra_cost,
    skill_income,
    subsidy_function,
    travel_cost,
)

UNCOVERED_SKILL = "UNCOVERED_SKILL"
BUDGET_EXCEEDED = "BUDGET_EXCEEDED"
REDUNDANT_WORKER = "REDUNDANT_WORKER"
DUPLICATE_WORKER = "DUPLICATE_WORKER"
RANGE_EXCEEDED = "RANGE_EXCEEDED"
# Codes below cover malformed input that the five codes above cannot name.
INVALID_CREDIT = "INVALID_CREDIT"
EXTRA_COST_MISMATCH = "EXTRA_COST_MISMATCH"
UNKNOWN_ID = "UNKNOWN_ID"
DUPLICATE_TASK = "DUPLICATE_TASK"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def codes(self) -> set[str]:
        return {code for code, _ in self.violations}

    def __bool__(self):
        return self.ok


def within_budget(extras: Iterable[float], budget: float) -> bool:
    """Whether the summed extra costs fit in ``budget``.

    Every solver and the validator go through this one predicate so that a
    pair accepted during construction is never rejected on re-validation.
    """
    return math.fsum(extras) <= budget


def fits(e: float, left: float, extras: list, budget: float) -> bool:
    """Whether a member with extra cost ``e`` still fits.

    ``left`` is ``budget - sum(extras)``; the exact check only runs near the
    boundary.
    """
    return e <= left - 1e-6 or within_budget(extras + [e], budget)


class GridIndex:
    """Buckets workers into square cells of side ``cell_size`` meters."""

    def __init__(self, workers: Iterable[Worker], cell_size: float):
        if not cell_size > 0 or not math.isfinite(cell_size):
            raise ValueError(f"cell_size must be positive, got {cell_size}")
        self.cell_size = float(cell_size)
        self.workers = {w.id: w for w in workers}
        self.buckets: dict[tuple[int, int], list[tuple[str, float, float]]] = defaultdict(list)
        for w in sorted(self.workers.values(), key=lambda w: w.id):
            self.buckets[self.cell_of(w.location)].append((w.id, w.location.x, w.location.y))
        self.buckets = dict(self.buckets)

    def cell_of(self, p: Point) -> tuple[int, int]:
        return (math.floor(p.x / self.cell_size), math.floor(p.y / self.cell_size))

    def _cell(self, x: float, y: float) -> tuple[int, int]:
        return (math.floor(x / self.cell_size), math.floor(y / self.cell_size))

    def query(self, center: Point, radius: float) -> list[str]:
        """Ids of workers within ``radius`` of ``center``, ascending."""
        if radius < 0:
            return []
        cx, cy = center.x, center.y
        # pad so that rounding in hypot never drops a boundary point
        pad = radius * (1 + 1e-9) + 1e-9
        x0, y0 = self._cell(cx - pad, cy - pad)
        x1, y1 = self._cell(cx + pad, cy + pad)
        if (x1 - x0 + 1) * (y1 - y0 + 1) > len(self.buckets):
            cells = [c for c in self.buckets if x0 <= c[0] <= x1 and y0 <= c[1] <= y1]
        else:
            cells = [(i, j) for i in range(x0, x1 + 1) for j in range(y0, y1 + 1)]
        hypot = math.hypot
        found = []
        for cell in cells:
            for wid, x, y in self.buckets.get(cell, ()):
                if hypot(cx - x, cy - y) <= radius:
                    found.append(wid)
        found.sort()
        return found


def default_cell_size(tasks: Iterable[Task]) -> float:
    tasks = list(tasks)
    if not tasks:
        return 1.0
    size = max(t.fixed_radius for t in tasks) + max(t.extra_budget for t in tasks)
    return size if size > 0 else 1.0


def build_index(workers: Iterable[Worker], cell_size: float) -> GridIndex:
    return GridIndex(workers, cell_size)


def candidate_workers(
    index: GridIndex,
    task: Task,
    remaining_skills: Iterable[str],
    remaining_budget: float,
    available: Iterable[str],
) -> list[str]:
    """Available workers holding a remaining skill within r_t + remaining budget."""
    remaining = frozenset(remaining_skills)
    available = set(available)
    out = []
    for wid in index.query(task.location, task.fixed_radius + remaining_budget):
        if wid in available and index.workers[wid].skills & remaining:
            out.append(wid)
    return out


def validate_pair(task: Task | None, pair: PairAssignment, instance: Instance) -> ValidationReport:
    """Check one pair; every violation is reported, not just the first."""
    violations = []
    if task is None or task.id != pair.task_id or not instance.has_task(pair.task_id):
        return ValidationReport(((UNKNOWN_ID, f"unknown task {pair.task_id!r}"),))
    if not pair.members:
        violations.append((UNCOVERED_SKILL, f"task {task.id} has no members; missing {sorted(task.required_skills)}"))
    seen_workers = set()
    credited_by = {}
    extras = []
    for m in pair.members:
        if not instance.has_worker(m.worker_id):
            violations.append((UNKNOWN_ID, f"unknown worker {m.worker_id!r}"))
            continue
        worker = instance.worker(m.worker_id)
        if m.worker_id in seen_workers:
            violations.append((DUPLICATE_WORKER, f"worker {m.worker_id} listed twice in task {task.id}"))
        seen_workers.add(m.worker_id)
        if not m.credited_skills:
            violations.append((REDUNDANT_WORKER, f"worker {m.worker_id} is credited with no skill of task {task.id}"))
        bad = m.credited_skills - (worker.skills & task.required_skills)
        if bad:
            violations.append((INVALID_CREDIT, f"worker {m.worker_id} credited with {sorted(bad)} it cannot provide"))
        for s in sorted(m.credited_skills):
            if s in credited_by:
                violations.append((INVALID_CREDIT, f"skill {s} credited to both {credited_by[s]} and {m.worker_id}"))
            else:
                credited_by[s] = m.worker_id
        expected = extra_cost(task, worker)
        if m.extra_cost != expected:
            violations.append((EXTRA_COST_MISMATCH, f"worker {m.worker_id} extra cost {m.extra_cost} != {expected}"))
        if expected > task.extra_budget:
            violations.append(
                (RANGE_EXCEEDED, f"worker {m.worker_id} is {travel_cost(task.location, worker.location):.3f} m away, beyond r+b")
            )
        extras.append(expected)
    missing = task.required_skills - credited_by.keys()
    if pair.members and missing:
        violations.append((UNCOVERED_SKILL, f"task {task.id} skills {sorted(missing)} not covered"))
    if not within_budget(extras, task.extra_budget):
        violations.append((BUDGET_EXCEEDED, f"total extra cost {math.fsum(extras):.3f} > budget {task.extra_budget}"))
    return ValidationReport(tuple(violations))


def validate_matching(matching: Matching, instance: Instance) -> ValidationReport:
    violations = []
    owner = {}
    seen_tasks = set()
    for pair in matching.pairs:
        if pair.task_id in seen_tasks:
            violations.append((DUPLICATE_TASK, f"task {pair.task_id} appears in more than one pair"))
        seen_tasks.add(pair.task_id)
        task = instance.task(pair.task_id) if instance.has_task(pair.task_id) else None
        violations.extend(validate_pair(task, pair, instance).violations)
        for wid in set(pair.worker_ids):
            if wid in owner:
                violations.append((DUPLICATE_WORKER, f"worker {wid} assigned to {owner[wid]} and {pair.task_id}"))
            else:
                owner[wid] = pair.task_id
    return ValidationReport(tuple(violations))


@dataclass
class Neighborhoods:
    """Per-solve precomputation shared by the solvers.

    Skills are mapped to bit positions in catalog order. Workers are indexed
    in ascending id order, so smaller index means smaller id. Tasks keep the
    instance order; ``task_rank`` gives their position in id order.
    """

    instance: Instance
    index: GridIndex | None = None
    skill_bits: dict = field(init=False)
    income_of_bit: list = field(init=False)
    workers: list = field(init=False)
    tasks: list = field(init=False)

    def __post_init__(self):
        inst = self.instance
        params = inst.params
        skills = inst.catalog.skills
        self.skill_bits = {s: 1 << i for i, s in enumerate(skills)}
        self.income_of_bit = [skill_income(inst.catalog.fees[s], params) for s in skills]
        self.workers = sorted(inst.workers, key=lambda w: w.id)
        self.tasks = list(inst.tasks)
        self.worker_pos = {w.id: i for i, w in enumerate(self.workers)}
        self.task_pos = {t.id: i for i, t in enumerate(self.tasks)}
        by_id = sorted(range(len(self.tasks)), key=lambda i: self.tasks[i].id)
        self.task_rank = [0] * len(self.tasks)
        for rank, i in enumerate(by_id):
            self.task_rank[i] = rank
        self.wmask = [self.mask(w.skills) for w in self.workers]
        self.tmask = [self.mask(t.required_skills) for t in self.tasks]
        self._income_cache = {}

        if self.index is None:
            self.index = build_index(self.workers, default_cell_size(self.tasks))
        # cands[t]: workers w with a needed skill and e(t, w) <= b_t, as
        # (w, extra_cost, scaled subsidy), ascending w.
        self.cands = []
        self.by_skill = []
        self.extra = []
        self.worker_tasks = [[] for _ in self.workers]
        sub_of = subsidy_function(params)
        hypot = math.hypot
        wpos, wmask, workers = self.worker_pos, self.wmask, self.workers
        for ti, t in enumerate(self.tasks):
            tm = self.tmask[ti]
            tx, ty, r, b = t.location.x, t.location.y, t.fixed_radius, t.extra_budget
            entries = []
            for wid in self.index.query(t.location, t.max_range):
                wi = wpos.get(wid)
                if wi is None or not (wmask[wi] & tm):
                    continue
                loc = workers[wi].location
                # same arithmetic as model.extra_cost
                e = max(0.0, hypot(tx - loc.x, ty - loc.y) - r)
                if e > b:
                    continue
                entries.append((wi, e, sub_of(e)))
            entries.sort()
            self.cands.append(entries)
            self.extra.append({wi: (e, sub) for wi, e, sub in entries})
            self.by_skill.append({bit: [en for en in entries if wmask[en[0]] & bit] for bit in self.bits(tm)})
            for wi, _, _ in entries:
                self.worker_tasks[wi].append(ti)
        for lst in self.worker_tasks:
            lst.sort(key=lambda ti: self.task_rank[ti])

    def mask(self, skills) -> int:
        m = 0
        for s in skills:
            m |= self.skill_bits[s]
        return m

    @staticmethod
    def bits(mask: int):
        while mask:
            low = mask & -mask
            yield low
            mask ^= low

    def skills_of(self, mask: int) -> frozenset:
        return frozenset(s for s, b in self.skill_bits.items() if mask & b)

    def income(self, mask: int) -> int:
        val = self._income_cache.get(mask)
        if val is None:
            val = sum(self.income_of_bit[b.bit_length() - 1] for b in self.bits(mask))
            self._income_cache[mask] = val
        return val

    def make_pair(self, ti: int, members) -> PairAssignment:
        """Build a PairAssignment from internal (worker index, credited mask) members."""
        from staeb.model import Member

        out = []
        for wi, credited in members:
            out.append(Member(self.workers[wi].id, self.skills_of(credited), self.extra[ti][wi][0]))
        return PairAssignment(self.tasks[ti].id, tuple(out))

    def members_revenue(self, ti: int, members) -> int:
        ext = self.extra[ti]
        return sum(self.income(c) - ext[wi][1] for wi, c in members)
