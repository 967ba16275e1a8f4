"""Greedy set-cover heuristic.

Tasks are visited once, in descending order of average skill fee. Each task
repeatedly takes the reachable worker covering the most of its still-missing
skills until it is covered or no candidate is left, in which case the
workers picked so far are handed back.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from decimal import Decimal

from staeb.feasibility import GridIndex, Neighborhoods, fits
from staeb.model import Instance, Matching, PairAssignment, SkillCatalog, SolveReport, Task, matching_revenue

TIE_BREAK_RULES = (
    # most skills, then smallest extra cost, then smallest worker id
    "skills-extra-id",
    # most skills, then smallest worker id
    "skills-id",
)


@dataclass(frozen=True)
class GreedyConfig:
    tie_break: str = "skills-extra-id"

    def __post_init__(self):
        if self.tie_break not in TIE_BREAK_RULES:
            raise ValueError(f"unknown tie_break {self.tie_break!r}; expected one of {TIE_BREAK_RULES}")


def average_fee(task: Task, catalog: SkillCatalog) -> Decimal:
    return catalog.fee_sum(task.required_skills) / len(task.required_skills)


def rank_tasks(tasks, catalog: SkillCatalog) -> list[str]:
    """Task ids by descending average skill fee, ties by ascending id."""
    return [t.id for t in sorted(tasks, key=lambda t: (-average_fee(t, catalog), t.id))]


def _pick_members(nb: Neighborhoods, ti: int, free, use_extra: bool):
    """Run the cover loop for one task. Returns internal members or None."""
    task = nb.tasks[ti]
    budget = task.extra_budget
    wmask = nb.wmask
    remaining = nb.tmask[ti]
    extras = []
    members = []
    left = budget
    while remaining:
        best = None
        best_key = None
        for wi, e, _ in nb.cands[ti]:
            if not free[wi]:
                continue
            cover = wmask[wi] & remaining
            if not cover:
                continue
            if not fits(e, left, extras, budget):
                continue
            key = (cover.bit_count(), -e if use_extra else 0.0, -wi)
            if best_key is None or key > best_key:
                best_key, best = key, (wi, e, cover)
        if best is None:
            for wi, _ in members:
                free[wi] = True
            return None
        wi, e, cover = best
        members.append((wi, cover))
        extras.append(e)
        left = budget - sum(extras)
        remaining &= ~cover
        free[wi] = False
    return members


def assign_task_greedy(
    task: Task,
    available: set,
    index: GridIndex | None,
    instance: Instance,
    cfg: GreedyConfig = GreedyConfig(),
) -> PairAssignment | None:
    """Cover one task from ``available`` worker ids.

    On success the chosen workers are removed from ``available``; on failure
    ``available`` is left exactly as it was.
    """
    nb = Neighborhoods(instance, index)
    ti = nb.task_pos[task.id]
    free = [w.id in available for w in nb.workers]
    members = _pick_members(nb, ti, free, cfg.tie_break == "skills-extra-id")
    if members is None:
        return None
    for wi, _ in members:
        available.discard(nb.workers[wi].id)
    return nb.make_pair(ti, members)


def solve_greedy(instance: Instance, cfg: GreedyConfig = GreedyConfig(), nb: Neighborhoods | None = None):
    start = time.perf_counter()
    if nb is None:
        nb = Neighborhoods(instance)
    use_extra = cfg.tie_break == "skills-extra-id"
    free = [True] * len(nb.workers)
    pairs = []
    for tid in rank_tasks(nb.tasks, instance.catalog):
        ti = nb.task_pos[tid]
        members = _pick_members(nb, ti, free, use_extra)
        if members is not None:
            pairs.append(nb.make_pair(ti, members))
    matching = Matching(tuple(pairs))
    elapsed = time.perf_counter() - start
    report = SolveReport(
        algorithm="greedy",
        revenue=matching_revenue(matching, instance),
        matched_tasks=len(matching),
        total_tasks=len(instance.tasks),
        wall_seconds=elapsed,
    )
    return matching, report
