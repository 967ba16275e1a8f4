"""Random baseline and exact brute-force solver.

The exact solver enumerates every valid worker set of every task, joins two
sets by an edge when they serve the same task or share a worker, and takes a
maximum-weight independent set of that conflict graph by branch and bound.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass

from staeb.feasibility import Neighborhoods, fits, within_budget
from staeb.model import (
    Instance,
    Matching,
    PairAssignment,
    SolveReport,
    StaebError,
    Task,
    Worker,
    matching_revenue,
)


class OracleOverflow(StaebError):
    """The instance is too large for exhaustive solving."""


@dataclass(frozen=True)
class OracleLimits:
    max_tasks: int = 6
    max_workers: int = 12
    max_valid_sets_per_task: int = 5000
    time_budget: float = 30.0

    def __post_init__(self):
        for name in ("max_tasks", "max_workers", "max_valid_sets_per_task", "time_budget"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def parse(cls, text: str) -> "OracleLimits":
        """Parse ``tasks=4,workers=8,sets=5000,time=10``."""
        keys = {"tasks": "max_tasks", "workers": "max_workers", "sets": "max_valid_sets_per_task", "time": "time_budget"}
        kwargs = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            key, _, value = part.partition("=")
            if key not in keys or not value:
                raise ValueError(f"bad oracle limit {part!r}; expected one of {sorted(keys)}")
            kwargs[keys[key]] = float(value) if key == "time" else int(value)
        return cls(**kwargs)


def solve_random(instance: Instance, seed: int, nb: Neighborhoods | None = None):
    """Seeded random baseline.

    Tasks are shuffled; each task covers its skills in catalog order, taking a
    uniformly random reachable idle holder of each still-missing skill and
    crediting it with everything it covers. A task that cannot be covered
    hands its workers back.
    """
    start = time.perf_counter()
    nb = nb or Neighborhoods(instance)
    rng = random.Random(seed)
    order = sorted(range(len(nb.tasks)), key=lambda ti: nb.tasks[ti].id)
    rng.shuffle(order)
    free = [True] * len(nb.workers)
    pairs = []
    for ti in order:
        budget = nb.tasks[ti].extra_budget
        uncovered = nb.tmask[ti]
        members, extras = [], []
        left = budget
        ok = True
        for bit in nb.bits(nb.tmask[ti]):
            if not uncovered & bit:
                continue
            options = [
                (wi, e)
                for wi, e, _ in nb.by_skill[ti][bit]
                if free[wi] and fits(e, left, extras, budget)
            ]
            if not options:
                ok = False
                break
            wi, e = rng.choice(options)
            credit = nb.wmask[wi] & uncovered
            uncovered &= ~credit
            members.append((wi, credit))
            extras.append(e)
            left = budget - sum(extras)
            free[wi] = False
        if ok:
            pairs.append(nb.make_pair(ti, members))
        else:
            for wi, _ in members:
                free[wi] = True
    matching = Matching(tuple(pairs))
    elapsed = time.perf_counter() - start
    report = SolveReport(
        algorithm="random",
        revenue=matching_revenue(matching, instance),
        matched_tasks=len(matching),
        total_tasks=len(instance.tasks),
        wall_seconds=elapsed,
        extra={"seed": seed},
    )
    return matching, report


def _distinct_representatives(options: list[int]) -> list[int] | None:
    """One distinct skill bit per member from its option mask (augmenting paths)."""
    owner: dict[int, int] = {}

    def augment(i, seen):
        for bit in Neighborhoods.bits(options[i]):
            if bit in seen:
                continue
            seen.add(bit)
            if bit not in owner or augment(owner[bit], seen):
                owner[bit] = i
                return True
        return False

    for i in range(len(options)):
        if not augment(i, set()):
            return None
    rep = [0] * len(options)
    for bit, i in owner.items():
        rep[i] = bit
    return rep


def _valid_sets(nb: Neighborhoods, ti: int, pool, limits: OracleLimits, deadline: float | None = None):
    """Internal enumeration: list of member lists [(worker index, credited mask)]."""
    task = nb.tasks[ti]
    need = nb.tmask[ti]
    cands = [(wi, e) for wi, e, _ in nb.cands[ti] if wi in pool]
    out = []
    for size in range(1, min(need.bit_count(), len(cands)) + 1):
        for combo in itertools.combinations(cands, size):
            if deadline is not None and time.perf_counter() > deadline:
                raise OracleOverflow("time budget exhausted during enumeration")
            union = 0
            for wi, _ in combo:
                union |= nb.wmask[wi]
            if union & need != need:
                continue
            if not within_budget([e for _, e in combo], task.extra_budget):
                continue
            options = [nb.wmask[wi] & need for wi, _ in combo]
            rep = _distinct_representatives(options)
            if rep is None:
                continue
            # every member keeps its representative skill; leftover skills go
            # to the first member holding them
            credits = list(rep)
            leftover = need
            for r in rep:
                leftover &= ~r
            for bit in nb.bits(leftover):
                for i, opt in enumerate(options):
                    if opt & bit:
                        credits[i] |= bit
                        break
            out.append([(wi, credits[i]) for i, (wi, _) in enumerate(combo)])
            if len(out) > limits.max_valid_sets_per_task:
                raise OracleOverflow(
                    f"task {task.id} has more than {limits.max_valid_sets_per_task} valid worker sets"
                )
    return out


def enumerate_valid_sets(
    task: Task, workers, instance: Instance, limits: OracleLimits = OracleLimits()
) -> list[PairAssignment]:
    """Every worker set drawn from ``workers`` that can validly serve ``task``.

    A set qualifies when its members' skills cover the task, the summed extra
    cost fits the budget, and each member can be credited with at least one
    required skill no other member is credited with.
    """
    nb = Neighborhoods(instance)
    pool = {nb.worker_pos[w.id if isinstance(w, Worker) else w] for w in workers}
    ti = nb.task_pos[task.id]
    return [nb.make_pair(ti, members) for members in _valid_sets(nb, ti, pool, limits)]


def max_weight_independent_set(weights, neighbors, cliques, deadline=None):
    """Branch and bound for a maximum-weight independent set.

    ``neighbors[v]`` is a bitmask of the vertices adjacent to ``v`` and
    ``cliques`` is a list of vertex lists covering every vertex, each forming a
    clique; the bound adds, per clique, the heaviest still-eligible vertex.
    Only positive-weight vertices are ever chosen. Returns (weight, vertices).
    """
    n = len(weights)
    order = sorted(
        (v for v in range(n) if weights[v] > 0),
        key=lambda v: (-weights[v] / (1 + neighbors[v].bit_count()), v),
    )
    clique_lists = [sorted((v for v in c if weights[v] > 0), key=lambda v: -weights[v]) for c in cliques]
    clique_lists = [c for c in clique_lists if c]
    best_w = 0
    best_set: list[int] = []
    calls = 0

    def bound(cand):
        total = 0
        for clique in clique_lists:
            for v in clique:
                if cand >> v & 1:
                    total += weights[v]
                    break
        return total

    def search(cand, value, chosen):
        nonlocal best_w, best_set, calls
        calls += 1
        if deadline is not None and calls % 256 == 0 and time.perf_counter() > deadline:
            raise OracleOverflow("time budget exhausted during branch and bound")
        if not cand:
            if value > best_w:
                best_w, best_set = value, list(chosen)
            return
        if value + bound(cand) <= best_w:
            return
        v = next(u for u in order if cand >> u & 1)
        chosen.append(v)
        search(cand & ~neighbors[v] & ~(1 << v), value + weights[v], chosen)
        chosen.pop()
        search(cand & ~(1 << v), value, chosen)

    start = 0
    for v in order:
        start |= 1 << v
    search(start, 0, [])
    return best_w, sorted(best_set)


def solve_exact(instance: Instance, limits: OracleLimits = OracleLimits(), nb: Neighborhoods | None = None):
    start = time.perf_counter()
    deadline = start + limits.time_budget
    if len(instance.tasks) > limits.max_tasks:
        raise OracleOverflow(f"{len(instance.tasks)} tasks exceeds limit {limits.max_tasks}")
    if len(instance.workers) > limits.max_workers:
        raise OracleOverflow(f"{len(instance.workers)} workers exceeds limit {limits.max_workers}")
    nb = nb or Neighborhoods(instance)
    pool = set(range(len(nb.workers)))
    vertices = []  # (task index, members)
    cliques = []
    group_of = {}
    for ti in sorted(range(len(nb.tasks)), key=lambda i: nb.tasks[i].id):
        group = []
        for members in _valid_sets(nb, ti, pool, limits, deadline):
            group.append(len(vertices))
            vertices.append((ti, members))
        cliques.append(group)
        group_of[ti] = group
    weights = [nb.members_revenue(ti, members) for ti, members in vertices]
    holders: dict[int, int] = {}
    for v, (_, members) in enumerate(vertices):
        for wi, _ in members:
            holders[wi] = holders.get(wi, 0) | (1 << v)
    neighbors = []
    for v, (ti, members) in enumerate(vertices):
        mask = 0
        for u in group_of[ti]:
            mask |= 1 << u
        for wi, _ in members:
            mask |= holders[wi]
        neighbors.append(mask & ~(1 << v))
    best, chosen = max_weight_independent_set(weights, neighbors, cliques, deadline)
    matching = Matching(tuple(nb.make_pair(vertices[v][0], vertices[v][1]) for v in chosen))
    elapsed = time.perf_counter() - start
    revenue = matching_revenue(matching, instance)
    if revenue != best:
        raise AssertionError("oracle weight disagrees with recomputed revenue")
    report = SolveReport(
        algorithm="exact",
        revenue=revenue,
        matched_tasks=len(matching),
        total_tasks=len(instance.tasks),
        wall_seconds=elapsed,
        extra={"vertices": len(vertices)},
    )
    return matching, report

