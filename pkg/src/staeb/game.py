"""Best-response dynamics over the assignment game.

Each worker is a player whose strategy is a task (or staying idle). The
potential of a joint strategy is the total platform revenue of the matching
it induces, and a worker's utility for a deviation is defined as the change
in that total, so every applied move raises the potential by at least one
unit of the integer money grid and the dynamics must stop.

How a deviation of worker ``w`` from task ``k`` to task ``t`` is realised:

1. ``w`` leaves ``k``. The skills it was credited with are re-covered from
   idle workers with the per-skill rule below, within what is left of
   ``k``'s budget. If that fails, ``k`` is dissolved and its members go idle.
2. ``t``'s current members (if any) are released. ``w`` joins first, credited
   with every skill of ``t`` it holds, and the remaining skills are filled
   with the per-skill rule from the idle pool.

Going idle is step 1 alone. It can pay off when a cheaper idle worker takes
over the leaver's skills, so best responses consider it too.

Per-skill rule: visit the uncovered skills in catalog order; for each one
still uncovered, take the reachable idle holder that maximises its own
revenue on the still-uncovered skills (ties: smaller extra cost, then
smaller id) and credit it with everything it covers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from staeb.feasibility import Neighborhoods, fits, validate_matching
from staeb.model import (
    NULL_TASK,
    Instance,
    Matching,
    SolveReport,
    StaebError,
    Task,
    Worker,
    matching_revenue,
    member_revenue,
)


class MoveRejected(StaebError):
    """Raised when a requested move is infeasible or does not strictly improve."""


@dataclass(frozen=True)
class GameState:
    matching: Matching
    strategy: dict = field(hash=False)
    round: int = 0
    potential_value: int = 0


@dataclass(frozen=True)
class GameConfig:
    round_cap: int | None = None
    worker_order: str = "id"
    certify_nash: bool = False
    debug_validate: bool = False

    def __post_init__(self):
        if self.round_cap is not None and self.round_cap < 1:
            raise ValueError("round_cap must be >= 1")
        if self.worker_order != "id":
            raise ValueError("only worker_order='id' is supported")


def default_round_cap(instance: Instance, nb: Neighborhoods | None = None) -> int:
    """Ten times the scaled skill income of covering every task at zero subsidy."""
    nb = nb or Neighborhoods(instance)
    return max(1, 10 * sum(nb.income(m) for m in nb.tmask))


@dataclass
class _Leave:
    task: int = -1
    members: list | None = None  # new member list of the old task, None if dissolved
    old_rev: int = 0
    new_rev: int = 0
    freed: frozenset = frozenset()
    taken: frozenset = frozenset()

    @property
    def delta(self) -> int:
        return self.new_rev - self.old_rev


class GameEngine:
    """Mutable solver state for one instance."""

    def __init__(self, instance: Instance, nb: Neighborhoods | None = None):
        self.instance = instance
        self.nb = nb or Neighborhoods(instance)
        self.assign = [-1] * len(self.nb.workers)
        self.pairs: dict[int, list] = {}
        self.pair_rev: dict[int, int] = {}
        self.phi = 0
        self.rounds = 0
        self.moves = 0

    # -- construction -------------------------------------------------

    def fill(self, ti, uncovered, extras, is_free):
        """Cover ``uncovered`` skills of task ``ti`` with the per-skill rule."""
        nb = self.nb
        budget = nb.tasks[ti].extra_budget
        wmask = nb.wmask
        income = nb.income
        extras = list(extras)
        left = budget - sum(extras)
        picked = []
        chosen = set()
        by_skill = nb.by_skill[ti]
        for bit in nb.bits(uncovered):
            if not uncovered & bit:
                continue
            best = None
            best_key = None
            for wi, e, sub in by_skill[bit]:
                if wi in chosen or not is_free(wi):
                    continue
                if not fits(e, left, extras, budget):
                    continue
                key = (income(wmask[wi] & uncovered) - sub, -e, -wi)
                if best_key is None or key > best_key:
                    best_key, best = key, (wi, e)
            if best is None:
                return None
            wi, e = best
            credit = wmask[wi] & uncovered
            uncovered &= ~credit
            picked.append((wi, credit))
            chosen.add(wi)
            extras.append(e)
            left = budget - sum(extras)
        return picked

    def _idle(self, wi):
        return self.assign[wi] == -1

    def _set_pair(self, ti, members):
        self.pairs[ti] = members
        rev = self.nb.members_revenue(ti, members)
        self.pair_rev[ti] = rev
        self.phi += rev
        for wi, _ in members:
            self.assign[wi] = ti

    def _clear_pair(self, ti):
        members = self.pairs.pop(ti, None)
        if members is None:
            return
        self.phi -= self.pair_rev.pop(ti)
        for wi, _ in members:
            self.assign[wi] = -1

    def initialize(self):
        """Cover tasks in input order. Loss-making pairs are not formed, so the start has phi >= 0."""
        for ti in range(len(self.nb.tasks)):
            members = self.fill(ti, self.nb.tmask[ti], [], self._idle)
            if members is not None and self.nb.members_revenue(ti, members) >= 0:
                self._set_pair(ti, members)
        return self

    @classmethod
    def from_matching(cls, instance: Instance, matching: Matching, nb: Neighborhoods | None = None):
        report = validate_matching(matching, instance)
        if not report.ok:
            raise ValueError(f"infeasible matching: {report.violations}")
        eng = cls(instance, nb)
        for pair in matching.pairs:
            ti = eng.nb.task_pos[pair.task_id]
            members = [(eng.nb.worker_pos[m.worker_id], eng.nb.mask(m.credited_skills)) for m in pair.members]
            eng._set_pair(ti, members)
        return eng

    @classmethod
    def from_state(cls, instance: Instance, state: GameState, nb: Neighborhoods | None = None):
        eng = cls.from_matching(instance, state.matching, nb)
        eng.rounds = state.round
        return eng

    # -- moves ----------------------------------------------------------

    def _leave(self, wi) -> _Leave:
        k = self.assign[wi]
        if k == -1:
            return _Leave()
        members = self.pairs[k]
        rest = [(x, c) for x, c in members if x != wi]
        credited = next(c for x, c in members if x == wi)
        ext = self.nb.extra[k]
        repair = self.fill(k, credited, [ext[x][0] for x, _ in rest], self._idle)
        old = self.pair_rev[k]
        if repair is None:
            return _Leave(k, None, old, 0, frozenset(x for x, _ in rest), frozenset())
        new_members = rest + repair
        return _Leave(k, new_members, old, self.nb.members_revenue(k, new_members), frozenset(), frozenset(x for x, _ in repair))

    def _join(self, wi, ti, leave: _Leave):
        """Members of ``ti`` rebuilt around ``wi``, or None if it cannot be covered."""
        nb = self.nb
        released = {x for x, _ in self.pairs.get(ti, ())}
        freed, taken, assign = leave.freed, leave.taken, self.assign

        def is_free(x):
            if x == wi or x in taken:
                return False
            return assign[x] == -1 or x in released or x in freed

        credit = nb.wmask[wi] & nb.tmask[ti]
        e = nb.extra[ti][wi][0]
        rest = self.fill(ti, nb.tmask[ti] & ~credit, [e], is_free)
        if rest is None:
            return None
        return [(wi, credit)] + rest

    def utility(self, wi, ti):
        """Potential change if ``wi`` deviates to ``ti`` (None = idle); None if infeasible."""
        if ti is not None and ti == self.assign[wi]:
            return 0
        leave = self._leave(wi)
        if ti is None:
            return leave.delta
        if wi not in self.nb.extra[ti]:
            return None
        members = self._join(wi, ti, leave)
        if members is None:
            return None
        return leave.delta + self.nb.members_revenue(ti, members) - self.pair_rev.get(ti, 0)

    def best_response(self, wi, prune=True):
        """(task index or None for idle, utility) of the best strictly improving move, or None."""
        nb = self.nb
        current = self.assign[wi]
        leave = None
        best_u, best_t, found = 0, None, False
        for ti in nb.worker_tasks[wi]:
            if ti == current:
                continue
            if leave is None:
                leave = self._leave(wi)
            base = leave.delta - self.pair_rev.get(ti, 0)
            if prune:
                # the mover's subsidy is certain; other members add at most their skill income
                bound = base + nb.income(nb.tmask[ti]) - nb.extra[ti][wi][1]
                if bound <= best_u:
                    continue
            members = self._join(wi, ti, leave)
            if members is None:
                continue
            u = base + nb.members_revenue(ti, members)
            if u > best_u:
                best_u, best_t, found = u, ti, True
        if current != -1:
            # idle last, so a task wins a tie
            if leave is None:
                leave = self._leave(wi)
            if leave.delta > best_u:
                best_u, best_t, found = leave.delta, None, True
        if not found:
            return None
        return best_t, best_u

    def move(self, wi, ti, require_gain=True):
        """Apply a deviation of ``wi`` to ``ti`` (None = idle); returns the utility."""
        if ti is not None and ti == self.assign[wi]:
            raise MoveRejected("worker already serves that task")
        leave = self._leave(wi)
        members = None
        gain = leave.delta
        if ti is not None:
            if wi not in self.nb.extra[ti]:
                raise MoveRejected("task out of range or shares no skill with the worker")
            members = self._join(wi, ti, leave)
            if members is None:
                raise MoveRejected("task cannot be covered around this worker")
            gain += self.nb.members_revenue(ti, members) - self.pair_rev.get(ti, 0)
        if require_gain and gain <= 0:
            raise MoveRejected(f"move does not strictly improve the potential (utility {gain})")
        before = self.phi
        if leave.task != -1:
            self._clear_pair(leave.task)
            if leave.members is not None:
                self._set_pair(leave.task, leave.members)
        if ti is not None:
            self._clear_pair(ti)
            self._set_pair(ti, members)
        if self.phi - before != gain:
            raise AssertionError("potential change differs from the mover's utility")
        self.moves += 1
        return gain

    def is_nash(self, prune=False):
        return all(self.best_response(wi, prune=prune) is None for wi in range(len(self.nb.workers)))

    def run(self, round_cap, debug_validate=False):
        """Sequential best-response rounds. Returns True if a Nash state was reached."""
        n = len(self.nb.workers)
        while self.rounds < round_cap:
            changed = False
            for wi in range(n):
                br = self.best_response(wi)
                if br is None:
                    continue
                self.move(wi, br[0])
                changed = True
                if debug_validate:
                    report = validate_matching(self.matching(), self.instance)
                    if not report.ok:
                        raise AssertionError(f"infeasible state after move: {report.violations}")
            if not changed:
                return True
            self.rounds += 1
        return False

    # -- export ---------------------------------------------------------

    def matching(self) -> Matching:
        return Matching(tuple(self.nb.make_pair(ti, m) for ti, m in self.pairs.items()))

    def snapshot(self) -> GameState:
        nb = self.nb
        strategy = {
            w.id: (nb.tasks[self.assign[wi]].id if self.assign[wi] != -1 else NULL_TASK)
            for wi, w in enumerate(nb.workers)
        }
        return GameState(self.matching(), strategy, self.rounds, self.phi)


def init_matching(instance: Instance) -> GameState:
    return GameEngine(instance).initialize().snapshot()


def marginal_contribution(state: GameState, task: Task, worker: Worker, instance: Instance) -> int:
    """Revenue the task's pair loses without this worker's credited share."""
    pair = state.matching.pair_for(task.id)
    if pair is None:
        return 0
    for m in pair.members:
        if m.worker_id == worker.id:
            return member_revenue(m, instance)
    return 0


def _task_index(eng: GameEngine, task_id):
    if task_id is NULL_TASK:
        return None
    return eng.nb.task_pos[task_id]


def move_utility(state: GameState, worker: Worker, target, instance: Instance):
    """Utility of moving ``worker`` to task-id ``target`` (None = idle); None if infeasible."""
    eng = GameEngine.from_state(instance, state)
    return eng.utility(eng.nb.worker_pos[worker.id], _task_index(eng, target))


def best_response(state: GameState, worker: Worker, instance: Instance):
    """Task id of the best strictly improving move, NULL_TASK to go idle, None if there is none."""
    eng = GameEngine.from_state(instance, state)
    br = eng.best_response(eng.nb.worker_pos[worker.id], prune=False)
    if br is None:
        return None
    return NULL_TASK if br[0] is None else eng.nb.tasks[br[0]].id


def simulate_move(state: GameState, worker: Worker, target, instance: Instance):
    """Apply any feasible deviation, improving or not. Returns (new state, utility)."""
    eng = GameEngine.from_state(instance, state)
    u = eng.move(eng.nb.worker_pos[worker.id], _task_index(eng, target), require_gain=False)
    return eng.snapshot(), u


def apply_move(state: GameState, worker: Worker, target, instance: Instance) -> GameState:
    """Apply a strictly improving move; anything else raises MoveRejected."""
    eng = GameEngine.from_state(instance, state)
    eng.move(eng.nb.worker_pos[worker.id], _task_index(eng, target), require_gain=True)
    return eng.snapshot()


def is_nash(state: GameState, instance: Instance) -> bool:
    return GameEngine.from_state(instance, state).is_nash(prune=False)


def potential(state: GameState) -> int:
    return state.potential_value


def solve_ebgt(instance: Instance, cfg: GameConfig = GameConfig(), nb: Neighborhoods | None = None):
    start = time.perf_counter()
    eng = GameEngine(instance, nb).initialize()
    init_phi = eng.phi
    cap = cfg.round_cap if cfg.round_cap is not None else default_round_cap(instance, eng.nb)
    converged = eng.run(cap, debug_validate=cfg.debug_validate)
    matching = eng.matching()
    elapsed = time.perf_counter() - start
    certified = converged
    if cfg.certify_nash:
        certified = eng.is_nash(prune=False)
    report = SolveReport(
        algorithm="ebgt",
        revenue=matching_revenue(matching, instance),
        matched_tasks=len(matching),
        total_tasks=len(instance.tasks),
        wall_seconds=elapsed,
        rounds=eng.rounds,
        moves=eng.moves,
        nash_certified=certified,
        round_cap_hit=not converged,
        extra={"initial_potential": init_phi, "round_cap": cap},
    )
    return matching, report
