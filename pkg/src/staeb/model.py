"""Domain types and revenue arithmetic for skilled task assignment.

Money is kept on an integer grid: every revenue value returned by this module
is an ``int`` equal to the money amount multiplied by ``Params.money_scale``.
Use :func:`to_money` to convert back to a ``Decimal``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Iterable, Mapping



class _NullTask:
    """The idle strategy t_0. A singleton, distinct from every task id and from None."""

    __slots__ = ()

    def __repr__(self):
        return "NULL_TASK"

    def __reduce__(self):
        return "NULL_TASK"


NULL_TASK = _NullTask()


class StaebError(Exception):
    """Base class for errors raised by this package."""


class InvalidPairError(StaebError):
    def __init__(self, task_id, violations):
        self.task_id = task_id
        self.violations = list(violations)
        detail = "; ".join(f"{code}: {msg}" for code, msg in self.violations)
        super().__init__(f"invalid pair for task {task_id!r}: {detail}")


def as_decimal(value) -> Decimal:
    """Convert ints, floats, strings or Decimals to an exact decimal value."""
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite number {value!r}")
        return Decimal(repr(value))
    return Decimal(value)


def _round_int(value: Decimal) -> int:
    return int(value.to_integral_value(rounding=ROUND_HALF_EVEN))


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class SkillCatalog:
    """Skill identifiers with the fee a requester pays for each skill."""

    fees: Mapping[str, Decimal]

    def __post_init__(self):
        fees = {str(k): as_decimal(v) for k, v in dict(self.fees).items()}
        for skill, fee in fees.items():
            if fee <= 0:
                raise ValueError(f"fee for skill {skill!r} must be positive, got {fee}")
        object.__setattr__(self, "fees", dict(sorted(fees.items())))

    def __contains__(self, skill):
        return skill in self.fees

    def __len__(self):
        return len(self.fees)

    @property
    def skills(self) -> list[str]:
        return list(self.fees)

    def fee_sum(self, skills: Iterable[str]) -> Decimal:
        return sum((self.fees[s] for s in skills), Decimal(0))


@dataclass(frozen=True)
class Task:
    id: str
    location: Point
    arrival_time: float
    fixed_radius: float
    extra_budget: float
    required_skills: frozenset

    def __post_init__(self):
        object.__setattr__(self, "required_skills", frozenset(self.required_skills))
        if not self.required_skills:
            raise ValueError(f"task {self.id!r} needs at least one skill")
        if not self.fixed_radius >= 0:
            raise ValueError(f"task {self.id!r}: fixed_radius must be >= 0")
        if not self.extra_budget >= 0:
            raise ValueError(f"task {self.id!r}: extra_budget must be >= 0")

    @property
    def max_range(self) -> float:
        return self.fixed_radius + self.extra_budget


@dataclass(frozen=True)
class Worker:
    id: str
    location: Point
    arrival_time: float
    skills: frozenset

    def __post_init__(self):
        object.__setattr__(self, "skills", frozenset(self.skills))
        if not self.skills:
            raise ValueError(f"worker {self.id!r} needs at least one skill")


@dataclass(frozen=True)
class Params:
    alpha: Decimal = Decimal("0.5")
    beta: Decimal = Decimal("0.5")
    money_scale: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_decimal(self.alpha))
        object.__setattr__(self, "beta", as_decimal(self.beta))
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if isinstance(self.money_scale, bool) or int(self.money_scale) != self.money_scale or self.money_scale < 1:
            raise ValueError(f"money_scale must be a positive integer, got {self.money_scale}")
        object.__setattr__(self, "money_scale", int(self.money_scale))


@dataclass(frozen=True)
class Member:
    worker_id: str
    credited_skills: frozenset
    extra_cost: float

    def __post_init__(self):
        object.__setattr__(self, "credited_skills", frozenset(self.credited_skills))


@dataclass(frozen=True)
class PairAssignment:
    task_id: str
    members: tuple[Member, ...]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def worker_ids(self) -> list[str]:
        return [m.worker_id for m in self.members]


@dataclass(frozen=True)
class Matching:
    pairs: tuple[PairAssignment, ...] = ()

    def __post_init__(self):
        pairs = tuple(sorted(self.pairs, key=lambda p: p.task_id))
        object.__setattr__(self, "pairs", pairs)

    def __len__(self):
        return len(self.pairs)

    def pair_for(self, task_id):
        for pair in self.pairs:
            if pair.task_id == task_id:
                return pair
        return None

    def assignment(self) -> dict[str, str]:
        """Map of worker-id to the task-id it serves."""
        return {m.worker_id: p.task_id for p in self.pairs for m in p.members}

    def unassigned(self, instance: "Instance") -> list[str]:
        busy = self.assignment()
        return [w.id for w in instance.workers if w.id not in busy]

    def to_dict(self, instance: "Instance | None" = None) -> dict:
        out = {
            "pairs": [
                {
                    "task": p.task_id,
                    "members": [
                        {
                            "worker": m.worker_id,
                            "credited": sorted(m.credited_skills),
                            "extra_cost": m.extra_cost,
                        }
                        for m in p.members
                    ],
                }
                for p in self.pairs
            ]
        }
        if instance is not None:
            out["revenue_scaled"] = matching_revenue(self, instance)
            out["revenue"] = str(to_money(out["revenue_scaled"], instance.params))
        return out

    def dumps(self, instance: "Instance | None" = None) -> str:
        """Canonical JSON text; identical matchings give identical bytes."""
        return json.dumps(self.to_dict(instance), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "Matching":
        return cls(
            tuple(
                PairAssignment(
                    p["task"],
                    tuple(
                        Member(m["worker"], frozenset(m["credited"]), float(m["extra_cost"]))
                        for m in p["members"]
                    ),
                )
                for p in data["pairs"]
            )
        )


@dataclass(frozen=True)
class Instance:
    catalog: SkillCatalog
    tasks: tuple[Task, ...]
    workers: tuple[Worker, ...]
    params: Params = field(default_factory=Params)
    bounding_box: tuple[Point, Point] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "workers", tuple(self.workers))
        for kind, items in (("task", self.tasks), ("worker", self.workers)):
            seen = set()
            for item in items:
                if item.id in seen:
                    raise ValueError(f"duplicate {kind} id {item.id!r}")
                seen.add(item.id)
        for t in self.tasks:
            unknown = t.required_skills - self.catalog.fees.keys()
            if unknown:
                raise ValueError(f"task {t.id!r} references unknown skills {sorted(unknown)}")
        for w in self.workers:
            unknown = w.skills - self.catalog.fees.keys()
            if unknown:
                raise ValueError(f"worker {w.id!r} references unknown skills {sorted(unknown)}")
        object.__setattr__(self, "_task_by_id", {t.id: t for t in self.tasks})
        object.__setattr__(self, "_worker_by_id", {w.id: w for w in self.workers})

    def task(self, task_id) -> Task:
        return self._task_by_id[task_id]

    def worker(self, worker_id) -> Worker:
        return self._worker_by_id[worker_id]

    def has_task(self, task_id) -> bool:
        return task_id in self._task_by_id

    def has_worker(self, worker_id) -> bool:
        return worker_id in self._worker_by_id

    def replace(self, **changes) -> "Instance":
        kwargs = dict(
            catalog=self.catalog,
            tasks=self.tasks,
            workers=self.workers,
            params=self.params,
            bounding_box=self.bounding_box,
        )
        kwargs.update(changes)
        return Instance(**kwargs)


def travel_cost(a: Point, b: Point) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def extra_cost(task: Task, worker: Worker) -> float:
    """Distance travelled beyond the task's fixed radius, clamped at zero."""
    return max(0.0, travel_cost(task.location, worker.location) - task.fixed_radius)


def skill_income(fee: Decimal, params: Params) -> int:
    """Scaled platform income for crediting one skill of the given fee."""
    return _round_int(params.alpha * as_decimal(fee) * params.money_scale)


def subsidy_function(params: Params):
    """Return ``f(extra) -> scaled subsidy`` with the parameters bound."""
    beta_f = float(params.beta)
    scale = params.money_scale

    def f(extra: float) -> int:
        approx = beta_f * extra * scale
        nearest = round(approx)
        # the float product is only trusted away from a rounding tie
        if abs(abs(approx - nearest) - 0.5) > 1e-6 * max(1.0, abs(approx)):
            return nearest
        return _round_int(params.beta * Decimal(extra) * scale)

    return f


def subsidy(extra: float, params: Params) -> int:
    """Scaled cost of subsidising ``extra`` meters of travel."""
    return subsidy_function(params)(extra)


def worker_revenue(fee_sum, extra: float, params: Params) -> int:
    """Platform revenue of one worker: alpha * fee_sum - beta * extra, scaled.

    The result may be negative when the subsidy outweighs the skill income.
    """
    fee_sum = as_decimal(fee_sum)
    if fee_sum <= 0:
        raise ValueError("credited fee sum must be positive")
    if extra < 0:
        raise ValueError("extra cost must be non-negative")
    return skill_income(fee_sum, params) - subsidy(extra, params)


def member_revenue(member: Member, instance: Instance) -> int:
    # Income is rounded per skill so that pair revenue does not depend on
    # how the required skills are split between members.
    if not member.credited_skills:
        raise ValueError(f"member {member.worker_id!r} has no credited skills")
    params = instance.params
    income = sum(skill_income(instance.catalog.fees[s], params) for s in member.credited_skills)
    return income - subsidy(member.extra_cost, params)


def pair_revenue(pair: PairAssignment, instance: Instance) -> int:
    from staeb.feasibility import validate_pair

    report = validate_pair(instance.task(pair.task_id) if instance.has_task(pair.task_id) else None, pair, instance)
    if not report.ok:
        raise InvalidPairError(pair.task_id, report.violations)
    return sum(member_revenue(m, instance) for m in pair.members)


def matching_revenue(matching: Matching, instance: Instance) -> int:
    return sum(pair_revenue(p, instance) for p in matching.pairs)


def to_money(scaled: int, params: Params) -> Decimal:
    return Decimal(scaled) / params.money_scale


@dataclass
class SolveReport:
    algorithm: str
    revenue: int
    matched_tasks: int
    total_tasks: int
    wall_seconds: float = 0.0
    rounds: int = 0
    moves: int = 0
    nash_certified: bool | None = None
    round_cap_hit: bool = False
    feasible: bool = True
    extra: dict = field(default_factory=dict)
