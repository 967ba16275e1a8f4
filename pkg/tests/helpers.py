"""Shared builders and hypothesis strategies for the test suite."""

from decimal import Decimal

from hypothesis import strategies as st

from staeb.bench import DESK_BASE
from staeb.instances import GenConfig, canonical_instance, generate_instance
from staeb.model import Matching, Member, PairAssignment, extra_cost


def i0():
    return canonical_instance()


def pair(instance, task_id, *members):
    """PairAssignment from (worker id, credited skills) tuples with true extra costs."""
    task = instance.task(task_id)
    return PairAssignment(
        task_id,
        tuple(Member(wid, frozenset(skills), extra_cost(task, instance.worker(wid))) for wid, skills in members),
    )


def matching(*pairs):
    return Matching(tuple(pairs))


# small instances that fit the exact oracle: <=4 tasks, <=8 workers, <=5 skills
ORACLE_BASE = GenConfig(
    num_tasks=4,
    num_workers=8,
    num_skills=5,
    fixed_radius=1000.0,
    extra_budget_range=(800.0, 1000.0),
    bounding_box=(0.0, 0.0, 3000.0, 3000.0),
)


def oracle_instance(seed, **changes):
    return generate_instance(ORACLE_BASE.with_(seed=seed, **changes))


def desk_instance(seed, **changes):
    return generate_instance(DESK_BASE.with_(seed=seed, **changes))


@st.composite
def small_configs(draw, max_tasks=4, max_workers=8, max_skills=5):
    lo = draw(st.floats(0, 600, allow_nan=False).map(lambda v: round(v, 1)))
    side = draw(st.sampled_from([500.0, 1500.0, 3000.0]))
    return GenConfig(
        num_tasks=draw(st.integers(0, max_tasks)),
        num_workers=draw(st.integers(0, max_workers)),
        num_skills=draw(st.integers(1, max_skills)),
        fixed_radius=draw(st.sampled_from([0.0, 200.0, 500.0, 1000.0])),
        extra_budget_range=(lo, lo + draw(st.sampled_from([0.0, 100.0, 400.0]))),
        bounding_box=(0.0, 0.0, side, side),
        beta=Decimal(draw(st.sampled_from(["0.01", "0.1", "0.5"]))),
        seed=draw(st.integers(0, 2**31)),
    )


def small_instances(**kw):
    return small_configs(**kw).map(generate_instance)
