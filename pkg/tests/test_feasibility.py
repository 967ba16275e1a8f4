import random

from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import i0, matching, pair
from staeb.feasibility import (
    BUDGET_EXCEEDED,
    DUPLICATE_TASK,
    DUPLICATE_WORKER,
    EXTRA_COST_MISMATCH,
    INVALID_CREDIT,
    RANGE_EXCEEDED,
    REDUNDANT_WORKER,
    UNCOVERED_SKILL,
    UNKNOWN_ID,
    GridIndex,
    Neighborhoods,
    build_index,
    candidate_workers,
    fits,
    validate_matching,
    validate_pair,
    within_budget,
)
from staeb.greedy import solve_greedy
from staeb.model import Matching, Member, PairAssignment, Point, Task, Worker, extra_cost, travel_cost


def test_empty_index_has_no_buckets():
    idx = build_index([], 10)
    assert idx.buckets == {}
    assert idx.query(Point(0, 0), 100) == []


def test_i0_range_query():
    inst = i0()
    idx = build_index(inst.workers, 10)
    assert idx.query(Point(0, 0), 9) == ["w1", "w2", "w4"]


def test_boundary_worker_found_from_both_sides():
    w = Worker("w", Point(10.0, 5.0), 0, frozenset({"a"}))
    idx = build_index([w], 10)
    assert idx.query(Point(9.0, 5.0), 1.0) == ["w"]
    assert idx.query(Point(11.0, 5.0), 1.0) == ["w"]
    assert idx.query(Point(10.0, 5.0), 0.0) == ["w"]


def test_grid_matches_linear_scan():
    rng = random.Random(7)
    workers = [Worker(f"w{i:03d}", Point(rng.uniform(-500, 500), rng.uniform(-500, 500)), 0, frozenset({"a"})) for i in range(300)]
    for cell in (7.0, 50.0, 333.0, 5000.0):
        idx = GridIndex(workers, cell)
        for _ in range(300):
            c = Point(rng.uniform(-600, 600), rng.uniform(-600, 600))
            r = rng.choice([0.0, rng.uniform(0, 50), rng.uniform(0, 800)])
            expected = sorted(w.id for w in workers if travel_cost(c, w.location) <= r)
            assert idx.query(c, r) == expected


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50)), max_size=40),
    st.tuples(st.integers(-60, 60), st.integers(-60, 60)),
    st.integers(0, 80),
    st.sampled_from([1.0, 3.0, 10.0, 25.0]),
)
def test_grid_matches_linear_scan_on_lattice(points, center, radius, cell):
    # integer lattice points put many workers exactly on cell edges and circles
    workers = [Worker(f"w{i:03d}", Point(x, y), 0, frozenset({"a"})) for i, (x, y) in enumerate(points)]
    c = Point(*center)
    expected = sorted(w.id for w in workers if travel_cost(c, w.location) <= radius)
    assert GridIndex(workers, cell).query(c, radius) == expected


def test_candidate_workers_examples():
    inst = i0()
    idx = build_index(inst.workers, 10)
    everyone = {w.id for w in inst.workers}
    t1, t2 = inst.task("t1"), inst.task("t2")
    assert candidate_workers(idx, t1, {"s1", "s2"}, 4, everyone) == ["w1", "w2", "w4"]
    assert candidate_workers(idx, t2, {"s3"}, 0, everyone) == ["w3"]
    assert candidate_workers(idx, t2, {"s3"}, 0, everyone - {"w3"}) == []
    assert candidate_workers(idx, t1, {"s3"}, 4, everyone) == []


def test_validate_pair_examples():
    inst = i0()
    t1 = inst.task("t1")
    assert validate_pair(t1, pair(inst, "t1", ("w1", {"s1", "s2"})), inst).ok
    assert validate_pair(t1, pair(inst, "t1", ("w2", {"s2"}), ("w4", {"s1"})), inst).ok
    report = validate_pair(t1, pair(inst, "t1", ("w2", {"s2"})), inst)
    assert report.codes == {UNCOVERED_SKILL}


def test_budget_exceeded_on_tight_variant():
    inst = i0()
    tight = inst.replace(tasks=(Task("t1", Point(0, 0), 0, 5, 1, frozenset({"s1", "s2"})), inst.task("t2")))
    p = pair(tight, "t1", ("w2", {"s2"}), ("w4", {"s1"}))
    codes = validate_pair(tight.task("t1"), p, tight).codes
    assert BUDGET_EXCEEDED in codes
    # e(t1, w2) = 2 also exceeds the shrunken reach r + b
    assert codes == {BUDGET_EXCEEDED, RANGE_EXCEEDED}


def test_validate_pair_reports_every_violation():
    inst = i0()
    t1 = inst.task("t1")
    p = PairAssignment(
        "t1",
        (
            Member("w1", {"s1"}, 0.0),
            Member("w1", {"s2"}, 0.0),
            Member("w3", set(), 99.0),
            Member("nobody", {"s1"}, 0.0),
        ),
    )
    codes = validate_pair(t1, p, inst).codes
    assert {DUPLICATE_WORKER, REDUNDANT_WORKER, EXTRA_COST_MISMATCH, RANGE_EXCEEDED, UNKNOWN_ID, BUDGET_EXCEEDED} <= codes


def test_invalid_credit_detected():
    inst = i0()
    t1 = inst.task("t1")
    double = PairAssignment("t1", (Member("w1", {"s1", "s2"}, 0.0), Member("w4", {"s1"}, extra_cost(t1, inst.worker("w4")))))
    assert INVALID_CREDIT in validate_pair(t1, double, inst).codes
    foreign = PairAssignment("t1", (Member("w4", {"s1", "s2"}, 0.0),))
    assert INVALID_CREDIT in validate_pair(t1, foreign, inst).codes


def test_validate_matching_examples():
    inst = i0()
    assert validate_matching(Matching(), inst).ok
    m, _ = solve_greedy(inst)
    assert validate_matching(m, inst).ok
    w1_twice = PairAssignment("t2", (Member("w1", {"s3"}, extra_cost(inst.task("t2"), inst.worker("w1"))),))
    report = validate_matching(matching(pair(inst, "t1", ("w1", {"s1", "s2"})), w1_twice), inst)
    assert DUPLICATE_WORKER in report.codes


def test_duplicate_task_detected():
    inst = i0()
    a = pair(inst, "t1", ("w1", {"s1", "s2"}))
    b = pair(inst, "t1", ("w2", {"s2"}), ("w4", {"s1"}))
    assert DUPLICATE_TASK in validate_matching(Matching((a, b)), inst).codes


@given(st.lists(st.floats(0, 1000, allow_nan=False), max_size=8), st.floats(0, 5000, allow_nan=False), st.floats(0, 1000, allow_nan=False))
def test_fits_agrees_with_budget_predicate(extras, budget, e):
    left = budget - sum(extras)
    assert fits(e, left, extras, budget) == within_budget(extras + [e], budget)


def test_neighborhoods_candidates_respect_range():
    inst = i0()
    nb = Neighborhoods(inst)
    ids = lambda ti: [nb.workers[wi].id for wi, _, _ in nb.cands[ti]]
    assert ids(nb.task_pos["t1"]) == ["w1", "w2", "w4"]
    assert ids(nb.task_pos["t2"]) == ["w3"]
