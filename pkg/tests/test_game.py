import random
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import desk_instance, i0, matching, pair, small_instances
from staeb.feasibility import validate_matching
from staeb.game import (
    GameConfig,
    GameEngine,
    MoveRejected,
    apply_move,
    best_response,
    init_matching,
    is_nash,
    marginal_contribution,
    move_utility,
    potential,
    simulate_move,
    solve_ebgt,
)
from staeb.greedy import solve_greedy
from staeb.model import NULL_TASK, Instance, Point, SkillCatalog, Task, Worker, matching_revenue, to_money
from staeb.oracle import solve_random


def state_of(inst, m):
    return GameEngine.from_matching(inst, m).snapshot()


def i0_states():
    inst = i0()
    opt = matching(pair(inst, "t1", ("w1", {"s1", "s2"})), pair(inst, "t2", ("w3", {"s3"})))
    alt = matching(pair(inst, "t1", ("w2", {"s2"}), ("w4", {"s1"})), pair(inst, "t2", ("w3", {"s3"})))
    only_t2 = matching(pair(inst, "t2", ("w3", {"s3"})))
    return inst, state_of(inst, opt), state_of(inst, alt), state_of(inst, only_t2)


def money(inst, v):
    return to_money(v, inst.params)


def test_init_matching_i0():
    inst = i0()
    s = init_matching(inst)
    assert money(inst, s.potential_value) == 30
    assert validate_matching(s.matching, inst).ok
    assert s.strategy == {"w1": "t1", "w2": NULL_TASK, "w3": "t2", "w4": NULL_TASK}


def test_init_matching_zero_workers():
    s = init_matching(i0().replace(workers=()))
    assert len(s.matching) == 0 and potential(s) == 0


def test_init_matching_releases_uncoverable_task():
    cat = SkillCatalog({"a": 10, "b": 10})
    t = Task("t", Point(0, 0), 0, 10, 0, frozenset({"a", "b"}))
    w = Worker("w", Point(1, 0), 0, frozenset({"a"}))
    s = init_matching(Instance(cat, (t,), (w,)))
    assert len(s.matching) == 0 and s.strategy == {"w": NULL_TASK}


def test_init_matching_skips_loss_making_pair():
    # the only holder of a is so far out that its subsidy outweighs the fee
    cat = SkillCatalog({"a": 1})
    t = Task("t", Point(0, 0), 0, 0, 100, frozenset({"a"}))
    w = Worker("w", Point(50, 0), 0, frozenset({"a"}))
    inst = Instance(cat, (t,), (w,))
    s = init_matching(inst)
    assert len(s.matching) == 0 and potential(s) == 0
    assert is_nash(s, inst)


def test_marginal_contribution_examples():
    inst, opt, alt, _ = i0_states()
    t1 = inst.task("t1")
    assert money(inst, marginal_contribution(opt, t1, inst.worker("w1"), inst)) == 15
    assert marginal_contribution(opt, t1, inst.worker("w2"), inst) == 0
    assert money(inst, marginal_contribution(alt, t1, inst.worker("w2"), inst)) == 9


def test_best_response_examples():
    inst, opt, alt, _ = i0_states()
    assert best_response(alt, inst.worker("w1"), inst) == "t1"
    assert money(inst, move_utility(alt, inst.worker("w1"), "t1", inst)) == 1
    for w in inst.workers:
        assert best_response(opt, w, inst) is None


def test_best_response_none_without_reachable_task():
    cat = SkillCatalog({"a": 10, "b": 10})
    t = Task("t", Point(0, 0), 0, 10, 0, frozenset({"a"}))
    far = Worker("far", Point(100, 0), 0, frozenset({"a"}))
    other = Worker("other", Point(0, 0), 0, frozenset({"b"}))
    inst = Instance(cat, (t,), (far, other))
    s = init_matching(inst)
    assert best_response(s, far, inst) is None
    assert best_response(s, other, inst) is None


def test_apply_move_into_unmatched_task():
    inst, _, _, only_t2 = i0_states()
    after = apply_move(only_t2, inst.worker("w1"), "t1", inst)
    p = after.matching.pair_for("t1")
    assert {m.worker_id: set(m.credited_skills) for m in p.members} == {"w1": {"s1", "s2"}}
    assert money(inst, after.potential_value - only_t2.potential_value) == 15


def test_apply_move_rejects_non_improving_and_null():
    inst, opt, _, _ = i0_states()
    with pytest.raises(MoveRejected):
        apply_move(opt, inst.worker("w2"), "t1", inst)
    with pytest.raises(MoveRejected):
        apply_move(opt, inst.worker("w1"), NULL_TASK, inst)


def _repair_instance():
    # u leaves t1 for t2; v can take over skill a of t1
    cat = SkillCatalog({"a": 10, "c": 50})
    t1 = Task("t1", Point(0, 0), 0, 10, 0, frozenset({"a"}))
    t2 = Task("t2", Point(5, 0), 0, 10, 0, frozenset({"c"}))
    u = Worker("u", Point(2, 0), 0, frozenset({"a", "c"}))
    v = Worker("v", Point(1, 0), 0, frozenset({"a"}))
    return Instance(cat, (t1, t2), (u, v))


def test_leaving_worker_is_replaced():
    inst = _repair_instance()
    s = state_of(inst, matching(pair(inst, "t1", ("u", {"a"}))))
    after = apply_move(s, inst.worker("u"), "t2", inst)
    assert validate_matching(after.matching, inst).ok
    assert after.strategy == {"u": "t2", "v": "t1"}
    assert after.potential_value == matching_revenue(after.matching, inst)


def test_leaving_worker_dissolves_pair():
    inst = _repair_instance()
    inst = inst.replace(workers=(inst.worker("u"), Worker("v", Point(1, 0), 0, frozenset({"c"}))))
    # t1 needs a and c; u leaves for t2 and nobody else holds a
    t1 = Task("t1", Point(0, 0), 0, 10, 0, frozenset({"a", "c"}))
    inst = inst.replace(tasks=(t1, inst.task("t2")))
    s = state_of(inst, matching(pair(inst, "t1", ("u", {"a"}), ("v", {"c"}))))
    after, u = simulate_move(s, inst.worker("u"), "t2", inst)
    assert after.matching.pair_for("t1") is None
    assert after.strategy["v"] in (NULL_TASK, "t2")
    assert after.potential_value - s.potential_value == u


def test_going_idle_can_be_the_best_response():
    # u is far out; if it steps aside, v (on the spot) takes over for free
    cat = SkillCatalog({"a": 10})
    t = Task("t", Point(0, 0), 0, 0, 10, frozenset({"a"}))
    u = Worker("u", Point(5, 0), 0, frozenset({"a"}))
    v = Worker("v", Point(0, 0), 0, frozenset({"a"}))
    inst = Instance(cat, (t,), (u, v))
    s = state_of(inst, matching(pair(inst, "t", ("u", {"a"}))))
    assert not is_nash(s, inst)
    assert best_response(s, u, inst) is NULL_TASK
    after = apply_move(s, u, NULL_TASK, inst)
    assert after.strategy == {"u": NULL_TASK, "v": "t"}
    assert money(inst, after.potential_value - s.potential_value) == Decimal("2.5")
    assert is_nash(after, inst)


def test_null_task_is_a_distinct_singleton():
    import pickle

    assert NULL_TASK is not None and NULL_TASK != "t0"
    assert pickle.loads(pickle.dumps(NULL_TASK)) is NULL_TASK


def test_is_nash_examples():
    inst, opt, _, only_t2 = i0_states()
    assert is_nash(opt, inst)
    assert not is_nash(only_t2, inst)
    empty = i0().replace(tasks=(), workers=())
    assert is_nash(init_matching(empty), empty)


def test_solve_ebgt_i0():
    inst = i0()
    m, report = solve_ebgt(inst, GameConfig(certify_nash=True))
    assert money(inst, report.revenue) == 30
    assert report.nash_certified is True and not report.round_cap_hit


def test_solve_ebgt_zero_tasks():
    m, report = solve_ebgt(i0().replace(tasks=()))
    assert len(m) == 0 and report.rounds == 0 and report.revenue == 0


def test_potential_examples():
    inst, opt, _, _ = i0_states()
    assert potential(init_matching(i0().replace(tasks=()))) == 0
    assert money(inst, potential(opt)) == 30


def test_ebgt_mean_at_least_greedy_mean():
    ebgt = greedy = 0
    for seed in range(100):
        inst = desk_instance(seed, num_tasks=8, num_workers=24)
        ebgt += solve_ebgt(inst)[1].revenue
        greedy += solve_greedy(inst)[1].revenue
    assert ebgt >= greedy


def test_game_config_validation():
    with pytest.raises(ValueError):
        GameConfig(round_cap=0)
    with pytest.raises(ValueError):
        GameConfig(worker_order="random")


def test_round_cap_is_respected():
    inst = desk_instance(3)
    _, capped = solve_ebgt(inst, GameConfig(round_cap=1))
    _, free = solve_ebgt(inst)
    assert capped.rounds <= 1
    assert capped.revenue <= free.revenue
    assert free.rounds >= 1
    # the cap stops the run before a pass without moves can confirm convergence
    assert capped.round_cap_hit


@settings(max_examples=60, deadline=None)
@given(small_instances(max_tasks=5, max_workers=12), st.integers(0, 2**16))
def test_potential_change_equals_mover_utility(inst, seed):
    rng = random.Random(seed)
    state = GameEngine.from_matching(inst, solve_random(inst, seed)[0]).snapshot()
    tasks = [t.id for t in inst.tasks] + [NULL_TASK]
    for _ in range(20):
        if not inst.workers:
            break
        w = rng.choice(inst.workers)
        target = rng.choice(tasks)
        predicted = move_utility(state, w, target, inst)
        try:
            after, u = simulate_move(state, w, target, inst)
        except MoveRejected:
            assert predicted is None or target == state.strategy[w.id]
            continue
        assert u == predicted
        assert after.potential_value - state.potential_value == u
        assert after.potential_value == matching_revenue(after.matching, inst)
        assert validate_matching(after.matching, inst).ok
        state = after


@settings(max_examples=60, deadline=None)
@given(small_instances(max_tasks=6, max_workers=14))
def test_ebgt_improves_on_its_start_and_reaches_nash(inst):
    m, report = solve_ebgt(inst, GameConfig(debug_validate=True))
    assert validate_matching(m, inst).ok
    assert report.revenue >= report.extra["initial_potential"] >= 0
    assert not report.round_cap_hit
    assert GameEngine.from_matching(inst, m).is_nash()
    # pruned and unpruned scans agree
    eng = GameEngine.from_matching(inst, m)
    assert eng.is_nash(prune=True) == eng.is_nash(prune=False)


@settings(max_examples=40, deadline=None)
@given(small_instances(max_tasks=5, max_workers=12))
def test_pruned_best_response_matches_full_scan(inst):
    eng = GameEngine(inst).initialize()
    for wi in range(len(eng.nb.workers)):
        a = eng.best_response(wi, prune=True)
        b = eng.best_response(wi, prune=False)
        assert (a is None) == (b is None)
        if a is not None:
            assert a[1] == b[1]
