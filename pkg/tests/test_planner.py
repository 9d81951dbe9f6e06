import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from domfuse import fixtures
from domfuse.core import Problem, State
from domfuse.fusion import GenerationParams
from domfuse.parser import parse_domain, parse_problem
from domfuse.planner import (
    GROUNDING_CAP,
    INF,
    NODE_CAP,
    SOLVED,
    TIMEOUT,
    UNSOLVABLE,
    ground,
    h_ff,
    relaxed_plan,
    relaxed_replay,
    search,
    solve,
)
from domfuse.probgen import GenerationFailed, generate
from domfuse.seeding import stream
from domfuse.validator import validate_plan

from oracles import bfs, naive_ground, reachable_states, relaxed_closure

# optimal plan lengths from the BFS oracle, frozen
OPTIMAL = {
    "blocks-3": 6,
    "depot-small": 5,
    "grid-small": 5,
    "gripper-1ball": 3,
    "gripper-2ball": 5,
    "satellite-small": 5,
}


@pytest.mark.parametrize("name", sorted(fixtures.PROBLEMS))
def test_bfs_oracle_frozen(name):
    solvable, length, _ = bfs(*fixtures.pair(name))
    assert solvable and length == OPTIMAL[name]


@pytest.mark.parametrize("name", sorted(fixtures.PROBLEMS))
def test_grounding_matches_naive_fixpoint(name):
    d, p = fixtures.pair(name)
    task = ground(d, p)
    naive = naive_ground(d, p)
    closure = relaxed_closure(naive, p.init.atoms)
    assert set(task.atoms) == closure
    kept = {(a.schema, a.binding) for a in naive if a.pre_pos <= closure and not a.pre_pos & a.pre_neg}
    assert {(a.schema, a.binding) for a in task.actions} == kept


@pytest.mark.parametrize("name", sorted(fixtures.PROBLEMS))
def test_fixtures_solve(name):
    d, p = fixtures.pair(name)
    res = solve(d, p)
    assert res.status == SOLVED
    assert len(res.plan) >= OPTIMAL[name]
    assert validate_plan(d, p, res.plan).valid


def test_gripper_heuristic_and_plan(gripper):
    d, p = gripper
    task = ground(d, p)
    assert h_ff(task, task.init) == 3
    res = search(task)
    assert res.solved and len(res.plan) == 3


def test_goal_in_init_is_empty_plan(gripper):
    d, p = gripper
    trivial = Problem("t", p.domain_name, p.objects, p.init, frozenset(list(p.init.atoms)[:1]))
    res = solve(d, trivial)
    assert res.solved and len(res.plan) == 0 and res.expansions == 0


def test_unreachable_predicate_is_unsolvable_at_grounding():
    d = parse_domain(
        "(define (domain d) (:predicates (p) (q)) (:action a :parameters () :precondition (p) :effect (not (p))))"
    )
    p = parse_problem("(define (problem x) (:domain d) (:init (p)) (:goal (q)))", d)
    task = ground(d, p)
    assert task.unsolvable
    assert h_ff(task, task.init) == INF
    assert search(task).status == UNSOLVABLE


def test_empty_action_set_unsolvable():
    d = parse_domain("(define (domain d) (:predicates (p) (q)) (:action a :parameters () :precondition (q) :effect (p)))")
    p = parse_problem("(define (problem x) (:domain d) (:init) (:goal (p)))", d)
    task = ground(d, p)
    assert not task.actions
    assert search(task).status == UNSOLVABLE


def test_nullary_schema_single_instance():
    d = parse_domain("(define (domain d) (:predicates (p)) (:action a :parameters () :effect (p)))")
    p = parse_problem("(define (problem x) (:domain d) (:init) (:goal (p)))", d)
    task = ground(d, p)
    assert len(task.actions) == 1
    assert solve(d, p).solved


def test_negative_precondition_dead_end_detected():
    """Relaxed reachability holds, but a negative precondition blocks the only route."""
    d = parse_domain(
        "(define (domain d) (:requirements :negative-preconditions) (:predicates (p) (q))"
        " (:action a :parameters () :precondition (not (p)) :effect (q)))"
    )
    p = parse_problem("(define (problem x) (:domain d) (:init (p)) (:goal (q)))", d)
    assert not ground(d, p).unsolvable
    assert solve(d, p).status == UNSOLVABLE
    assert bfs(d, p)[0] is False


def test_budgets(gripper2):
    d, p = gripper2
    task = ground(d, p)
    assert search(task, max_expansions=1).status == NODE_CAP
    assert search(task, time_limit=0.0).status == TIMEOUT
    assert solve(d, p, max_actions=3).status == GROUNDING_CAP
    assert search(task, max_expansions=1).budget_exhausted


def test_search_is_deterministic(blocks):
    d, p = blocks
    a, b = solve(d, p), solve(d, p)
    assert a.plan == b.plan and a.expansions == b.expansions


def _sampled_states(name, limit=200):
    d, p = fixtures.pair(name)
    task = ground(d, p)
    return task, [task.encode(s) for s in reachable_states(d, p, limit)]


@pytest.mark.parametrize("name", sorted(fixtures.PROBLEMS))
def test_heuristic_properties(name):
    task, states = _sampled_states(name)
    for s in states:
        rp = relaxed_plan(task, s)
        h = h_ff(task, s)
        assert (h == 0) == (task.goal <= s)
        closure = relaxed_closure_ids(task, s)
        assert (h == INF) == (not task.goal <= closure)
        if rp is not None:
            reached = relaxed_replay(task, s, rp)
            assert reached is not None and task.goal <= reached
            assert len(set(rp)) == len(rp)


def relaxed_closure_ids(task, state):
    reached = set(state)
    changed = True
    while changed:
        changed = False
        for a in task.actions:
            if a.pre <= reached and not a.add <= reached:
                reached |= a.add
                changed = True
    return reached


# pairs whose union keeps one object per initial-state type within five objects
SMALL_PAIRS = [
    ("gripper-1ball", "blocks-3"), ("blocks-3", "gripper-1ball"), ("blocks-3", "blocks-3"),
    ("blocks-3", "grid-small"), ("blocks-3", "satellite-small"), ("satellite-small", "blocks-3"),
]


@given(st.integers(0, 2**32), st.sampled_from(SMALL_PAIRS))
@settings(max_examples=25)
def test_planner_matches_bfs_on_generated(seed, pair):
    d1, p1 = fixtures.pair(pair[0])
    d2, p2 = fixtures.pair(pair[1])
    try:
        rec = generate(d1, p1, d2, p2, GenerationParams(seed=seed, num_objs=5, walk_len=10))
    except GenerationFailed as exc:
        assert exc.stage != "objects"
        return
    # a random goal drawn from relaxed-reachable atoms may or may not be solvable
    task = ground(rec.domain, rec.problem)
    rng = stream(seed, "goal")
    goal = frozenset(rng.sample(task.atoms, min(2, len(task.atoms))))
    for problem in (rec.problem, Problem("x", rec.problem.domain_name, rec.problem.objects, rec.problem.init, goal)):
        oracle = bfs(rec.domain, problem, max_states=20_000)
        if oracle is None:
            continue
        res = solve(rec.domain, problem, time_limit=None, max_expansions=None)
        assert res.solved == oracle[0]
        if res.solved:
            assert validate_plan(rec.domain, problem, res.plan).valid
            assert len(res.plan) >= oracle[1]


def test_heuristic_never_infinite_on_solvable_states(gripper2):
    d, p = gripper2
    task = ground(d, p)
    rng = random.Random(0)
    for s in rng.sample(reachable_states(d, p), 10):
        sub = Problem("x", p.domain_name, p.objects, State(s), p.goal)
        solvable = bfs(d, sub)[0]
        if solvable:
            assert h_ff(task, task.encode(s)) < INF
