import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from domfuse import fixtures
from domfuse.core import GroundAtom, ObjectDecl, State, apply, applicable_actions, is_well_typed
from domfuse.fusion import FusionTrace, GenerationParams, resolve_collisions
from domfuse.parser import parse_domain, parse_plan, parse_problem
from domfuse.probgen import (
    EmptyFinalState,
    EmptyObjectSet,
    GenerationFailed,
    WalkStalled,
    build_objects_and_init,
    extract_goal,
    generate,
    random_walk,
    record_dirname,
    write_record,
)
from domfuse.seeding import stream
from domfuse.validator import validate_plan


def A(pred, *args):
    return GroundAtom(pred, tuple(args))


@pytest.fixture(scope="module")
def gb():
    d1, p1 = fixtures.pair("gripper-1ball")
    d2, p2 = fixtures.pair("blocks-3")
    return d1, p1, d2, p2


def test_union_without_sampling(gb):
    d1, p1, d2, p2 = gb
    _, _, ren = resolve_collisions(d1, d2)
    objs, init = build_objects_and_init(p1, p2, ren, None, random.Random(0))
    assert set(objs) == set(p1.objects) | set(p2.objects)
    assert init.atoms == p1.init.atoms | p2.init.atoms
    big, init2 = build_objects_and_init(p1, p2, ren, 100, random.Random(0))
    assert big == objs and init2 == init


def test_downsample_golden(gb):
    d1, p1, d2, p2 = gb
    _, _, ren = resolve_collisions(d1, d2)
    objs, init = build_objects_and_init(p1, p2, ren, 5, stream(42, 0))
    assert sorted(o.name for o in objs) == ["a", "b", "b1", "g1", "rooma"]
    assert init.atoms == {
        A("at-robby", "rooma"), A("ball-at", "b1", "rooma"), A("clear", "b"), A("free", "g1"),
        A("handempty"), A("ontable", "a"), A("ontable", "b"),
    }
    kept = {o.name for o in objs}
    assert all(set(a.args) <= kept for a in init.atoms)


def test_downsample_too_small(gb):
    d1, p1, d2, p2 = gb
    _, _, ren = resolve_collisions(d1, d2)
    with pytest.raises(EmptyObjectSet):
        build_objects_and_init(p1, p2, ren, 2, random.Random(0))


def test_colliding_objects_renamed():
    d, p = fixtures.pair("gripper-1ball")
    _, d2, ren = resolve_collisions(d, d)
    objs, init = build_objects_and_init(p, p, ren, None, random.Random(0))
    names = [o.name for o in objs]
    assert len(names) == len(set(names)) == 8
    assert ObjectDecl("b1_2", "ball_2") in objs
    assert A("ball-at_2", "b1_2", "rooma_2") in init


def test_walk_stalls_at_dead_end():
    d = parse_domain("(define (domain d) (:predicates (p)) (:action a :parameters () :precondition (p) :effect (not (p))))")
    with pytest.raises(WalkStalled):
        random_walk(d, (), State(frozenset()), 5, random.Random(0))
    plan, final = random_walk(d, (), State(frozenset({A("p")})), 5, random.Random(0))
    assert len(plan) == 1 and final.atoms == frozenset()


def test_three_step_walks_exhaustive(gripper):
    """Every walk the generator can produce is one of the brute-force enumerated legal sequences."""
    d, p = gripper
    legal = set()

    def extend(state, prefix):
        if len(prefix) == 3:
            legal.add(tuple(prefix))
            return
        acts = applicable_actions(d, p.objects, state)
        if not acts:
            legal.add(tuple(prefix))
        for a in acts:
            extend(apply(state, a), prefix + [a.step()])

    extend(p.init, [])
    seen = set()
    for seed in range(300):
        plan, final = random_walk(d, p.objects, p.init, 3, random.Random(seed))
        assert plan.steps in legal
        seen.add(plan.steps)
    # uniform choice over a small tree reaches every leaf
    assert seen == legal


def test_goal_fallbacks():
    init = State(frozenset({A("p")}))
    for seed in range(30):
        goal = extract_goal(init, init, random.Random(seed))
        assert goal and goal <= init.atoms
    final = State(frozenset({A("p"), A("q")}))
    for seed in range(30):
        assert A("q") in extract_goal(init, final, random.Random(seed), goal_prob=0.0)
    with pytest.raises(EmptyFinalState):
        extract_goal(init, State(frozenset()), random.Random(0))


def test_goal_inclusion_rate():
    atoms = frozenset(A("p", str(i)) for i in range(20))
    state = State(atoms)
    trials = 10_000
    rng = stream("goal-calibration")
    hits = sum(len(extract_goal(state, state, rng)) for _ in range(trials))
    p = 0.3
    # the single fallback atom is forced only when the sample is empty
    expected = p + (1 - p) ** 20 / 20
    sigma = math.sqrt(p * (1 - p) / (20 * trials))
    assert abs(hits / (20 * trials) - expected) <= 3 * sigma


def test_generate_record_invariants(gb):
    d1, p1, d2, p2 = gb
    for seed in range(40):
        params = GenerationParams(seed=seed)
        rec = generate(d1, p1, d2, p2, params)
        out = validate_plan(rec.domain, rec.problem, rec.witness)
        assert out.valid
        assert out.final_state == rec.walk_final_state
        assert rec.problem.goal <= rec.walk_final_state.atoms
        assert 1 <= len(rec.witness) <= params.walk_len
        assert is_well_typed(rec.domain, rec.problem, rec.problem.init)
        assert rec.base_provenance == ("gripper", "blocksworld")


@given(st.integers(0, 2**64 - 1), st.sampled_from(fixtures.BASES), st.sampled_from(fixtures.BASES),
       st.sampled_from([None, 4, 6, 9]), st.booleans())
def test_generate_any_pair(seed, a, b, num_objs, rev):
    d1, p1 = fixtures.pair(a)
    d2, p2 = fixtures.pair(b)
    params = GenerationParams(seed=seed, num_objs=num_objs, rev_flag=rev, walk_len=8)
    try:
        rec = generate(d1, p1, d2, p2, params)
    except GenerationFailed as exc:
        assert exc.stage in ("objects", "walk", "goal")
        return
    assert validate_plan(rec.domain, rec.problem, rec.witness).valid
    assert rec.problem.goal <= rec.walk_final_state.atoms
    if num_objs is not None:
        assert len(rec.problem.objects) <= num_objs


def test_generate_is_deterministic(gb):
    d1, p1, d2, p2 = gb
    a = generate(d1, p1, d2, p2, GenerationParams(seed=9))
    b = generate(d1, p1, d2, p2, GenerationParams(seed=9))
    assert a.domain == b.domain and a.problem == b.problem and a.witness == b.witness
    c = generate(d1, p1, d2, p2, GenerationParams(seed=10))
    assert (c.domain, c.problem, c.witness) != (a.domain, a.problem, a.witness)


def test_generation_failure_reports_stage():
    d = parse_domain("(define (domain d) (:predicates (p)) (:action a :parameters () :precondition (p) :effect (not (p))))")
    p = parse_problem("(define (problem x) (:domain d) (:init) (:goal (and)))", d)
    params = GenerationParams(prob_add_pre=0, prob_add_eff=0, prob_rem_eff=0)
    with pytest.raises(GenerationFailed) as info:
        generate(d, p, d, p, params)
    assert info.value.stage == "walk"


def test_write_record(tmp_path, gb):
    d1, p1, d2, p2 = gb
    rec = generate(d1, p1, d2, p2, GenerationParams(seed=3), depth=2)
    path = write_record(rec, tmp_path, pair="g+b")
    assert path.name == record_dirname("g+b", 2, 3) == "g+b-d2-s3"
    dom = parse_domain((path / "domain.pddl").read_text())
    prob = parse_problem((path / "problem.pddl").read_text(), dom)
    plan = parse_plan((path / "witness.plan").read_text())
    assert dom == rec.domain and prob == rec.problem and plan == rec.witness
    assert FusionTrace.from_log((path / "trace.log").read_text()).events == rec.trace.events
    assert validate_plan(dom, prob, plan).valid


def test_walk_uniform_over_ground_actions(gripper2):
    """First-step frequencies match 1/|applicable| per ground action."""
    d, p = gripper2
    acts = applicable_actions(d, p.objects, p.init)
    counts = {a.step(): 0 for a in acts}
    n = 6000
    rng = stream("walk-uniform")
    for _ in range(n):
        plan, _ = random_walk(d, p.objects, p.init, 1, rng)
        counts[plan.steps[0]] += 1
    q = 1 / len(acts)
    for c in counts.values():
        assert abs(c - n * q) <= 4 * math.sqrt(n * q * (1 - q))
