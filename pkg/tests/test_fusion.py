import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from domfuse import fixtures
from domfuse.core import ActionSchema, Domain, Literal, PredicateSchema
from domfuse.fusion import (
    ADDED_EFF,
    ADDED_PRE,
    NEGATED,
    REMOVED_EFF,
    REMOVED_PRE,
    DegenerateDomain,
    FusionTrace,
    GenerationParams,
    apply_renames,
    delete_only_predicates,
    fuse,
    mutate_action,
    repair_reversibility,
    replay_trace,
    resolve_collisions,
)
from domfuse.parser import parse_domain, print_domain
from domfuse.seeding import stream

ZERO = GenerationParams(prob_add_pre=0, prob_add_eff=0, prob_rem_pre=0, prob_rem_eff=0)
DOMAIN_NAMES = ["gripper", "blocksworld", "depot", "grid", "satellite"]


def names(d: Domain) -> set[str]:
    return {p.name for p in d.predicates} | {a.name for a in d.actions}


def test_rename_appends_suffix():
    g = fixtures.domain("gripper")
    d1, d2, ren = resolve_collisions(g, g)
    assert d1 is g
    assert "move_2" in d2.action_map and "free_2" in d2.predicate_map
    assert ren.actions["move"] == "move_2" and ren.types["ball"] == "ball_2"
    assert names(d1).isdisjoint(names(d2))
    lit = next(iter(d2.action_map["pick_2"].preconditions))
    assert lit.predicate.endswith("_2")
    assert d2.action_map["pick_2"].params[0][1] == "ball_2"


def test_rename_skips_taken_suffix():
    d1 = parse_domain("(define (domain a) (:predicates (p) (p_2)) (:action x :parameters () :effect (p)))")
    d2 = parse_domain("(define (domain b) (:predicates (p)) (:action y :parameters () :effect (p)))")
    _, d2r, ren = resolve_collisions(d1, d2)
    assert ren.predicates == {"p": "p_3"}
    assert "p_3" in d2r.predicate_map


def test_disjoint_names_identity():
    d1, d2 = fixtures.domain("gripper"), fixtures.domain("satellite")
    _, d2r, ren = resolve_collisions(d1, d2)
    shared = names(d1) & names(d2)
    shared_types = {t.name for t in d1.types} & {t.name for t in d2.types}
    assert set(ren.predicates) | set(ren.actions) == shared
    assert set(ren.types) == shared_types
    if not len(ren):
        assert d2r == d2


@pytest.mark.parametrize("a", DOMAIN_NAMES)
@pytest.mark.parametrize("b", DOMAIN_NAMES)
def test_rename_map_covers_exact_intersection(a, b):
    d1, d2 = fixtures.domain(a), fixtures.domain(b)
    _, d2r, ren = resolve_collisions(d1, d2)
    assert set(ren.predicates) | set(ren.actions) == names(d1) & names(d2)
    assert names(d1).isdisjoint(names(d2r))
    assert {t.name for t in d1.types}.isdisjoint({t.name for t in d2r.types})
    assert apply_renames(d2, ren) == d2r


def test_zero_probabilities_are_identity():
    d1, d2, _ = resolve_collisions(fixtures.domain("gripper"), fixtures.domain("blocksworld"))
    out, trace = fuse(d1, d2, ZERO, random.Random(0))
    assert {a.name: a for a in out.actions} == {a.name: a for a in d1.actions + d2.actions}
    assert not trace.events


def test_fuse_is_deterministic_and_replayable():
    g, b = fixtures.domain("gripper"), fixtures.domain("blocksworld")
    texts = []
    for _ in range(2):
        d1, d2, ren = resolve_collisions(g, b)
        out, trace = fuse(d1, d2, GenerationParams(), stream(42, 0), renames=ren)
        texts.append(print_domain(out))
    assert texts[0] == texts[1]
    assert replay_trace(g, b, FusionTrace.from_log(trace.to_log())) == out


@given(st.integers(0, 2**64 - 1), st.sampled_from(DOMAIN_NAMES), st.sampled_from(DOMAIN_NAMES),
       st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.booleans())
def test_fuse_invariants(seed, a, b, ap, ae, rp, re_, rev):
    g, h = fixtures.domain(a), fixtures.domain(b)
    params = GenerationParams(prob_add_pre=ap, prob_add_eff=ae, prob_rem_pre=rp, prob_rem_eff=re_, rev_flag=rev)
    d1, d2, ren = resolve_collisions(g, h)
    out, trace = fuse(d1, d2, params, stream(seed), renames=ren)
    # name uniqueness, schema closure, non-empty effects
    assert len({p.name for p in out.predicates}) == len(out.predicates)
    assert len({x.name for x in out.actions}) == len(out.actions)
    preds = out.predicate_map
    for act in out.actions:
        assert act.effects
        pvars = act.param_types
        assert len(pvars) == len(act.params)
        for lit in act.preconditions | act.effects:
            assert len(lit.args) == preds[lit.predicate].arity
            for v, (_, t) in zip(lit.args, preds[lit.predicate].params):
                assert out.is_subtype(pvars[v], t)
    if rev:
        assert delete_only_predicates(out) == []
    assert parse_domain(print_domain(out)) == out
    assert replay_trace(g, h, trace) == out
    assert replay_trace(g, h, FusionTrace.from_log(trace.to_log())) == out


def test_degenerate_inputs():
    empty = Domain("e", frozenset(), (), (PredicateSchema("p", ()),), ())
    g = fixtures.domain("gripper")
    with pytest.raises(DegenerateDomain):
        fuse(g, empty, GenerationParams(), random.Random(0))


def test_fuse_rejects_unresolved_collisions():
    g = fixtures.domain("gripper")
    with pytest.raises(ValueError):
        fuse(g, g, GenerationParams(), random.Random(0))


ONE_EFFECT = ActionSchema("a", (("?x", "object"),), frozenset({Literal("p", ("?x",))}),
                          frozenset({Literal("p", ("?x",), False)}))
POOL = [PredicateSchema("p", (("?v", "object"),)), PredicateSchema("q", ())]


def test_removal_keeps_last_effect():
    params = GenerationParams(prob_add_pre=0, prob_add_eff=0, prob_rem_eff=1.0)
    for seed in range(50):
        assert mutate_action(ONE_EFFECT, POOL, params, random.Random(seed)).effects == ONE_EFFECT.effects


def test_forced_positive_precondition_addition():
    params = GenerationParams(prob_add_pre=1, prob_add_eff=0, prob_rem_eff=0, prob_neg=0)
    base = ActionSchema("a", (("?x", "object"),), frozenset(), frozenset({Literal("r", ())}))
    for seed in range(50):
        events = []
        out = mutate_action(base, POOL, params, random.Random(seed), events=events)
        added = out.preconditions - base.preconditions
        assert len(added) == 1 and next(iter(added)).positive
        assert [e.kind for e in events] == [ADDED_PRE]


def test_fresh_parameter_when_no_compatible_type():
    types = {"room": "object", "ball": "object"}
    base = ActionSchema("a", (("?r", "room"),), frozenset(), frozenset({Literal("q", ())}))
    pool = [PredicateSchema("holds", (("?b", "ball"), ("?r", "room")))]
    params = GenerationParams(prob_add_pre=1, prob_add_eff=0, prob_rem_eff=0, prob_neg=0)
    out = mutate_action(base, pool, params, random.Random(1), types=types)
    assert out.params == (("?r", "room"), ("?g0", "ball"))
    assert out.preconditions == {Literal("holds", ("?g0", "?r"))}


def test_repair_single_delete():
    d = parse_domain("(define (domain d) (:predicates (p)) (:action a :parameters () :precondition (p) :effect (not (p))))")
    out = repair_reversibility(d, random.Random(0))
    assert delete_only_predicates(out) == []
    assert Literal("p", ()) in out.actions[0].effects
    assert repair_reversibility(out, random.Random(5)) == out


@pytest.mark.parametrize("name", DOMAIN_NAMES)
def test_repair_is_identity_on_reversible_fixtures(name):
    d = fixtures.domain(name)
    if not delete_only_predicates(d):
        assert repair_reversibility(d, random.Random(0)) == d


def test_repair_over_fused_domains():
    g, b = fixtures.domain("gripper"), fixtures.domain("blocksworld")
    for seed in range(100):
        d1, d2, ren = resolve_collisions(g, b)
        out, _ = fuse(d1, d2, GenerationParams(rev_flag=True, prob_rem_eff=0.7), stream(seed))
        assert delete_only_predicates(out) == []


def _calibration_counts(p: float, trials: int, seed: int = 0):
    """Per-gate firing counts over ``trials`` mutations of an action where every gate can act."""
    action = ActionSchema(
        "a", (("?x", "object"),),
        frozenset({Literal("p", ("?x",)), Literal("q", ())}),
        frozenset({Literal("p", ("?x",), False), Literal("r", ()), Literal("s", ())}),
    )
    pool = [PredicateSchema(n, ()) for n in "tuvw"]
    params = GenerationParams(prob_add_pre=p, prob_add_eff=p, prob_rem_pre=p, prob_rem_eff=p, prob_neg=p)
    rng = stream(seed, "calibration", p)
    counts = dict.fromkeys((ADDED_PRE, ADDED_EFF, REMOVED_PRE, REMOVED_EFF, NEGATED), 0)
    for _ in range(trials):
        events = []
        mutate_action(action, pool, params, rng, events=events)
        for e in events:
            counts[e.kind] += 1
    return counts


@pytest.mark.parametrize("p", [0.3, 0.5, 0.7])
def test_gate_rates_within_three_sigma(p):
    n = 4000
    counts = _calibration_counts(p, n)
    for kind in (ADDED_PRE, ADDED_EFF, REMOVED_PRE, REMOVED_EFF):
        assert abs(counts[kind] - n * p) <= 3 * math.sqrt(n * p * (1 - p)), kind
    m = counts[ADDED_PRE] + counts[ADDED_EFF]
    assert abs(counts[NEGATED] - m * p) <= 3 * math.sqrt(m * p * (1 - p))


def test_params_validation():
    with pytest.raises(ValueError):
        GenerationParams(prob_neg=1.5)
    with pytest.raises(ValueError):
        GenerationParams(walk_len=0)
    with pytest.raises(ValueError):
        GenerationParams(num_objs=0)
    assert GenerationParams().prob_rem_pre == 0 and GenerationParams().seed == 42
