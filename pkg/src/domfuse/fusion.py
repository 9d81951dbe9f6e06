"""Merging two domains and randomly mutating their actions.

Each action gets at most one precondition addition, one effect addition, one
precondition removal and one effect removal, each gated by an independent
uniform draw. Added literals are negated with probability ``prob_neg``. The
draw order per action is fixed (add-pre, add-eff, rem-pre, rem-eff) so that a
seed fully determines the result.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .core import OBJECT, ActionSchema, Domain, Literal, PredicateSchema, TypeDecl
from .parser import PDDLError, read_sexprs, with_required_flags, SList, Token

ADDED_PRE = "added-precondition"
ADDED_EFF = "added-effect"
REMOVED_PRE = "removed-precondition"
REMOVED_EFF = "removed-effect"
NEGATED = "negation-applied"
REPAIRED = "reversibility-repair"
EVENT_KINDS = (ADDED_PRE, ADDED_EFF, REMOVED_PRE, REMOVED_EFF, NEGATED, REPAIRED)


class DegenerateDomain(ValueError):
    pass


@dataclass(frozen=True)
class GenerationParams:
    prob_add_pre: float = 0.5
    prob_add_eff: float = 0.5
    prob_rem_pre: float = 0.0
    prob_rem_eff: float = 0.3
    prob_neg: float = 0.5
    num_objs: int | None = None
    rev_flag: bool = False
    walk_len: int = 20
    seed: int = 42
    goal_prob: float = 0.3

    def __post_init__(self):
        for name in ("prob_add_pre", "prob_add_eff", "prob_rem_pre", "prob_rem_eff", "prob_neg", "goal_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.walk_len < 1:
            raise ValueError(f"walk_len must be >= 1, got {self.walk_len}")
        if self.num_objs is not None and self.num_objs < 1:
            raise ValueError(f"num_objs must be positive, got {self.num_objs}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class RenameMap:
    types: dict[str, str] = field(default_factory=dict)
    predicates: dict[str, str] = field(default_factory=dict)
    actions: dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.types) + len(self.predicates) + len(self.actions)

    def items(self):
        for kind in ("types", "predicates", "actions"):
            for old, new in sorted(getattr(self, kind).items()):
                yield kind, old, new

    def type(self, name: str) -> str:
        return self.types.get(name, name)

    def predicate(self, name: str) -> str:
        return self.predicates.get(name, name)


@dataclass(frozen=True)
class MutationEvent:
    action: str
    kind: str
    literal: Literal
    draw: float
    new_params: tuple[tuple[str, str], ...] = ()


@dataclass
class FusionTrace:
    name: str = ""
    renames: RenameMap = field(default_factory=RenameMap)
    events: list[MutationEvent] = field(default_factory=list)

    def for_action(self, name: str) -> list[MutationEvent]:
        return [e for e in self.events if e.action == name]

    def to_log(self) -> str:
        lines = [f"name\t{self.name}"]
        lines += [f"rename\t{kind}\t{old}\t{new}" for kind, old, new in self.renames.items()]
        for e in self.events:
            params = ",".join(f"{v}:{t}" for v, t in e.new_params) or "-"
            lines.append(f"event\t{e.action}\t{e.kind}\t{e.literal}\t{e.draw!r}\t{params}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_log(cls, text: str) -> FusionTrace:
        trace = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            try:
                if parts[0] == "name":
                    trace.name = parts[1]
                elif parts[0] == "rename":
                    getattr(trace.renames, parts[1])[parts[2]] = parts[3]
                elif parts[0] == "event":
                    _, action, kind, lit, draw, params = parts
                    if kind not in EVENT_KINDS:
                        raise ValueError(f"unknown event kind {kind}")
                    new_params = () if params == "-" else tuple(
                        tuple(p.split(":", 1)) for p in params.split(",")
                    )
                    trace.events.append(MutationEvent(action, kind, _parse_literal(lit), float(draw), new_params))
                else:
                    raise ValueError(f"unknown record {parts[0]}")
            except (ValueError, IndexError, AttributeError, PDDLError) as exc:
                raise ValueError(f"trace line {lineno}: {exc}") from None
        return trace


def _parse_literal(text: str) -> Literal:
    (node,) = read_sexprs(text)
    positive = True
    if isinstance(node, SList) and node.items and isinstance(node.items[0], Token) and node.items[0].text == "not":
        node, positive = node.items[1], False
    words = [t.text for t in node.items]
    return Literal(words[0], tuple(words[1:]), positive)


# ------------------------------------------------------------- renaming

def _fresh(name: str, used: set[str]) -> str:
    k = 2
    while f"{name}_{k}" in used:
        k += 1
    new = f"{name}_{k}"
    used.add(new)
    return new


def apply_renames(d: Domain, ren: RenameMap) -> Domain:
    """Rewrite every type, predicate and action name of ``d`` through ``ren``."""
    if not len(ren):
        return d
    rt, rp = ren.type, ren.predicate

    def params(ps):
        return tuple((v, rt(t)) for v, t in ps)

    def lits(ls):
        return frozenset(Literal(rp(l.predicate), l.args, l.positive) for l in ls)

    return Domain(
        d.name,
        d.requirements,
        tuple(TypeDecl(rt(t.name), rt(t.parent)) for t in d.types),
        tuple(PredicateSchema(rp(p.name), params(p.params)) for p in d.predicates),
        tuple(
            ActionSchema(ren.actions.get(a.name, a.name), params(a.params), lits(a.preconditions), lits(a.effects))
            for a in d.actions
        ),
    )


def resolve_collisions(d1: Domain, d2: Domain) -> tuple[Domain, Domain, RenameMap]:
    """Rename everything in ``d2`` whose name also occurs in ``d1``.

    Predicates and actions share one namespace, types another. A colliding
    name gets ``_2`` appended, or ``_3`` and so on until it is fresh.
    """
    sym1 = {p.name for p in d1.predicates} | {a.name for a in d1.actions}
    types1 = {t.name for t in d1.types}
    used_sym = sym1 | {p.name for p in d2.predicates} | {a.name for a in d2.actions}
    used_types = types1 | {t.name for t in d2.types} | {OBJECT}
    ren = RenameMap()
    for t in d2.types:
        if t.name in types1:
            ren.types[t.name] = _fresh(t.name, used_types)
    for p in d2.predicates:
        if p.name in sym1:
            ren.predicates[p.name] = _fresh(p.name, used_sym)
    for a in d2.actions:
        if a.name in sym1:
            ren.actions[a.name] = _fresh(a.name, used_sym)
    return d1, apply_renames(d2, ren), ren


# ------------------------------------------------------------- mutation

def _subtype_fn(types: Mapping[str, str]) -> Callable[[str, str], bool]:
    def is_subtype(sub: str, sup: str) -> bool:
        seen = set()
        while True:
            if sub == sup or sup == OBJECT:
                return True
            if sub == OBJECT or sub in seen:
                return False
            seen.add(sub)
            sub = types.get(sub, OBJECT)

    return is_subtype


def _fresh_var(taken: set[str]) -> str:
    n = 0
    while f"?g{n}" in taken:
        n += 1
    return f"?g{n}"


def bind_literal(
    pred: PredicateSchema,
    params: Sequence[tuple[str, str]],
    rng: random.Random,
    is_subtype: Callable[[str, str], bool],
) -> tuple[Literal, tuple[tuple[str, str], ...]]:
    """Bind each argument of ``pred`` to a compatible existing parameter.

    Positions with no compatible parameter get a fresh ``?gN`` parameter,
    returned as the second element.
    """
    existing = list(params)
    taken = {v for v, _ in existing}
    args, new_params = [], []
    for _, ptype in pred.params:
        candidates = [v for v, t in existing if is_subtype(t, ptype)]
        if candidates:
            args.append(candidates[rng.randrange(len(candidates))])
        else:
            var = _fresh_var(taken)
            taken.add(var)
            new_params.append((var, ptype))
            args.append(var)
    return Literal(pred.name, tuple(args)), tuple(new_params)


def add_precondition(pre: set[Literal], lit: Literal) -> None:
    if lit.negate() not in pre:
        pre.add(lit)


def add_effect(eff: set[Literal], lit: Literal) -> None:
    """Add ``lit`` to an effect set; an add effect displaces its own delete, never the reverse."""
    if lit.negate() in eff:
        if not lit.positive:
            return
        eff.discard(lit.negate())
    eff.add(lit)


def mutate_action(
    a: ActionSchema,
    pool: Sequence[PredicateSchema],
    params: GenerationParams,
    rng: random.Random,
    *,
    types: Mapping[str, str] | None = None,
    events: list[MutationEvent] | None = None,
) -> ActionSchema:
    if not pool:
        raise DegenerateDomain("predicate pool is empty")
    is_subtype = _subtype_fn(types or {})
    pool = sorted(pool)
    plist = list(a.params)
    pre, eff = set(a.preconditions), set(a.effects)
    log = events if events is not None else []

    def addition(prob: float, kind: str, target: set[Literal], add: Callable) -> None:
        draw = rng.random()
        if draw >= prob:
            return
        pred = pool[rng.randrange(len(pool))]
        lit, new = bind_literal(pred, plist, rng, is_subtype)
        neg_draw = rng.random()
        if neg_draw < params.prob_neg:
            lit = lit.negate()
        plist.extend(new)
        add(target, lit)
        log.append(MutationEvent(a.name, kind, lit, draw, new))
        if not lit.positive:
            log.append(MutationEvent(a.name, NEGATED, lit, neg_draw))

    addition(params.prob_add_pre, ADDED_PRE, pre, add_precondition)
    addition(params.prob_add_eff, ADDED_EFF, eff, add_effect)

    draw = rng.random()
    if draw < params.prob_rem_pre and pre:
        lit = sorted(pre)[rng.randrange(len(pre))]
        pre.discard(lit)
        log.append(MutationEvent(a.name, REMOVED_PRE, lit, draw))
    draw = rng.random()
    if draw < params.prob_rem_eff and len(eff) > 1:
        lit = sorted(eff)[rng.randrange(len(eff))]
        eff.discard(lit)
        log.append(MutationEvent(a.name, REMOVED_EFF, lit, draw))

    return ActionSchema(a.name, tuple(plist), frozenset(pre), frozenset(eff))


def delete_only_predicates(d: Domain) -> list[str]:
    deleted, added = set(), set()
    for a in d.actions:
        for lit in a.effects:
            (added if lit.positive else deleted).add(lit.predicate)
    return sorted(deleted - added)


def repair_reversibility(
    d: Domain, rng: random.Random, *, events: list[MutationEvent] | None = None
) -> Domain:
    """Give every delete-only predicate an add effect on a uniformly chosen action."""
    offending = delete_only_predicates(d)
    if not offending:
        return d
    is_subtype = _subtype_fn(d.type_parent)
    actions = list(d.actions)
    log = events if events is not None else []
    for pname in offending:
        i = rng.randrange(len(actions))
        a = actions[i]
        lit, new = bind_literal(d.predicate_map[pname], a.params, rng, is_subtype)
        eff = set(a.effects)
        add_effect(eff, lit)
        actions[i] = ActionSchema(a.name, a.params + new, a.preconditions, frozenset(eff))
        log.append(MutationEvent(a.name, REPAIRED, lit, 0.0, new))
    return Domain(d.name, d.requirements, d.types, d.predicates, tuple(actions))


def fuse(
    d1: Domain,
    d2: Domain,
    params: GenerationParams,
    rng: random.Random,
    *,
    name: str | None = None,
    renames: RenameMap | None = None,
) -> tuple[Domain, FusionTrace]:
    """Union two collision-free domains and mutate every action.

    Actions are visited in declaration order, ``d1``'s first. The
    reversibility repair runs afterwards when ``params.rev_flag`` is set.
    """
    for d in (d1, d2):
        if not d.actions or not d.predicates:
            raise DegenerateDomain(f"domain {d.name} has no actions or no predicates")
    sym1 = set(d1.predicate_map) | set(d1.action_map)
    clash = (sym1 & (set(d2.predicate_map) | set(d2.action_map))) | (set(d1.type_parent) & set(d2.type_parent))
    if clash:
        raise ValueError(f"domains share names {sorted(clash)}; run resolve_collisions first")
    name = name or f"{d1.name}-{d2.name}"
    trace = FusionTrace(name, renames or RenameMap())
    types = d1.types + d2.types
    preds = d1.predicates + d2.predicates
    type_parent = {t.name: t.parent for t in types}
    actions = tuple(
        mutate_action(a, preds, params, rng, types=type_parent, events=trace.events)
        for a in d1.actions + d2.actions
    )
    out = Domain(name, d1.requirements | d2.requirements, types, preds, actions)
    if params.rev_flag:
        out = repair_reversibility(out, rng, events=trace.events)
    return with_required_flags(out), trace


def replay_trace(d1: Domain, d2: Domain, trace: FusionTrace) -> Domain:
    """Rebuild a fused domain from its un-renamed inputs and trace, without randomness."""
    d2 = apply_renames(d2, trace.renames)
    actions = {a.name: (list(a.params), set(a.preconditions), set(a.effects)) for a in d1.actions + d2.actions}
    for e in trace.events:
        plist, pre, eff = actions[e.action]
        if e.kind == ADDED_PRE:
            plist.extend(e.new_params)
            add_precondition(pre, e.literal)
        elif e.kind in (ADDED_EFF, REPAIRED):
            plist.extend(e.new_params)
            add_effect(eff, e.literal)
        elif e.kind == REMOVED_PRE:
            pre.discard(e.literal)
        elif e.kind == REMOVED_EFF:
            eff.discard(e.literal)
    out = Domain(
        trace.name,
        d1.requirements | d2.requirements,
        d1.types + d2.types,
        d1.predicates + d2.predicates,
        tuple(
            ActionSchema(a.name, tuple(actions[a.name][0]), frozenset(actions[a.name][1]), frozenset(actions[a.name][2]))
            for a in d1.actions + d2.actions
        ),
    )
    return with_required_flags(out)
