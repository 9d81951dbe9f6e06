"""Domains, problems, states and the STRIPS transition function.

All values are immutable. ``Domain`` and ``Problem`` keep their members in
declaration order (fusion walks actions in that order) but compare as sets,
so a canonically printed and re-parsed value equals the original.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Iterable, Iterator, Mapping, Sequence

OBJECT = "object"


class NotApplicable(Exception):
    """Raised by :func:`apply` when the action's precondition does not hold."""

    def __init__(self, action: "GroundAction", missing, present):
        self.action = action
        self.missing = frozenset(missing)
        self.present = frozenset(present)
        super().__init__(f"{action.name} is not applicable")


@dataclass(frozen=True, order=True)
class TypeDecl:
    name: str
    parent: str = OBJECT


@dataclass(frozen=True, order=True)
class PredicateSchema:
    name: str
    params: tuple[tuple[str, str], ...] = ()

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True, order=True)
class Literal:
    predicate: str
    args: tuple[str, ...] = ()
    positive: bool = True

    def negate(self) -> Literal:
        return Literal(self.predicate, self.args, not self.positive)

    def __str__(self) -> str:
        atom = "(" + " ".join((self.predicate, *self.args)) + ")"
        return atom if self.positive else f"(not {atom})"


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple[tuple[str, str], ...] = ()
    preconditions: frozenset[Literal] = frozenset()
    effects: frozenset[Literal] = frozenset()

    @property
    def param_types(self) -> dict[str, str]:
        return dict(self.params)

    def add_effects(self) -> list[Literal]:
        return sorted(lit for lit in self.effects if lit.positive)

    def del_effects(self) -> list[Literal]:
        return sorted(lit for lit in self.effects if not lit.positive)


def _set_key(items) -> frozenset:
    return frozenset(items)


@dataclass(frozen=True, eq=False)
class Domain:
    name: str
    requirements: frozenset[str] = frozenset()
    types: tuple[TypeDecl, ...] = ()
    predicates: tuple[PredicateSchema, ...] = ()
    actions: tuple[ActionSchema, ...] = ()

    def _key(self):
        return (
            self.name,
            self.requirements,
            _set_key(self.types),
            _set_key(self.predicates),
            _set_key(self.actions),
        )

    def __eq__(self, other):
        if not isinstance(other, Domain):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    @cached_property
    def type_parent(self) -> dict[str, str]:
        return {t.name: t.parent for t in self.types}

    @cached_property
    def predicate_map(self) -> dict[str, PredicateSchema]:
        return {p.name: p for p in self.predicates}

    @cached_property
    def action_map(self) -> dict[str, ActionSchema]:
        return {a.name: a for a in self.actions}

    def has_type(self, name: str) -> bool:
        return name == OBJECT or name in self.type_parent

    def ancestors(self, name: str) -> list[str]:
        """``name`` followed by its supertypes, ending at ``object``."""
        chain = [name]
        seen = {name}
        while name != OBJECT:
            name = self.type_parent.get(name, OBJECT)
            if name in seen:
                break
            chain.append(name)
            seen.add(name)
        return chain

    def is_subtype(self, sub: str, sup: str) -> bool:
        return sup == OBJECT or sup in self.ancestors(sub)


@dataclass(frozen=True, order=True)
class ObjectDecl:
    name: str
    type: str = OBJECT


@dataclass(frozen=True, order=True)
class GroundAtom:
    predicate: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        return "(" + " ".join((self.predicate, *self.args)) + ")"


@dataclass(frozen=True)
class State:
    atoms: frozenset[GroundAtom] = frozenset()

    def __contains__(self, atom: GroundAtom) -> bool:
        return atom in self.atoms

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self) -> Iterator[GroundAtom]:
        return iter(sorted(self.atoms))


@dataclass(frozen=True, eq=False)
class Problem:
    name: str
    domain_name: str
    objects: tuple[ObjectDecl, ...] = ()
    init: State = field(default_factory=State)
    goal: frozenset[GroundAtom] = frozenset()

    def _key(self):
        return (self.name, self.domain_name, frozenset(self.objects), self.init, self.goal)

    def __eq__(self, other):
        if not isinstance(other, Problem):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    @cached_property
    def object_type(self) -> dict[str, str]:
        return {o.name: o.type for o in self.objects}


@dataclass(frozen=True, order=True)
class GroundAction:
    schema: str
    binding: tuple[str, ...]
    pre_pos: frozenset[GroundAtom] = frozenset()
    pre_neg: frozenset[GroundAtom] = frozenset()
    add: frozenset[GroundAtom] = frozenset()
    dele: frozenset[GroundAtom] = frozenset()

    @property
    def name(self) -> str:
        return "(" + " ".join((self.schema, *self.binding)) + ")"

    def step(self) -> PlanStep:
        return PlanStep(self.schema, self.binding)


@dataclass(frozen=True, order=True)
class PlanStep:
    action: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        return "(" + " ".join((self.action, *self.args)) + ")"


@dataclass(frozen=True)
class Plan:
    steps: tuple[PlanStep, ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[PlanStep]:
        return iter(self.steps)


def is_applicable(state: State, action: GroundAction) -> bool:
    atoms = state.atoms
    return action.pre_pos <= atoms and action.pre_neg.isdisjoint(atoms)


def apply(state: State, action: GroundAction) -> State:
    if not is_applicable(state, action):
        raise NotApplicable(
            action, action.pre_pos - state.atoms, action.pre_neg & state.atoms
        )
    return State((state.atoms - action.dele) | action.add)


def satisfies(state: State, goal: Iterable[GroundAtom]) -> bool:
    return frozenset(goal) <= state.atoms


def ground_literal(lit: Literal, sub: Mapping[str, str]) -> GroundAtom:
    return GroundAtom(lit.predicate, tuple(sub.get(a, a) for a in lit.args))


def ground_action(schema: ActionSchema, binding: Sequence[str]) -> GroundAction:
    """Instantiate ``schema``; when an atom is both added and deleted, the add wins."""
    binding = tuple(binding)
    sub = {var: obj for (var, _), obj in zip(schema.params, binding)}
    pre_pos, pre_neg, add, dele = set(), set(), set(), set()
    for lit in schema.preconditions:
        (pre_pos if lit.positive else pre_neg).add(ground_literal(lit, sub))
    for lit in schema.effects:
        (add if lit.positive else dele).add(ground_literal(lit, sub))
    return GroundAction(
        schema.name,
        binding,
        frozenset(pre_pos),
        frozenset(pre_neg),
        frozenset(add),
        frozenset(dele - add),
    )


def objects_by_type(domain: Domain, objects: Iterable[ObjectDecl]) -> dict[str, list[str]]:
    """Map every type to the sorted names of objects that are instances of it."""
    out: dict[str, list[str]] = {t.name: [] for t in domain.types}
    out[OBJECT] = []
    for obj in sorted(objects):
        for t in domain.ancestors(obj.type):
            out.setdefault(t, []).append(obj.name)
    return out


def atom_index(atoms: Iterable[GroundAtom]) -> dict[str, set[tuple[str, ...]]]:
    index: dict[str, set[tuple[str, ...]]] = {}
    for atom in atoms:
        index.setdefault(atom.predicate, set()).add(atom.args)
    return index


def match_bindings(
    schema: ActionSchema,
    index: Mapping[str, Iterable[tuple[str, ...]]],
    typed_objects: Mapping[str, Sequence[str]],
) -> Iterator[tuple[str, ...]]:
    """Yield every type-correct binding whose positive preconditions are in ``index``.

    Negative preconditions are not checked. Parameters that occur in no
    positive precondition range over all objects of their type.
    """
    var_types = schema.param_types
    allowed = {v: set(typed_objects.get(t, ())) for v, t in var_types.items()}
    pos = [lit for lit in schema.preconditions if lit.positive]
    # most-constrained first: literals sharing variables with earlier ones
    ordered: list[Literal] = []
    bound: set[str] = set()
    pending = sorted(pos, key=lambda l: (-len(l.args), l))
    while pending:
        best = max(pending, key=lambda l: sum(a in bound for a in l.args))
        pending.remove(best)
        ordered.append(best)
        bound.update(best.args)
    free = [v for v, _ in schema.params if v not in bound]
    sub: dict[str, str] = {}

    def rec(i: int) -> Iterator[tuple[str, ...]]:
        if i == len(ordered):
            pools = [typed_objects.get(var_types[v], ()) for v in free]
            for combo in product(*pools):
                full = dict(sub)
                full.update(zip(free, combo))
                yield tuple(full[v] for v, _ in schema.params)
            return
        lit = ordered[i]
        for args in sorted(index.get(lit.predicate, ())):
            if len(args) != len(lit.args):
                continue
            newly = []
            ok = True
            for var, obj in zip(lit.args, args):
                cur = sub.get(var)
                if cur is None:
                    if obj not in allowed.get(var, ()):
                        ok = False
                        break
                    sub[var] = obj
                    newly.append(var)
                elif cur != obj:
                    ok = False
                    break
            if ok:
                yield from rec(i + 1)
            for var in newly:
                del sub[var]

    yield from rec(0)


def applicable_actions(
    domain: Domain,
    objects: Iterable[ObjectDecl],
    state: State,
    typed: Mapping[str, Sequence[str]] | None = None,
) -> list[GroundAction]:
    """All ground actions applicable in ``state``, sorted by (schema, binding)."""
    if typed is None:
        typed = objects_by_type(domain, objects)
    index = atom_index(state.atoms)
    out = []
    for schema in domain.actions:
        for binding in match_bindings(schema, index, typed):
            ga = ground_action(schema, binding)
            if is_applicable(state, ga):
                out.append(ga)
    out.sort(key=lambda a: (a.schema, a.binding))
    return out


def check_atom(domain: Domain, object_type: Mapping[str, str], atom: GroundAtom) -> str | None:
    """Return a reason string if ``atom`` is ill-typed, else None."""
    pred = domain.predicate_map.get(atom.predicate)
    if pred is None:
        return f"unknown predicate {atom.predicate}"
    if len(atom.args) != pred.arity:
        return f"{atom.predicate} expects {pred.arity} arguments, got {len(atom.args)}"
    for obj, (_, ptype) in zip(atom.args, pred.params):
        otype = object_type.get(obj)
        if otype is None:
            return f"unknown object {obj}"
        if not domain.is_subtype(otype, ptype):
            return f"object {obj} of type {otype} is not a {ptype}"
    return None


def check_binding(
    domain: Domain, object_type: Mapping[str, str], schema: ActionSchema, args: Sequence[str]
) -> str | None:
    if len(args) != len(schema.params):
        return f"{schema.name} expects {len(schema.params)} arguments, got {len(args)}"
    for obj, (_, ptype) in zip(args, schema.params):
        otype = object_type.get(obj)
        if otype is None:
            return f"unknown object {obj}"
        if not domain.is_subtype(otype, ptype):
            return f"object {obj} of type {otype} is not a {ptype}"
    return None


def is_well_typed(domain: Domain, problem: Problem, state: State) -> bool:
    return all(check_atom(domain, problem.object_type, a) is None for a in state.atoms)
