"""Problem generation for fused domains.

A problem is built from the union of the two base problems' objects and
initial states; a random walk of applicable ground actions then reaches a
new state, and a random subset of that state becomes the goal. The walk is
kept as a witness plan, so every generated problem is solvable.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .core import (
    Domain,
    GroundAtom,
    ObjectDecl,
    Plan,
    Problem,
    State,
    apply,
    applicable_actions,
    objects_by_type,
)
from .fusion import DegenerateDomain, FusionTrace, GenerationParams, RenameMap, fuse, resolve_collisions
from .parser import print_domain, print_plan, print_problem
from .seeding import stream

MAX_ATTEMPTS = 10


class EmptyObjectSet(ValueError):
    pass


class WalkStalled(RuntimeError):
    pass


class EmptyFinalState(ValueError):
    pass


class GenerationFailed(RuntimeError):
    def __init__(self, stage: str, reason: str):
        self.stage = stage
        self.reason = reason
        super().__init__(f"generation failed at {stage}: {reason}")


@dataclass
class GenerationRecord:
    domain: Domain
    problem: Problem
    witness: Plan
    walk_final_state: State
    params: GenerationParams
    base_provenance: tuple[str, str] = ("", "")
    depth: int = 1
    trace: FusionTrace = field(default_factory=FusionTrace)
    attempt: int = 0


def _fresh_object(name: str, used: set[str]) -> str:
    k = 2
    while f"{name}_{k}" in used:
        k += 1
    used.add(f"{name}_{k}")
    return f"{name}_{k}"


def build_objects_and_init(
    p1: Problem,
    p2: Problem,
    renames: RenameMap,
    num_objs: int | None,
    rng: random.Random,
) -> tuple[tuple[ObjectDecl, ...], State]:
    """Union both problems' objects and initial states, optionally down-sampled.

    ``p2``'s types and predicates go through ``renames``; an object of ``p2``
    whose name is already used by ``p1`` is renamed like a colliding domain
    name. With ``num_objs`` set, one object of every type used in the initial
    state is kept and the rest of the budget is filled uniformly.
    """
    used = {o.name for o in p1.objects} | {o.name for o in p2.objects}
    p1_names = {o.name for o in p1.objects}
    obj_map = {}
    for o in p2.objects:
        obj_map[o.name] = _fresh_object(o.name, used) if o.name in p1_names else o.name
    objects = list(p1.objects) + [ObjectDecl(obj_map[o.name], renames.type(o.type)) for o in p2.objects]
    init = set(p1.init.atoms)
    for atom in p2.init.atoms:
        init.add(GroundAtom(renames.predicate(atom.predicate), tuple(obj_map[a] for a in atom.args)))

    if num_objs is None or len(objects) <= num_objs:
        return tuple(objects), State(frozenset(init))

    otype = {o.name: o.type for o in objects}
    required = sorted({otype[a] for atom in init for a in atom.args})
    if len(required) > num_objs:
        raise EmptyObjectSet(
            f"num_objs={num_objs} cannot keep one object of each of {len(required)} types in the initial state"
        )
    keep: set[str] = set()
    for t in required:
        pool = sorted(o.name for o in objects if o.type == t)
        keep.add(pool[rng.randrange(len(pool))])
    rest = sorted(o.name for o in objects if o.name not in keep)
    keep.update(rng.sample(rest, num_objs - len(keep)))
    kept_objects = tuple(o for o in objects if o.name in keep)
    kept_init = frozenset(a for a in init if all(x in keep for x in a.args))
    return kept_objects, State(kept_init)


def random_walk(
    domain: Domain,
    objects: Sequence[ObjectDecl],
    init: State,
    n: int,
    rng: random.Random,
) -> tuple[Plan, State]:
    """Apply up to ``n`` uniformly chosen applicable ground actions.

    Stops early at a dead end. Raises :class:`WalkStalled` if no step at all
    was possible.
    """
    if n < 1:
        raise ValueError("walk length must be >= 1")
    typed = objects_by_type(domain, objects)
    state = init
    steps = []
    for _ in range(n):
        acts = applicable_actions(domain, objects, state, typed)
        if not acts:
            break
        a = acts[rng.randrange(len(acts))]
        state = apply(state, a)
        steps.append(a.step())
    if not steps:
        raise WalkStalled("no action is applicable in the initial state")
    return Plan(tuple(steps)), state


def extract_goal(
    init: State, final: State, rng: random.Random, goal_prob: float = 0.3
) -> frozenset[GroundAtom]:
    """Sample a goal from ``final``; each atom is kept with probability ``goal_prob``.

    If atoms changed during the walk, at least one of them is in the goal.
    The goal is never empty.
    """
    atoms = sorted(final.atoms)
    if not atoms:
        raise EmptyFinalState("the final state has no atoms")
    goal = {a for a in atoms if rng.random() < goal_prob}
    changed = [a for a in atoms if a not in init.atoms]
    if changed and goal.isdisjoint(changed):
        goal.add(changed[rng.randrange(len(changed))])
    if not goal:
        goal.add(atoms[rng.randrange(len(atoms))])
    return frozenset(goal)


def generate(
    d1: Domain,
    p1: Problem,
    d2: Domain,
    p2: Problem,
    params: GenerationParams,
    *,
    depth: int = 1,
    name: str | None = None,
    provenance: tuple[str, str] | None = None,
    max_attempts: int = MAX_ATTEMPTS,
) -> GenerationRecord:
    """Fuse two base pairs and generate a problem with a witness plan.

    Attempt ``k`` draws from a stream derived from ``(params.seed, k)``; a
    stalled walk or an empty final state triggers a fresh attempt.
    """
    last = "no attempts made"
    stage = "walk"
    for attempt in range(max_attempts):
        rng = stream(params.seed, attempt)
        d1r, d2r, ren = resolve_collisions(d1, d2)
        try:
            domain, trace = fuse(d1r, d2r, params, rng, name=name, renames=ren)
        except DegenerateDomain as exc:
            raise GenerationFailed("fuse", str(exc)) from exc
        try:
            objects, init = build_objects_and_init(p1, p2, ren, params.num_objs, rng)
        except EmptyObjectSet as exc:
            raise GenerationFailed("objects", str(exc)) from exc
        try:
            witness, final = random_walk(domain, objects, init, params.walk_len, rng)
        except WalkStalled as exc:
            stage, last = "walk", str(exc)
            continue
        try:
            goal = extract_goal(init, final, rng, params.goal_prob)
        except EmptyFinalState as exc:
            stage, last = "goal", str(exc)
            continue
        problem = Problem(f"{domain.name}-problem", domain.name, objects, init, goal)
        return GenerationRecord(
            domain,
            problem,
            witness,
            final,
            params,
            provenance or (d1.name, d2.name),
            depth,
            trace,
            attempt,
        )
    raise GenerationFailed(stage, f"{last} (after {max_attempts} attempts)")


def record_dirname(pair: str, depth: int, seed: int) -> str:
    return f"{pair}-d{depth}-s{seed}"


def write_record(record: GenerationRecord, outdir: str | Path, pair: str | None = None) -> Path:
    """Write domain.pddl, problem.pddl, witness.plan and trace.log into a record directory."""
    pair = pair or "-".join(record.base_provenance)
    path = Path(outdir) / record_dirname(pair, record.depth, record.params.seed)
    path.mkdir(parents=True, exist_ok=True)
    (path / "domain.pddl").write_text(print_domain(record.domain))
    (path / "problem.pddl").write_text(print_problem(record.problem))
    (path / "witness.plan").write_text(print_plan(record.witness))
    (path / "trace.log").write_text(record.trace.to_log())
    return path
