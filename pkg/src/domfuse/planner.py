"""Satisficing planner: grounding, the FF heuristic and greedy best-first search.

Grounding keeps only atoms and actions reachable under the delete
relaxation (negative preconditions are treated as satisfiable). Search
states are frozensets of atom indices.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Sequence

from .core import (
    Domain,
    GroundAtom,
    Plan,
    PlanStep,
    Problem,
    atom_index,
    ground_action,
    match_bindings,
    objects_by_type,
)

DEFAULT_TIME_LIMIT = 200.0
DEFAULT_MAX_EXPANSIONS = 10**6
DEFAULT_MAX_ACTIONS = 10**6

SOLVED = "solved"
UNSOLVABLE = "unsolvable"
TIMEOUT = "timeout"
NODE_CAP = "nodecap"
GROUNDING_CAP = "grounding-cap"
BUDGET_STATUSES = (TIMEOUT, NODE_CAP, GROUNDING_CAP)


class GroundingExplosion(RuntimeError):
    pass


@dataclass(frozen=True)
class TaskAction:
    schema: str
    binding: tuple[str, ...]
    pre: frozenset[int]
    pre_neg: frozenset[int]
    add: frozenset[int]
    dele: frozenset[int]

    def step(self) -> PlanStep:
        return PlanStep(self.schema, self.binding)


@dataclass
class GroundTask:
    atoms: list[GroundAtom]
    actions: list[TaskAction]
    init: frozenset[int]
    goal: frozenset[int]
    unsolvable: bool = False
    atom_ids: dict[GroundAtom, int] = field(default_factory=dict)
    achievers: list[list[int]] = field(default_factory=list)
    consumers: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.atoms)
        if not self.atom_ids:
            self.atom_ids = {a: i for i, a in enumerate(self.atoms)}
        self.achievers = [[] for _ in range(n)]
        self.consumers = [[] for _ in range(n)]
        self.by_first: dict[int, list[int]] = {}
        self.no_pre: list[int] = []
        for i, a in enumerate(self.actions):
            for p in a.add:
                self.achievers[p].append(i)
            for p in a.pre:
                self.consumers[p].append(i)
            if a.pre:
                self.by_first.setdefault(min(a.pre), []).append(i)
            else:
                self.no_pre.append(i)
        self.pre_count = [len(a.pre) for a in self.actions]

    def state_atoms(self, state: frozenset[int]) -> frozenset[GroundAtom]:
        return frozenset(self.atoms[i] for i in state)

    def encode(self, atoms) -> frozenset[int]:
        """Index a set of ground atoms; atoms outside the table are dropped."""
        ids = self.atom_ids
        return frozenset(ids[a] for a in atoms if a in ids)

    def successors(self, state: frozenset[int]) -> list[int]:
        cand = list(self.no_pre)
        by_first = self.by_first
        for p in state:
            cand.extend(by_first.get(p, ()))
        cand.sort()
        acts = self.actions
        return [i for i in cand if acts[i].pre <= state and acts[i].pre_neg.isdisjoint(state)]

    def progress(self, state: frozenset[int], i: int) -> frozenset[int]:
        a = self.actions[i]
        return (state - a.dele) | a.add


def ground(domain: Domain, problem: Problem, max_actions: int = DEFAULT_MAX_ACTIONS) -> GroundTask:
    """Instantiate ``problem`` into a task restricted to relaxed-reachable atoms and actions."""
    typed = objects_by_type(domain, problem.objects)
    reached = set(problem.init.atoms)
    grounded: dict[tuple[str, tuple[str, ...]], object] = {}
    changed = True
    while changed:
        changed = False
        index = atom_index(reached)
        fresh = set()
        for schema in domain.actions:
            for binding in match_bindings(schema, index, typed):
                key = (schema.name, binding)
                if key in grounded:
                    continue
                ga = ground_action(schema, binding)
                grounded[key] = ga
                if len(grounded) > max_actions:
                    raise GroundingExplosion(f"more than {max_actions} ground actions")
                fresh.update(ga.add)
        fresh -= reached
        if fresh:
            reached |= fresh
            changed = True

    atoms = sorted(reached)
    ids = {a: i for i, a in enumerate(atoms)}
    actions = []
    for key in sorted(grounded):
        ga = grounded[key]
        if not ga.pre_pos.isdisjoint(ga.pre_neg):
            continue
        actions.append(
            TaskAction(
                ga.schema,
                ga.binding,
                frozenset(ids[a] for a in ga.pre_pos),
                frozenset(ids[a] for a in ga.pre_neg if a in ids),
                frozenset(ids[a] for a in ga.add),
                frozenset(ids[a] for a in ga.dele if a in ids),
            )
        )
    unsolvable = not problem.goal <= reached
    goal = frozenset(ids[a] for a in problem.goal if a in ids)
    init = frozenset(ids[a] for a in problem.init.atoms)
    return GroundTask(atoms, actions, init, goal, unsolvable, ids)


INF = float("inf")


def relaxed_plan(task: GroundTask, state: frozenset[int]) -> list[int] | None:
    """Extract a relaxed plan from ``state``, or None if some goal is relaxed-unreachable.

    Each atom's supporter is its earliest-layer achiever, ties going to the
    lowest action index. The returned actions are ordered by layer.
    """
    goal = task.goal
    if task.unsolvable:
        return None
    if goal <= state:
        return []
    actions = task.actions
    consumers = task.consumers
    counters = list(task.pre_count)
    level: dict[int, int] = dict.fromkeys(state, 0)
    supporter: dict[int, int] = {}
    act_level: dict[int, int] = {}
    ready = list(task.no_pre)
    for p in state:
        for i in consumers[p]:
            counters[i] -= 1
            if counters[i] == 0:
                ready.append(i)
    missing = len(goal - state)
    k = 0
    while ready and missing:
        ready.sort()
        new_atoms = []
        for i in ready:
            act_level[i] = k
            for p in actions[i].add:
                if p not in level:
                    level[p] = k + 1
                    supporter[p] = i
                    new_atoms.append(p)
                    if p in goal:
                        missing -= 1
        if not missing:
            break
        ready = []
        for p in new_atoms:
            for i in consumers[p]:
                counters[i] -= 1
                if counters[i] == 0:
                    ready.append(i)
        k += 1
    if missing:
        return None

    pending: dict[int, set[int]] = {}
    for g in goal:
        if level[g] > 0:
            pending.setdefault(level[g], set()).add(g)
    selected: set[int] = set()
    for lv in range(max(pending), 0, -1):
        for p in sorted(pending.get(lv, ())):
            i = supporter[p]
            if i in selected:
                continue
            selected.add(i)
            for q in actions[i].pre:
                if level[q] > 0:
                    pending.setdefault(level[q], set()).add(q)
    return sorted(selected, key=lambda i: (act_level[i], i))


def h_ff(task: GroundTask, state: frozenset[int]) -> float:
    plan = relaxed_plan(task, state)
    return INF if plan is None else len(plan)


@dataclass
class SearchResult:
    status: str
    plan: Plan | None = None
    expansions: int = 0
    elapsed: float = 0.0
    generated: int = 0

    @property
    def solved(self) -> bool:
        return self.status == SOLVED

    @property
    def budget_exhausted(self) -> bool:
        return self.status in BUDGET_STATUSES


def _extract(parents: dict, state, task: GroundTask) -> Plan:
    steps = []
    while parents[state] is not None:
        state, i = parents[state]
        steps.append(task.actions[i].step())
    return Plan(tuple(reversed(steps)))


def search(
    task: GroundTask,
    time_limit: float | None = DEFAULT_TIME_LIMIT,
    max_expansions: int | None = DEFAULT_MAX_EXPANSIONS,
) -> SearchResult:
    """Greedy best-first search on h_ff with duplicate detection and FIFO tie-breaking.

    ``None`` for either budget means unbounded.
    """
    start = time.perf_counter()
    if task.unsolvable:
        return SearchResult(UNSOLVABLE, elapsed=time.perf_counter() - start)
    init, goal = task.init, task.goal
    if goal <= init:
        return SearchResult(SOLVED, Plan(), 0, time.perf_counter() - start)
    h0 = relaxed_plan(task, init)
    if h0 is None:
        return SearchResult(UNSOLVABLE, elapsed=time.perf_counter() - start)
    counter = 0
    heap = [(len(h0), counter, init)]
    parents: dict = {init: None}
    expansions = 0
    deadline = None if time_limit is None else start + time_limit
    while heap:
        _, _, s = heapq.heappop(heap)
        if goal <= s:
            return SearchResult(SOLVED, _extract(parents, s, task), expansions, time.perf_counter() - start, counter)
        if max_expansions is not None and expansions >= max_expansions:
            return SearchResult(NODE_CAP, None, expansions, time.perf_counter() - start, counter)
        expansions += 1
        for i in task.successors(s):
            t = task.progress(s, i)
            if t in parents:
                continue
            # one heuristic evaluation can be slow on large tasks
            if deadline is not None and time.perf_counter() > deadline:
                return SearchResult(TIMEOUT, None, expansions, time.perf_counter() - start, counter)
            parents[t] = (s, i)
            rp = relaxed_plan(task, t)
            if rp is None:
                continue
            counter += 1
            heapq.heappush(heap, (len(rp), counter, t))
    return SearchResult(UNSOLVABLE, None, expansions, time.perf_counter() - start, counter)


def solve(
    domain: Domain,
    problem: Problem,
    time_limit: float | None = DEFAULT_TIME_LIMIT,
    max_expansions: int | None = DEFAULT_MAX_EXPANSIONS,
    max_actions: int = DEFAULT_MAX_ACTIONS,
) -> SearchResult:
    """Ground and search; a grounding blow-up is reported as a budget outcome."""
    start = time.perf_counter()
    try:
        task = ground(domain, problem, max_actions)
    except GroundingExplosion:
        return SearchResult(GROUNDING_CAP, elapsed=time.perf_counter() - start)
    remaining = None if time_limit is None else max(0.0, time_limit - (time.perf_counter() - start))
    result = search(task, remaining, max_expansions)
    result.elapsed = time.perf_counter() - start
    return result


def relaxed_replay(task: GroundTask, state: frozenset[int], plan: Sequence[int]) -> frozenset[int] | None:
    """Apply ``plan`` ignoring deletes and negative preconditions; None if a step is inapplicable."""
    cur = set(state)
    for i in plan:
        a = task.actions[i]
        if not a.pre <= cur:
            return None
        cur |= a.add
    return frozenset(cur)
