"""Syntax checking of domain/problem pairs and step-by-step plan replay."""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    Domain,
    Plan,
    Problem,
    State,
    apply,
    check_binding,
    ground_action,
    is_applicable,
    satisfies,
)
from .parser import ParseReport, PDDLError, parse_domain, parse_problem

VALID = "Valid"
INVALID = "Invalid"

ACTION_UNKNOWN = "ActionUnknown"
BAD_BINDING = "BadBinding"
PRECONDITION_UNSATISFIED = "PreconditionUnsatisfied"
GOAL_UNSATISFIED = "GoalUnsatisfied"


@dataclass(frozen=True)
class Failure:
    step: int
    reason: str
    details: tuple[str, ...] = ()


@dataclass(frozen=True)
class ValidationOutcome:
    verdict: str
    final_state: State
    failure: Failure | None = None
    steps: int = 0

    @property
    def valid(self) -> bool:
        return self.verdict == VALID

    def summary(self) -> str:
        if self.valid:
            return f"VALID steps={self.steps}"
        return f"INVALID step={self.failure.step} reason={self.failure.reason}"


def validate_syntax(domain_text: str | bytes, problem_text: str | bytes) -> ParseReport:
    """Parse both files and type-check the problem against the domain."""
    try:
        domain = parse_domain(domain_text)
        parse_problem(problem_text, domain)
    except PDDLError as exc:
        return exc.report()
    return ParseReport("success")


def validate_plan(domain: Domain, problem: Problem, plan: Plan) -> ValidationOutcome:
    """Replay ``plan`` from the initial state and stop at the first failing step.

    Steps are numbered from 0; a goal failure is reported at ``len(plan)``.
    """
    state = problem.init
    otypes = problem.object_type
    for i, step in enumerate(plan.steps):
        schema = domain.action_map.get(step.action)
        if schema is None:
            return ValidationOutcome(INVALID, state, Failure(i, ACTION_UNKNOWN, (step.action,)), i)
        reason = check_binding(domain, otypes, schema, step.args)
        if reason is not None:
            return ValidationOutcome(INVALID, state, Failure(i, BAD_BINDING, (reason,)), i)
        action = ground_action(schema, step.args)
        if not is_applicable(state, action):
            missing = [str(a) for a in sorted(action.pre_pos - state.atoms)]
            present = [f"(not {a})" for a in sorted(action.pre_neg & state.atoms)]
            return ValidationOutcome(
                INVALID, state, Failure(i, PRECONDITION_UNSATISFIED, tuple(missing + present)), i
            )
        state = apply(state, action)
    n = len(plan)
    if not satisfies(state, problem.goal):
        missing = tuple(str(a) for a in sorted(problem.goal - state.atoms))
        return ValidationOutcome(INVALID, state, Failure(n, GOAL_UNSATISFIED, missing), n)
    return ValidationOutcome(VALID, state, None, n)
