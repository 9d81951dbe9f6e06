"""Base domains and small problems used as fusion inputs and in tests."""

from __future__ import annotations

from importlib.resources import files

from ..core import Domain, Problem
from ..parser import parse_domain, parse_problem

#: problem fixture -> domain fixture
PROBLEMS = {
    "gripper-1ball": "gripper",
    "gripper-2ball": "gripper",
    "blocks-3": "blocksworld",
    "depot-small": "depot",
    "grid-small": "grid",
    "satellite-small": "satellite",
}

#: one problem per base domain, in a fixed order
BASES = ("gripper-1ball", "blocks-3", "depot-small", "grid-small", "satellite-small")


def text(name: str) -> str:
    return (files(__name__) / f"{name}.pddl").read_text()


def path(name: str):
    return files(__name__) / f"{name}.pddl"


def domain(name: str) -> Domain:
    return parse_domain(text(name))


def pair(problem: str) -> tuple[Domain, Problem]:
    d = domain(PROBLEMS[problem])
    return d, parse_problem(text(problem), d)
