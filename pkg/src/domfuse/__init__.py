"""Generate planning domains by fusing and mutating PDDL domains, and measure their solvability."""

__version__ = "0.1.0"
