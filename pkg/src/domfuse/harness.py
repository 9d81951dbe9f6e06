"""Depth-level experiments and factorial parameter sweeps.

Every item (generate, solve, validate) draws from a seed derived from
``(master seed, depth, pair, item index)``, so items are reproducible in
isolation and results do not depend on scheduling.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import os
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from statistics import mean
from typing import Iterable, Sequence

from . import fixtures
from .core import Domain, Problem
from .fusion import GenerationParams
from .parser import parse_domain, parse_problem
from .planner import DEFAULT_MAX_ACTIONS, DEFAULT_MAX_EXPANSIONS, DEFAULT_TIME_LIMIT, solve
from .probgen import GenerationFailed, generate, write_record
from .seeding import derive_seed, stream
from .validator import validate_plan

log = logging.getLogger(__name__)

REFERENCE_PRE_PAIRS = ((0.3, 0.7), (0.5, 0.5), (0.7, 0.3))
REFERENCE_EFF_PAIRS = ((0.3, 0.7), (0.5, 0.5), (0.7, 0.3))
REFERENCE_NEG = (0.3, 0.5, 0.7)
REFERENCE_REV = (True, False)

GENERATION_FAILED = "generation-failed"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Base:
    label: str
    domain: Domain
    problem: Problem


def load_base(spec: str) -> Base:
    """Resolve a fixture name, or ``domain.pddl,problem.pddl``, into a base pair."""
    spec = spec.strip()
    if spec in fixtures.PROBLEMS:
        d, p = fixtures.pair(spec)
        return Base(spec, d, p)
    parts = [s for s in spec.replace(",", " ").split() if s]
    if len(parts) != 2:
        raise ConfigError(f"base must be a fixture name or 'domain.pddl,problem.pddl': {spec!r}")
    dpath, ppath = map(Path, parts)
    d = parse_domain(dpath.read_bytes())
    return Base(ppath.stem, d, parse_problem(ppath.read_bytes(), d))


@dataclass
class ExperimentConfig:
    bases: list[str] = field(default_factory=lambda: ["gripper-1ball", "blocks-3"])
    depth_max: int = 1
    domains_per_depth: int = 10
    pre_pairs: list[tuple[float, float]] = field(default_factory=lambda: [(0.5, 0.0)])
    eff_pairs: list[tuple[float, float]] = field(default_factory=lambda: [(0.5, 0.3)])
    prob_neg: list[float] = field(default_factory=lambda: [0.5])
    rev_flag: list[bool] = field(default_factory=lambda: [False])
    num_objs: list[int | None] = field(default_factory=lambda: [None])
    walk_len: int = 20
    goal_prob: float = 0.3
    time_limit: float | None = DEFAULT_TIME_LIMIT
    max_expansions: int | None = DEFAULT_MAX_EXPANSIONS
    max_actions: int = DEFAULT_MAX_ACTIONS
    seed: int = 42
    output_dir: str | None = None
    jobs: int = 1
    record_time: bool = False

    def validate(self) -> None:
        for name in ("bases", "pre_pairs", "eff_pairs", "prob_neg", "rev_flag", "num_objs"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        if self.depth_max < 1:
            raise ConfigError("depth_max must be >= 1")
        if self.domains_per_depth < 1:
            raise ConfigError("domains_per_depth must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        try:
            for params in self.grid():
                pass
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def grid(self) -> list[GenerationParams]:
        """Every parameter combination, in column order."""
        out = []
        for (ap, rp), (ae, re_), neg, rev, n in itertools.product(
            self.pre_pairs, self.eff_pairs, self.prob_neg, self.rev_flag, self.num_objs
        ):
            out.append(
                GenerationParams(
                    prob_add_pre=ap, prob_rem_pre=rp, prob_add_eff=ae, prob_rem_eff=re_,
                    prob_neg=neg, rev_flag=rev, num_objs=n,
                    walk_len=self.walk_len, seed=self.seed, goal_prob=self.goal_prob,
                )
            )
        return out


# -------------------------------------------------------- config parsing

def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def _pairs(text: str) -> list[tuple[float, float]]:
    out = []
    for chunk in text.replace(",", " ").split():
        a, _, b = chunk.partition(":")
        if not b:
            raise ConfigError(f"expected add:remove pairs, got {chunk!r}")
        out.append((float(a), float(b)))
    return out


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _opt_int(text: str) -> int | None:
    return None if text.strip().lower() in ("none", "") else int(text)


def _opt_float(text: str) -> float | None:
    return None if text.strip().lower() in ("none", "") else float(text)


_PARSERS = {
    "depth_max": int,
    "domains_per_depth": int,
    "pre_pairs": _pairs,
    "eff_pairs": _pairs,
    "prob_neg": _floats,
    "rev_flag": lambda s: [_bool(x) for x in s.replace(",", " ").split()],
    "num_objs": lambda s: [_opt_int(x) for x in s.replace(",", " ").split()],
    "walk_len": int,
    "goal_prob": float,
    "time_limit": _opt_float,
    "max_expansions": _opt_int,
    "max_actions": int,
    "seed": int,
    "output_dir": str,
    "jobs": int,
    "record_time": _bool,
}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``base`` may repeat, ``#`` starts a comment."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().replace("-", "_"), value.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        if key == "base":
            values.setdefault("bases", []).append(value)
        elif key in _PARSERS:
            try:
                values[key] = _PARSERS[key](value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {exc}") from None
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    return values


def load_config(path: str | Path | None = None, **overrides) -> ExperimentConfig:
    values = parse_config_text(Path(path).read_text()) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    config = ExperimentConfig(**values)
    config.validate()
    return config


# ------------------------------------------------------------ item work

@dataclass
class ItemSpec:
    depth: int
    index: int
    pair: tuple[int, int]
    base1: Base
    base2: Base
    params: GenerationParams
    time_limit: float | None
    max_expansions: int | None
    max_actions: int
    output_dir: str | None = None


@dataclass
class ItemResult:
    depth: int
    index: int
    pair: tuple[int, int]
    seed: int
    status: str
    plan_length: int | None = None
    witness_length: int | None = None
    time: float = 0.0
    expansions: int = 0
    witness_valid: bool | None = None
    plan_valid: bool | None = None
    error: str = ""
    domain: Domain | None = None
    problem: Problem | None = None

    @property
    def solved(self) -> bool:
        return self.status == "solved"


def run_item(spec: ItemSpec) -> ItemResult:
    """Generate one problem, solve it with the planner and validate both plans."""
    seed = spec.params.seed
    name = f"gen-d{spec.depth}-i{spec.index}"
    try:
        rec = generate(
            spec.base1.domain, spec.base1.problem, spec.base2.domain, spec.base2.problem,
            spec.params, depth=spec.depth, name=name,
            provenance=(spec.base1.label, spec.base2.label),
        )
    except GenerationFailed as exc:
        return ItemResult(spec.depth, spec.index, spec.pair, seed, GENERATION_FAILED, error=str(exc))
    witness_ok = validate_plan(rec.domain, rec.problem, rec.witness).valid
    res = solve(rec.domain, rec.problem, spec.time_limit, spec.max_expansions, spec.max_actions)
    plan_ok = validate_plan(rec.domain, rec.problem, res.plan).valid if res.solved else None
    if spec.output_dir:
        write_record(rec, spec.output_dir, pair=f"{spec.base1.label}+{spec.base2.label}")
    return ItemResult(
        spec.depth, spec.index, spec.pair, seed, res.status,
        plan_length=len(res.plan) if res.solved else None,
        witness_length=len(rec.witness),
        time=res.elapsed,
        expansions=res.expansions,
        witness_valid=witness_ok,
        plan_valid=plan_ok,
        domain=rec.domain,
        problem=rec.problem,
    )


@dataclass
class DepthSummary:
    depth: int
    total: int
    solved: int
    generated: int
    mean_plan_length: float | None
    mean_witness_length: float | None
    mean_time: float
    mean_expansions: float | None
    witness_valid: bool
    budget_exhausted: int
    items: list[ItemResult] = field(default_factory=list, repr=False)

    @property
    def solved_fraction(self) -> float:
        return self.solved / self.total if self.total else 0.0


def summarize(depth: int, items: Sequence[ItemResult]) -> DepthSummary:
    solved = [r for r in items if r.solved]
    generated = [r for r in items if r.status != GENERATION_FAILED]
    return DepthSummary(
        depth=depth,
        total=len(items),
        solved=len(solved),
        generated=len(generated),
        mean_plan_length=mean(r.plan_length for r in solved) if solved else None,
        mean_witness_length=mean(r.witness_length for r in generated) if generated else None,
        mean_time=mean(r.time for r in generated) if generated else 0.0,
        mean_expansions=mean(r.expansions for r in solved) if solved else None,
        witness_valid=all(r.witness_valid for r in generated),
        budget_exhausted=sum(r.status in ("timeout", "nodecap", "grounding-cap") for r in items),
        items=list(items),
    )


def _map(fn, items: list, executor: Executor | None) -> list:
    if executor is None or len(items) <= 1:
        return [fn(x) for x in items]
    return list(executor.map(fn, items))


def _pairs_for_depth(config: ExperimentConfig, depth: int, n_bases: int) -> list[tuple[int, int]]:
    count = config.domains_per_depth
    if depth == 1:
        combos = list(itertools.combinations(range(n_bases), 2)) or [(0, 0)]
        return [combos[k % len(combos)] for k in range(count)]
    rng = stream(config.seed, depth, "pairs")
    out = []
    for _ in range(count):
        i = rng.randrange(n_bases)
        if n_bases >= 2:
            j = rng.randrange(n_bases - 1)
            j = j + 1 if j >= i else j
        else:
            j = i
        out.append((i, j))
    return out


def run_depth(
    config: ExperimentConfig,
    params: GenerationParams | None = None,
    executor: Executor | None = None,
) -> list[DepthSummary]:
    """Generate and solve ``domains_per_depth`` items at each depth.

    Depth 1 cycles through the pairs of configured bases; deeper levels pair
    the previous level's generated problems uniformly with replacement,
    avoiding self-pairs when two or more are available.
    """
    if params is None:
        grid = config.grid()
        if len(grid) != 1:
            raise ConfigError("run_depth needs a single parameter point; use run_sweep for grids")
        params = grid[0]
    bases = [load_base(b) for b in config.bases]
    own_pool = None
    if executor is None and config.jobs > 1:
        executor = own_pool = ProcessPoolExecutor(config.jobs)
    try:
        summaries = []
        for depth in range(1, config.depth_max + 1):
            if not bases:
                summaries.append(summarize(depth, []))
                continue
            specs = []
            for k, (i, j) in enumerate(_pairs_for_depth(config, depth, len(bases))):
                seed = derive_seed(params.seed, depth, i, j, k)
                outdir = None
                if config.output_dir:
                    outdir = str(Path(config.output_dir) / f"depth-{depth}")
                specs.append(
                    ItemSpec(depth, k, (i, j), bases[i], bases[j], replace(params, seed=seed),
                             config.time_limit, config.max_expansions, config.max_actions, outdir)
                )
            results = _map(run_item, specs, executor)
            summary = summarize(depth, results)
            log.info("depth %d: solved %d/%d", depth, summary.solved, summary.total)
            summaries.append(summary)
            bases = [Base(f"d{depth}i{r.index}", r.domain, r.problem) for r in results if r.domain is not None]
        return summaries
    finally:
        if own_pool is not None:
            own_pool.shutdown()


# ---------------------------------------------------------------- output

SWEEP_COLUMNS = (
    "add_pre", "rem_pre", "add_eff", "rem_eff", "neg", "rev", "num_objs", "depth", "seed",
    "solved_count", "total", "mean_plan_length", "mean_expansions", "witness_valid",
)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


@dataclass
class SweepRow:
    add_pre: float
    rem_pre: float
    add_eff: float
    rem_eff: float
    neg: float
    rev: bool
    num_objs: int | None
    depth: int
    seed: int
    solved_count: int
    total: int
    mean_plan_length: float | None
    mean_expansions: float | None
    witness_valid: bool
    mean_time: float = 0.0

    def sort_key(self):
        return (self.add_pre, self.rem_pre, self.add_eff, self.rem_eff, self.neg, self.rev,
                -1 if self.num_objs is None else self.num_objs, self.depth, self.seed)


def run_sweep(config: ExperimentConfig) -> list[SweepRow]:
    """Run the depth experiment at every grid point; one row per (point, depth)."""
    config.validate()
    rows = []
    pool = ProcessPoolExecutor(config.jobs) if config.jobs > 1 else None
    try:
        for params in config.grid():
            for s in run_depth(config, params, executor=pool):
                rows.append(
                    SweepRow(
                        params.prob_add_pre, params.prob_rem_pre, params.prob_add_eff, params.prob_rem_eff,
                        params.prob_neg, params.rev_flag, params.num_objs, s.depth, config.seed,
                        s.solved, s.total, s.mean_plan_length, s.mean_expansions, s.witness_valid,
                        s.mean_time,
                    )
                )
    finally:
        if pool is not None:
            pool.shutdown()
    rows.sort(key=SweepRow.sort_key)
    return rows


def sweep_csv(rows: Iterable[SweepRow], record_time: bool = False) -> str:
    columns = SWEEP_COLUMNS + (("mean_time",) if record_time else ())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["none" if c == "num_objs" and r.num_objs is None else _fmt(getattr(r, c)) for c in columns])
    return buf.getvalue()


DEPTH_COLUMNS = (
    "depth", "solved", "total", "generated", "budget_exhausted",
    "mean_plan_length", "mean_witness_length", "mean_expansions", "witness_valid",
)


def depth_csv(summaries: Iterable[DepthSummary], record_time: bool = False) -> str:
    columns = DEPTH_COLUMNS + (("mean_time",) if record_time else ())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for s in summaries:
        w.writerow([_fmt(getattr(s, c)) for c in columns])
    return buf.getvalue()


def depth_table(summaries: Iterable[DepthSummary]) -> str:
    lines = [f"{'Depth':>5}  {'Solved':>8}  {'Path cost':>9}  {'Witness':>7}"]
    for s in summaries:
        cost = "-" if s.mean_plan_length is None else f"{s.mean_plan_length:.1f}"
        wit = "-" if s.mean_witness_length is None else f"{s.mean_witness_length:.1f}"
        lines.append(f"{s.depth:>5}  {f'{s.solved}/{s.total}':>8}  {cost:>9}  {wit:>7}")
    return "\n".join(lines) + "\n"


def default_jobs() -> int:
    return os.cpu_count() or 1
