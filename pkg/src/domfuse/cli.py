"""Command-line entry point: ``domfuse {fuse,genprob,validate,solve,depth,sweep}``.

Exit codes: 0 success / valid / solved; 1 invalid, unsolvable or out of
budget; 2 usage, parse or I/O error. Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .fusion import GenerationParams, fuse, resolve_collisions
from .harness import (
    REFERENCE_EFF_PAIRS,
    REFERENCE_NEG,
    REFERENCE_PRE_PAIRS,
    REFERENCE_REV,
    ConfigError,
    ExperimentConfig,
    default_jobs,
    depth_csv,
    depth_table,
    load_config,
    parse_config_text,
    run_depth,
    run_sweep,
    sweep_csv,
)
from .parser import PDDLError, parse_domain, parse_plan, parse_problem, print_domain, print_plan
from .planner import solve
from .probgen import GenerationFailed, generate, write_record
from .seeding import stream
from .validator import validate_plan

EXIT_OK, EXIT_NEGATIVE, EXIT_ERROR = 0, 1, 2


class UsageError(Exception):
    pass


def probability(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"probability must be in [0, 1], got {value}")
    return value


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def seed_type(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _add_generation_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("generation parameters")
    g.add_argument("--prob-add-pre", type=probability, default=0.5, help="probability of adding a precondition per action (default 0.5)")
    g.add_argument("--prob-add-eff", type=probability, default=0.5, help="probability of adding an effect per action (default 0.5)")
    g.add_argument("--prob-rem-pre", type=probability, default=0.0, help="probability of removing a precondition per action (default 0)")
    g.add_argument("--prob-rem-eff", type=probability, default=0.3, help="probability of removing an effect per action (default 0.3)")
    g.add_argument("--prob-neg", type=probability, default=0.5, help="probability that an added literal is negated (default 0.5)")
    g.add_argument("--rev-flag", action="store_true", help="repair delete-only predicates by adding add effects")
    g.add_argument("--num-objs", type=positive_int, default=None, help="down-sample the merged object set to this size")
    g.add_argument("--walk-len", type=positive_int, default=20, help="maximum random-walk length (default 20)")
    g.add_argument("--goal-prob", type=probability, default=0.3, help="per-atom goal sampling probability (default 0.3)")
    g.add_argument("--seed", type=seed_type, default=42, help="random seed (default 42)")


def _params(args) -> GenerationParams:
    return GenerationParams(
        prob_add_pre=args.prob_add_pre, prob_add_eff=args.prob_add_eff,
        prob_rem_pre=args.prob_rem_pre, prob_rem_eff=args.prob_rem_eff,
        prob_neg=args.prob_neg, rev_flag=args.rev_flag, num_objs=args.num_objs,
        walk_len=args.walk_len, goal_prob=args.goal_prob, seed=args.seed,
    )


def _located(path: str, exc: PDDLError) -> str:
    return f"{path}:{exc.span}: {exc.code}: {exc.message}"


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_pair(dpath: str, ppath: str):
    try:
        d = parse_domain(_read(dpath))
    except PDDLError as exc:
        raise UsageError(_located(dpath, exc)) from None
    try:
        p = parse_problem(_read(ppath), d)
    except PDDLError as exc:
        raise UsageError(_located(ppath, exc)) from None
    return d, p


def cmd_fuse(args) -> int:
    d1, _ = _load_pair(args.domain1, args.problem1)
    d2, _ = _load_pair(args.domain2, args.problem2)
    params = _params(args)
    d1r, d2r, ren = resolve_collisions(d1, d2)
    domain, trace = fuse(d1r, d2r, params, stream(params.seed, 0), name=args.name, renames=ren)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "domain.pddl").write_text(print_domain(domain))
    (out / "trace.log").write_text(trace.to_log())
    print(out / "domain.pddl")
    return EXIT_OK


def cmd_genprob(args) -> int:
    d1, p1 = _load_pair(args.domain1, args.problem1)
    d2, p2 = _load_pair(args.domain2, args.problem2)
    try:
        rec = generate(d1, p1, d2, p2, _params(args), name=args.name)
    except GenerationFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE
    print(write_record(rec, args.output))
    return EXIT_OK


def cmd_validate(args) -> int:
    d, p = _load_pair(args.domain, args.problem)
    try:
        plan = parse_plan(_read(args.plan))
    except PDDLError as exc:
        raise UsageError(_located(args.plan, exc)) from None
    outcome = validate_plan(d, p, plan)
    print(outcome.summary())
    if not outcome.valid and outcome.failure.details:
        print("  " + " ".join(outcome.failure.details), file=sys.stderr)
    return EXIT_OK if outcome.valid else EXIT_NEGATIVE


def cmd_solve(args) -> int:
    d, p = _load_pair(args.domain, args.problem)
    res = solve(d, p, args.time, args.max_expansions, args.max_actions)
    if res.solved:
        sys.stdout.write(print_plan(res.plan))
        print(f"; expansions={res.expansions} time={res.elapsed:.3f} length={len(res.plan)}")
        return EXIT_OK
    print(f"; {res.status} expansions={res.expansions} time={res.elapsed:.3f}")
    return EXIT_NEGATIVE


def _pairs_arg(text: str) -> list[tuple[float, float]]:
    out = []
    for chunk in text.split(","):
        a, _, b = chunk.partition(":")
        out.append((probability(a), probability(b)))
    return out


def _list_arg(conv):
    def parse(text: str):
        return [conv(x) for x in text.split(",") if x.strip()]
    return parse


def _bool_arg(text: str) -> bool:
    low = text.strip().lower()
    if low not in ("true", "false"):
        raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")
    return low == "true"


def _experiment_config(args, sweep: bool) -> ExperimentConfig:
    overrides = dict(
        bases=args.base, depth_max=args.depth_max, domains_per_depth=args.domains_per_depth,
        walk_len=args.walk_len, goal_prob=args.goal_prob, time_limit=args.time,
        max_expansions=args.max_expansions, max_actions=args.max_actions,
        seed=args.seed, output_dir=args.output_dir, jobs=args.jobs,
        record_time=True if args.record_time else None,
    )
    if sweep:
        overrides.update(
            pre_pairs=args.pre_pairs, eff_pairs=args.eff_pairs, prob_neg=args.neg_values,
            rev_flag=args.rev_values, num_objs=args.num_objs_values,
        )
    else:
        if args.prob_add_pre is not None or args.prob_rem_pre is not None:
            overrides["pre_pairs"] = [(args.prob_add_pre if args.prob_add_pre is not None else 0.5,
                                       args.prob_rem_pre if args.prob_rem_pre is not None else 0.0)]
        if args.prob_add_eff is not None or args.prob_rem_eff is not None:
            overrides["eff_pairs"] = [(args.prob_add_eff if args.prob_add_eff is not None else 0.5,
                                       args.prob_rem_eff if args.prob_rem_eff is not None else 0.3)]
        if args.prob_neg is not None:
            overrides["prob_neg"] = [args.prob_neg]
        if args.rev_flag:
            overrides["rev_flag"] = [True]
        if args.num_objs is not None:
            overrides["num_objs"] = [args.num_objs]
    try:
        from_file = parse_config_text(Path(args.config).read_text()) if args.config else {}
        if args.jobs is None and "jobs" not in from_file:
            overrides["jobs"] = default_jobs()
        if sweep:
            defaults = dict(pre_pairs=list(REFERENCE_PRE_PAIRS), eff_pairs=list(REFERENCE_EFF_PAIRS),
                            prob_neg=list(REFERENCE_NEG), rev_flag=list(REFERENCE_REV))
            for key, value in defaults.items():
                if overrides.get(key) is None and key not in from_file:
                    overrides[key] = value
        return load_config(args.config, **overrides)
    except OSError as exc:
        raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
    except (ConfigError, PDDLError) as exc:
        raise UsageError(f"config: {exc}") from None


def _write_or_print(text: str, path: str | None) -> None:
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_depth(args) -> int:
    config = _experiment_config(args, sweep=False)
    try:
        summaries = run_depth(config)
    except (ConfigError, PDDLError) as exc:
        raise UsageError(str(exc)) from None
    sys.stdout.write(depth_table(summaries))
    if args.csv:
        _write_or_print(depth_csv(summaries, config.record_time), args.csv)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _experiment_config(args, sweep=True)
    try:
        rows = run_sweep(config)
    except (ConfigError, PDDLError) as exc:
        raise UsageError(str(exc)) from None
    _write_or_print(sweep_csv(rows, config.record_time), args.csv)
    return EXIT_OK


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file; flags override its values")
    p.add_argument("--base", action="append", default=None,
                   help="base pair: a fixture name or 'domain.pddl,problem.pddl' (repeatable)")
    p.add_argument("--depth-max", type=positive_int, default=None, help="number of depth levels")
    p.add_argument("--domains-per-depth", type=positive_int, default=None, help="items generated per depth level")
    p.add_argument("--walk-len", type=positive_int, default=None, help="maximum random-walk length")
    p.add_argument("--goal-prob", type=probability, default=None, help="per-atom goal sampling probability")
    p.add_argument("--time", type=float, default=None, help="planner time limit per item in seconds")
    p.add_argument("--max-expansions", type=positive_int, default=None, help="planner expansion cap per item")
    p.add_argument("--max-actions", type=positive_int, default=None, help="ground action cap per item")
    p.add_argument("--seed", type=seed_type, default=None, help="master seed (default 42)")
    p.add_argument("--output-dir", default=None, help="write every generated record under this directory")
    p.add_argument("--jobs", type=positive_int, default=None,
                   help="worker processes (default: available parallelism)")
    p.add_argument("--record-time", action="store_true", help="add a wall-clock mean_time column (not reproducible)")
    p.add_argument("--csv", default=None, help="write the CSV to this path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="domfuse", description="Fuse PDDL domains, generate solvable problems, validate and solve them.",
        epilog="exit codes: 0 ok, 1 invalid/unsolvable/out of budget, 2 usage or parse error")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, doc in (
        ("fuse", cmd_fuse, "fuse two domains and write domain.pddl and trace.log"),
        ("genprob", cmd_genprob, "fuse two base pairs and write a generated domain, problem and witness plan"),
    ):
        p = sub.add_parser(name, help=doc, description=doc)
        p.add_argument("domain1", help="first base domain file")
        p.add_argument("problem1", help="problem file of the first base domain")
        p.add_argument("domain2", help="second base domain file")
        p.add_argument("problem2", help="problem file of the second base domain")
        p.add_argument("-o", "--output", required=True, help="output directory")
        p.add_argument("--name", default=None, help="name of the fused domain")
        _add_generation_flags(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("validate", help="replay a plan and check it reaches the goal",
                       description="replay a plan and check it reaches the goal")
    p.add_argument("domain", help="domain file")
    p.add_argument("problem", help="problem file")
    p.add_argument("plan", help="plan file, one (action obj ...) per line")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="solve a problem with greedy best-first search on h_ff",
                       description="solve a problem with greedy best-first search on h_ff")
    p.add_argument("domain", help="domain file")
    p.add_argument("problem", help="problem file")
    p.add_argument("--time", type=float, default=200.0, help="time limit in seconds (default 200)")
    p.add_argument("--max-expansions", type=positive_int, default=10**6, help="expansion cap (default 1000000)")
    p.add_argument("--max-actions", type=positive_int, default=10**6, help="ground action cap (default 1000000)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("depth", help="run the depth-level experiment and print a solvability table",
                       description="run the depth-level experiment and print a solvability table")
    _add_experiment_flags(p)
    g = p.add_argument_group("generation parameters")
    g.add_argument("--prob-add-pre", type=probability, default=None, help="probability of adding a precondition")
    g.add_argument("--prob-add-eff", type=probability, default=None, help="probability of adding an effect")
    g.add_argument("--prob-rem-pre", type=probability, default=None, help="probability of removing a precondition")
    g.add_argument("--prob-rem-eff", type=probability, default=None, help="probability of removing an effect")
    g.add_argument("--prob-neg", type=probability, default=None, help="probability that an added literal is negated")
    g.add_argument("--rev-flag", action="store_true", help="repair delete-only predicates")
    g.add_argument("--num-objs", type=positive_int, default=None, help="down-sample merged objects to this size")
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("sweep", help="run a full-factorial parameter sweep and emit CSV",
                       description="run a full-factorial parameter sweep and emit CSV")
    _add_experiment_flags(p)
    g = p.add_argument_group("grid (defaults to the 3x3x3x2 reference grid)")
    g.add_argument("--pre-pairs", type=_pairs_arg, default=None, help="add:remove precondition pairs, e.g. 0.3:0.7,0.5:0.5")
    g.add_argument("--eff-pairs", type=_pairs_arg, default=None, help="add:remove effect pairs, e.g. 0.3:0.7,0.5:0.5")
    g.add_argument("--neg-values", type=_list_arg(probability), default=None, help="negation probabilities, e.g. 0.3,0.5,0.7")
    g.add_argument("--rev-values", type=_list_arg(_bool_arg), default=None, help="reversibility settings, e.g. true,false")
    g.add_argument("--num-objs-values", type=_list_arg(positive_int), default=None, help="object counts, e.g. 5,15")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
