"""Command-line front end.

    staeb solve --instance i0.json --algo ebgt --certify-nash
    staeb solve --algo greedy --tasks 200 --workers 600 --seed 3 --out runs.csv
    staeb sweep --desk --axis tasks --out desk_tasks.csv
    staeb generate --tasks 50 --workers 150 --seed 1 -o inst.json
    staeb ingest trips.csv -o inst.json

Exit codes: 0 success, 1 usage error, 2 input error, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from decimal import Decimal, InvalidOperation

from staeb.bench import (
    ALGORITHMS,
    AXES,
    DESK_SEEDS,
    CsvSink,
    InvariantViolation,
    SweepSpec,
    desk_spec,
    make_row,
    overflow_row,
    run_batched,
    run_sweep,
    full_spec,
)
from staeb.game import GameConfig, GameEngine
from staeb.instances import GenConfig, IngestConfig, IngestError, SchemaError, generate_instance, ingest_trips, load_instance, save_instance
from staeb.model import StaebError
from staeb.oracle import OracleLimits, OracleOverflow

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2, 3

GEN_KEYS = {
    "tasks": ("num_tasks", int),
    "workers": ("num_workers", int),
    "skills": ("num_skills", int),
    "radius": ("fixed_radius", float),
    "seed": ("seed", int),
    "alpha": ("alpha", Decimal),
    "beta": ("beta", Decimal),
    "money_scale": ("money_scale", int),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _decimal(text):
    try:
        return Decimal(text)
    except InvalidOperation:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def _window(text):
    if text == "off":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected seconds or 'off', got {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError("batch window must be positive")
    return value


def _add_gen_flags(p):
    g = p.add_argument_group("instance generation")
    g.add_argument("--tasks", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--skills", type=int)
    g.add_argument("--radius", type=float, help="fixed radius r_t in meters")
    g.add_argument("--budget-min", type=float)
    g.add_argument("--budget-max", type=float)
    g.add_argument("--alpha", type=_decimal)
    g.add_argument("--beta", type=_decimal)
    g.add_argument("--money-scale", type=int)
    g.add_argument("--gen", action="append", default=[], metavar="KEY=VALUE", help=f"generator override; keys: {', '.join(GEN_KEYS)}, budget")


def _gen_config(args, base: GenConfig) -> GenConfig:
    changes = {}
    for item in args.gen:
        for part in filter(None, item.split(",")):
            key, _, value = part.partition("=")
            key = key.strip().replace("-", "_")
            if key == "budget":
                lo, _, hi = value.partition("-")
                try:
                    changes["extra_budget_range"] = (float(lo), float(hi or lo))
                except ValueError:
                    raise UsageError(f"bad budget range {value!r}; expected LO-HI")
                continue
            if key not in GEN_KEYS or not value:
                raise UsageError(f"bad --gen item {part!r}")
            name, conv = GEN_KEYS[key]
            try:
                changes[name] = conv(value)
            except (ValueError, InvalidOperation):
                raise UsageError(f"bad value in --gen {part!r}")
    for flag, name in (("tasks", "num_tasks"), ("workers", "num_workers"), ("skills", "num_skills"), ("radius", "fixed_radius"),
                       ("alpha", "alpha"), ("beta", "beta"), ("money_scale", "money_scale")):
        if getattr(args, flag, None) is not None:
            changes[name] = getattr(args, flag)
    if getattr(args, "seed", None) is not None and "seed" not in changes:
        changes["seed"] = args.seed
    lo, hi = changes.get("extra_budget_range", base.extra_budget_range)
    if args.budget_min is not None:
        lo = args.budget_min
    if args.budget_max is not None:
        hi = args.budget_max
    changes["extra_budget_range"] = (lo, hi)
    try:
        return base.with_(**changes)
    except ValueError as exc:
        raise UsageError(str(exc))


def _limits(text):
    try:
        return OracleLimits.parse(text) if text else OracleLimits()
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc))


def cmd_solve(args) -> int:
    if args.instance:
        instance = load_instance(args.instance)
        overrides = {k: getattr(args, k) for k in ("alpha", "beta", "money_scale") if getattr(args, k) is not None}
        if overrides:
            instance = instance.replace(params=replace(instance.params, **overrides))
    else:
        instance = generate_instance(_gen_config(args, GenConfig()))
    seed = args.seed if args.seed is not None else 0
    game_cfg = GameConfig(certify_nash=args.certify_nash)
    limits = _limits(args.oracle_limits)
    sink = CsvSink(args.out) if args.out else CsvSink(stream=sys.stdout)
    try:
        try:
            matching, report = run_batched(instance, args.algo, seed, args.batch_window, game_cfg=game_cfg, limits=limits)
        except OracleOverflow as exc:
            print(f"oracle overflow: {exc}", file=sys.stderr)
            sink.write(overflow_row(instance, args.algo, seed=seed))
            return EXIT_INPUT
        if args.certify_nash and args.algo == "ebgt" and args.batch_window is None:
            if not GameEngine.from_matching(instance, matching).is_nash():
                raise InvariantViolation("EBGT output is not a Nash equilibrium")
        row = make_row(instance, matching, report, seed=seed)
        sink.write(row)
    finally:
        sink.close()
    if args.dump_matching:
        with open(args.dump_matching, "w") as fh:
            json.dump(matching.to_dict(instance), fh, sort_keys=True, indent=1)
            fh.write("\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    algos = tuple(a.strip() for a in args.algos.split(",") if a.strip())
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad or not algos:
        raise UsageError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
    seeds = range(args.seeds) if args.seeds is not None else None
    if args.desk:
        spec = desk_spec(args.axis, seeds, algos)
    else:
        spec = full_spec(args.axis, seeds if seeds is not None else (0,), algos)
    if args.values:
        values = [v.strip() for v in args.values.split(",") if v.strip()]
        if args.axis == "extra_budget":
            parsed = [tuple(float(x) for x in v.split("-")) for v in values]
        else:
            parsed = [float(v) if args.axis == "fixed_radius" else int(v) for v in values]
        spec = SweepSpec(spec.axis, parsed, spec.base, spec.seeds, spec.algorithms)
    run_sweep(
        spec,
        args.out,
        jobs=args.jobs,
        limits=_limits(args.oracle_limits),
        batch_window=args.batch_window,
        stream=None if args.out else sys.stdout,
    )
    return EXIT_OK


def cmd_generate(args) -> int:
    instance = generate_instance(_gen_config(args, GenConfig()))
    save_instance(instance, args.output)
    return EXIT_OK


def cmd_ingest(args) -> int:
    cfg = IngestConfig(seed=args.seed or 0)
    result = ingest_trips(args.trips, cfg)
    save_instance(result.instance, args.output)
    print(f"{len(result.instance.tasks)} tasks, {result.skipped} rows skipped", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="staeb", description="Skilled spatial task assignment with extra travel budgets.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="run one solver on one instance")
    p.add_argument("--instance", help="instance JSON; generated from flags when omitted")
    p.add_argument("--algo", choices=ALGORITHMS, default="ebgt")
    p.add_argument("--seed", type=int)
    _add_gen_flags(p)
    p.add_argument("--batch-window", type=_window, default=None, metavar="SECONDS|off")
    p.add_argument("--out", help="append the result row to this CSV")
    p.add_argument("--dump-matching", metavar="PATH")
    p.add_argument("--certify-nash", action="store_true", help="re-check the EBGT output with an exhaustive scan")
    p.add_argument("--oracle-limits", metavar="tasks=N,workers=N,sets=N,time=S")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="sweep one parameter axis across seeds")
    p.add_argument("--axis", choices=AXES, required=True)
    p.add_argument("--desk", action="store_true", help=f"small preset: tasks 8-24, workers 24-72, {DESK_SEEDS} seeds")
    p.add_argument("--values", help="comma-separated axis values overriding the preset")
    p.add_argument("--seeds", type=int, help="number of seeds (0..N-1)")
    p.add_argument("--algos", default="random,greedy,ebgt")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--batch-window", type=_window, default=None, metavar="SECONDS|off")
    p.add_argument("--oracle-limits", metavar="tasks=N,workers=N,sets=N,time=S")
    p.add_argument("--out", help="CSV path; rows go to stdout when omitted")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("generate", help="write a synthetic instance")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int)
    _add_gen_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", help="build an instance from a trip CSV")
    p.add_argument("trips")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_ingest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"staeb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvariantViolation, AssertionError) as exc:
        print(f"staeb: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (OSError, SchemaError, IngestError, StaebError, ValueError) as exc:
        print(f"staeb: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
