"""Command-line interface.

Exit status is 0 on success, 2 for invalid input and 3 when the instance's
feasible set is empty or a supplied starting point is infeasible.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bench import (BENCH_COLUMNS, SOLVERS, BenchSpec, generate_graph,
                    run_bench, run_solver, synthetic_instance)
from .fw import InfeasibleError, SolverConfig, StepRule, heuristic_rule_of_thumb, solve_fw
from .ingest import (CostScale, build_star_graph, derive_rates, parse_budget_rule,
                     parse_trace)
from .model import (FormatError, dumps_instance, load_instance, spend,
                    validate_instance)
from .multiplatform import Variant, load_mp, solve_mp, validate_mp
from .netgen import FeedSimConfig
from .report import dumps_json, report_csv, report_json, table_csv, write_text
from .utility import UtilitySpec, total_utility

EXIT_INVALID = 2
EXIT_INFEASIBLE = 3
INFEASIBLE_RULES = {"negative budget", "cap out of [0,1]"}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="random seed")
    g.add_argument("--threads", type=int, default=1, help="worker threads for bench")
    g.add_argument("--out", default=None, help="output file (default: stdout)")
    g.add_argument("--no-timing", action="store_true",
                   help="omit wall-clock fields so output is reproducible")


def _solver_flags(p: argparse.ArgumentParser, default_iters: int = 30) -> None:
    p.add_argument("--utility", type=UtilitySpec.parse, default=UtilitySpec.log(1000.0),
                   help="linear:d | log:d | afair:a | maxmin[:a] (default log:1000)")
    p.add_argument("--max-iters", type=int, default=default_iters)
    p.add_argument("--tol", type=float, default=0.1)
    p.add_argument("--step", choices=[s.value for s in StepRule],
                   default=StepRule.LINE_SEARCH.value)


def _feed_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--impressions", choices=["sim", "neighbor"], default="sim",
                   help="feed simulation or direct-follower shares")
    p.add_argument("--feed-size", type=int, default=20)
    p.add_argument("--snapshots", type=int, default=200)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="influopt",
                                 description="Budgeted influencer portfolio optimisation")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic instance")
    _common(p)
    p.add_argument("--model", choices=["ab", "er"], default="ab")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--a", type=int, default=4)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=None, help="re-post rate (default: lambda)")
    p.add_argument("--advertiser", type=int, default=0)
    p.add_argument("--budget-rule", default="per-user:0.01")
    p.add_argument("--cost-scale", choices=[c.value for c in CostScale], default="unit")
    _feed_flags(p)

    p = sub.add_parser("ingest", help="build an instance from an activity trace")
    _common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--window", type=float, required=True, help="window length in seconds")
    p.add_argument("--cost-scale", choices=[c.value for c in CostScale], default="unit")
    p.add_argument("--budget-rule", default="per-user:0.01")
    p.add_argument("--advertiser-id", type=int, default=None,
                   help="trace user id of the advertiser (default: smallest id)")
    _feed_flags(p)

    p = sub.add_parser("solve", help="Frank-Wolfe on one instance")
    _common(p)
    p.add_argument("instance")
    _solver_flags(p)
    p.add_argument("--init", default=None, help="whitespace-separated starting point")
    p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("solve-mp", help="Frank-Wolfe on a multi-platform instance")
    _common(p)
    p.add_argument("instance")
    _solver_flags(p)
    p.add_argument("--variant", choices=[v.value for v in Variant], default=None)

    p = sub.add_parser("heuristic", help="greedy aggregate-influence rule")
    _common(p)
    p.add_argument("instance")
    p.add_argument("--utility", type=UtilitySpec.parse, default=UtilitySpec.log(1000.0))

    p = sub.add_parser("compare", help="run several solvers on one instance")
    _common(p)
    p.add_argument("instance")
    _solver_flags(p)
    p.add_argument("--solvers", default=",".join(SOLVERS))
    p.add_argument("--baseline-iters", type=int, default=200)
    p.add_argument("--mc-runs", type=int, default=100)

    p = sub.add_parser("bench", help="size sweep on synthetic networks")
    _common(p)
    p.add_argument("--model", choices=["ab", "er"], default="ab")
    p.add_argument("--sizes", default="250,500,1000,2000")
    p.add_argument("--a", type=int, default=4)
    p.add_argument("--budget-per-user", type=float, default=0.01)
    _solver_flags(p, default_iters=20)
    p.add_argument("--solvers", default="fw,heuristic")
    p.add_argument("--seeds", default=None, help="comma list (default: --seed)")
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--baseline-iters", type=int, default=200)
    p.add_argument("--mc-runs", type=int, default=100)
    _feed_flags(p)

    p = sub.add_parser("validate", help="check instance invariants")
    _common(p)
    p.add_argument("instance")
    p.add_argument("--mp", action="store_true", help="multi-platform instance")
    p.add_argument("--warnings", action="store_true", help="also list warnings")
    return ap


def _emit(args, text: str) -> None:
    if args.out:
        write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _load(path: str):
    inst = load_instance(path)
    errors = validate_instance(inst)
    if errors:
        code = EXIT_INFEASIBLE if any(v.rule in INFEASIBLE_RULES for v in errors) \
            else EXIT_INVALID
        raise CliError("; ".join(str(v) for v in errors[:5]), code)
    return inst


def _cfg(args) -> SolverConfig:
    return SolverConfig(max_iters=args.max_iters, tol=args.tol, step=args.step,
                        seed=args.seed)


def _feed(args) -> FeedSimConfig:
    return FeedSimConfig(feed_size=args.feed_size, snapshots=args.snapshots,
                         seed=args.seed)


def cmd_gen(args) -> None:
    g = generate_graph(args.model, args.n, args.a, args.seed, args.lam, args.mu)
    budget = parse_budget_rule(args.budget_rule, args.n)
    inst = synthetic_instance(g, budget, args.advertiser, args.cost_scale,
                              args.impressions, _feed(args))
    _emit(args, dumps_instance(inst))


def cmd_ingest(args) -> None:
    parsed = parse_trace(args.trace)
    for r in parsed.rejects:
        print(f"warning: line {r.line_no}: {r.reason}", file=sys.stderr)
    rates = derive_rates(parsed.records, args.window)
    star = build_star_graph(parsed.records, rates)
    if star.n_dangling:
        print(f"warning: {star.n_dangling} retweets of unknown tweets skipped",
              file=sys.stderr)
    adv = 0 if args.advertiser_id is None else rates.index_of(args.advertiser_id)
    budget = parse_budget_rule(args.budget_rule, star.graph.n)
    inst = synthetic_instance(star.graph, budget, adv, args.cost_scale,
                              args.impressions, _feed(args))
    header = f"# trace user ids in index order: {' '.join(map(str, star.user_ids))}\n"
    text = dumps_instance(inst)
    first, rest = text.split("\n", 1)
    _emit(args, first + "\n" + header + rest)


def cmd_solve(args) -> None:
    inst = _load(args.instance)
    cfg = _cfg(args)
    if args.init:
        with open(args.init, encoding="utf-8") as fh:
            cfg.init = np.array(fh.read().split(), dtype=np.float64)
    rep = solve_fw(inst, args.utility, cfg)
    timing = not args.no_timing
    _emit(args, report_json(rep, timing) if args.format == "json"
          else report_csv(rep, timing))


def cmd_solve_mp(args) -> None:
    mp = load_mp(args.instance)
    if args.variant:
        mp = replace(mp, variant=Variant(args.variant))
    errors = validate_mp(mp)
    if errors:
        raise CliError("; ".join(str(v) for v in errors[:5]))
    res = solve_mp(mp, args.utility, _cfg(args))
    _emit(args, report_json(res.report, not args.no_timing))


def cmd_heuristic(args) -> None:
    inst = _load(args.instance)
    a = heuristic_rule_of_thumb(inst)
    _emit(args, dumps_json({"solver": "heuristic", "utility": str(args.utility),
                            "objective": total_utility(inst, args.utility, a),
                            "spend": spend(inst, a), "a": a}))


def _solver_list(text: str) -> list[str]:
    names = [s.strip() for s in text.split(",") if s.strip()]
    for s in names:
        if s not in SOLVERS:
            raise CliError(f"unknown solver {s!r}; choose from {', '.join(SOLVERS)}")
    return names


def cmd_compare(args) -> None:
    inst = _load(args.instance)
    cfg = _cfg(args)
    rows = []
    for name in _solver_list(args.solvers):
        t0 = time.perf_counter()
        a, iters = run_solver(name, inst, args.utility, cfg, args.baseline_iters,
                              args.mc_runs, args.seed)
        ms = 1e3 * (time.perf_counter() - t0)
        rows.append({"solver": name, "objective": total_utility(inst, args.utility, a),
                     "runtime_ms": "" if args.no_timing else ms,
                     "iterations": iters, "spend": spend(inst, a)})
    _emit(args, table_csv(("solver", "objective", "runtime_ms", "iterations", "spend"),
                          rows))


def cmd_bench(args) -> None:
    seeds = (tuple(int(s) for s in args.seeds.split(",")) if args.seeds
             else (args.seed,))
    spec = BenchSpec(model=args.model,
                     sizes=tuple(int(s) for s in args.sizes.split(",")),
                     a=args.a, budget_per_user=args.budget_per_user,
                     utility=args.utility, solvers=tuple(_solver_list(args.solvers)),
                     repetitions=args.repetitions, seeds=seeds, method=args.impressions,
                     feed=_feed(args), max_iters=args.max_iters, tol=args.tol,
                     baseline_iters=args.baseline_iters, mc_runs=args.mc_runs,
                     threads=args.threads, timing=not args.no_timing)
    _emit(args, table_csv(BENCH_COLUMNS, run_bench(spec)))


def cmd_validate(args) -> None:
    if args.mp:
        found = validate_mp(load_mp(args.instance))
    else:
        found = validate_instance(load_instance(args.instance),
                                  include_warnings=args.warnings)
    _emit(args, "".join(f"{v}\n" for v in found) or "ok\n")
    errors = [v for v in found if v.severity == "error"]
    if errors:
        code = EXIT_INFEASIBLE if any(v.rule in INFEASIBLE_RULES for v in errors) \
            else EXIT_INVALID
        raise CliError(f"{len(errors)} violation(s)", code)


COMMANDS = {"gen": cmd_gen, "ingest": cmd_ingest, "solve": cmd_solve,
            "solve-mp": cmd_solve_mp, "heuristic": cmd_heuristic,
            "compare": cmd_compare, "bench": cmd_bench, "validate": cmd_validate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code not in (0, None) else 0
    try:
        COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (FormatError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return 0


if __name__ == "__main__":
    sys.exit(main())
