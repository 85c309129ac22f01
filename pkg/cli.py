#!/usr/bin/env python3
"""
Command-line front end.

Subcommands: gen, analyze, decide, reset, enumerate, experiment. JSON goes to
standard output (or --out), logs to standard error. Exit codes: 0 success,
1 domain error, 2 usage error.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict
from typing import List, Optional

from pydantic import ValidationError

from automaton import Dfa, parse_dfa, serialize_dfa
from config import get_settings
from exceptions import ConfigError, SyncLabError
from experiments import (
    ExperimentSpec,
    Metric,
    exact_small_n,
    report_to_csv,
    report_to_json,
    run_experiment,
    run_scaling,
    trial_dfa,
)
from fast_decide import fast_decide
from funcgraph import analyze_letter, cluster_partition, cycle_count, high_tree_stats
from sync_oracle import decide_exact, greedy_reset_word, shortest_reset_word

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2

EXACT_VERDICT_FIELDS = {"synchronizing", "certificate_type", "certificate", "method", "steps"}


class UsageError(Exception):
    """Flag combination rejected before any computation"""


def _grid(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="synclab", description="Synchronizing random automata toolkit")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Generate uniformly random automata")
    gen.add_argument("-n", type=int, required=True, help="State count")
    gen.add_argument("-k", type=int, default=2, help="Alphabet size")
    gen.add_argument("--seed", type=int, default=0, help="64-bit seed")
    gen.add_argument("--count", type=int, default=1, help="Automata to emit, one JSON document per line")

    analyze = sub.add_parser("analyze", help="Functional-graph decomposition of one letter")
    analyze.add_argument("--in", dest="infile", help="Automaton JSON file (standard input when absent)")
    analyze.add_argument("--letter", type=int, default=0, help="Letter index")

    decide = sub.add_parser("decide", help="Decide synchronizability")
    decide.add_argument("--in", dest="infile", help="Automaton JSON file (standard input when absent)")
    decide.add_argument("--fast", action="store_true", help="Use the budgeted fast pipeline")
    decide.add_argument("--budget-scale", type=float, default=1.0, help="Multiplier on every fast budget")

    reset = sub.add_parser("reset", help="Print a reset word as a letter-index array")
    reset.add_argument("--in", dest="infile", help="Automaton JSON file (standard input when absent)")
    reset.add_argument("--shortest", action="store_true", help="Minimum-length word by subset search")
    reset.add_argument("--allow-none", action="store_true", help="Print null instead of failing")

    enum = sub.add_parser("enumerate", help="Exact counts over all automata of a size")
    enum.add_argument("-n", type=int, required=True, help="State count")
    enum.add_argument("-k", type=int, default=2, help="Alphabet size")
    enum.add_argument("--stat", choices=["sync", "disconnected-one", "all"], default="all")

    exp = sub.add_parser("experiment", help="Monte Carlo experiment over a grid of state counts")
    exp.add_argument("--metric", choices=[m.value for m in Metric], help="Event to count")
    exp.add_argument("--n-grid", type=_grid, required=True, help="Comma-separated state counts, increasing")
    exp.add_argument("--samples", type=int, default=1000, help="Trials per state count")
    exp.add_argument("--seed", type=int, default=0, help="64-bit master seed")
    exp.add_argument("--k", type=int, default=2, help="Alphabet size")
    exp.add_argument("--workers", type=int, default=None, help="Worker processes")
    exp.add_argument("--exhaustive", action="store_true", help="Observe every automaton instead of sampling")
    exp.add_argument("--budget-scale", type=float, default=1.0, help="Multiplier on every fast budget")
    exp.add_argument("--scaling", action="store_true", help="Measure fast versus exact step counts")
    exp.add_argument("--out", help="Report path; .csv selects CSV, anything else JSON")
    return parser


def _read_automaton(path: Optional[str]) -> Dfa:
    if path is None:
        return parse_dfa(sys.stdin.read())
    try:
        with open(path, "r", encoding="utf-8") as f:
            return parse_dfa(f.read())
    except OSError as e:
        raise UsageError(f"--in: cannot read {path}: {e.strerror}")


def _emit(text: str, path: Optional[str] = None) -> None:
    if path is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    logger.info(f"Wrote {path}")


def cmd_gen(args) -> int:
    if args.n < 1:
        raise UsageError(f"-n must be >= 1, got {args.n}")
    if args.k < 1:
        raise UsageError(f"-k must be >= 1, got {args.k}")
    if args.count < 1:
        raise UsageError(f"--count must be >= 1, got {args.count}")
    for i in range(args.count):
        _emit(serialize_dfa(trial_dfa(args.seed, args.n, args.k, i)))
    return EXIT_OK


def cmd_analyze(args) -> int:
    d = _read_automaton(args.infile)
    if not 0 <= args.letter < d.k:
        raise UsageError(f"--letter must lie in [0, {d.k}), got {args.letter}")
    lg = analyze_letter(d, args.letter)
    partition = cluster_partition(lg, get_settings().cluster_theta)
    payload = {
        "n": lg.n,
        "letter": lg.letter,
        "cluster": list(lg.cluster_id),
        "level": list(lg.level),
        "cyclic": list(lg.is_cyclic),
        "cycle_count": cycle_count(lg),
        "clusters": [
            {"size": c.size, "cycle_length": c.cycle_length, "cycle_states": list(c.cycle_states)}
            for c in lg.clusters
        ],
        "tree_heights": list(lg.tree_heights),
        "high_tree": asdict(high_tree_stats(lg)),
        "partition": {
            "threshold_exponent": partition.threshold_exponent,
            "threshold": partition.threshold,
            "big_clusters": list(partition.big_clusters),
            "small_states": sorted(partition.small_states),
            "small_count": partition.small_count,
        },
    }
    _emit(json.dumps(payload))
    return EXIT_OK


def cmd_decide(args) -> int:
    if args.budget_scale <= 0:
        raise UsageError(f"--budget-scale must be positive, got {args.budget_scale}")
    d = _read_automaton(args.infile)
    if args.fast:
        verdict = fast_decide(d, args.budget_scale)
        _emit(verdict.model_dump_json())
    else:
        verdict = decide_exact(d)
        _emit(verdict.model_dump_json(include=EXACT_VERDICT_FIELDS))
    return EXIT_OK


def cmd_reset(args) -> int:
    d = _read_automaton(args.infile)
    if args.shortest and d.n > get_settings().subset_limit:
        raise UsageError(f"--shortest needs n <= {get_settings().subset_limit}, got n={d.n}")
    word = shortest_reset_word(d) if args.shortest else greedy_reset_word(d)
    if word is None:
        if args.allow_none:
            _emit("null")
            return EXIT_OK
        logger.error("Automaton is not synchronizing")
        print("error: not synchronizing", file=sys.stderr)
        return EXIT_DOMAIN
    _emit(json.dumps(list(word)))
    return EXIT_OK


def cmd_enumerate(args) -> int:
    if args.n < 1 or args.k < 1:
        raise UsageError(f"-n and -k must be >= 1, got n={args.n}, k={args.k}")
    table = exact_small_n(args.n, args.k, decide=args.stat != "disconnected-one")
    payload = {"n": table.n, "k": table.k, "total": table.total}
    if args.stat in ("sync", "all"):
        payload["synchronizing"] = table.synchronizing
    if args.stat in ("disconnected-one", "all"):
        payload["single_disconnected"] = table.single_disconnected
    if args.stat == "all":
        payload["not_weakly_connected"] = table.not_weakly_connected
    _emit(json.dumps(payload))
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.workers is not None and args.workers < 1:
        raise UsageError(f"--workers must be >= 1, got {args.workers}")
    if args.scaling:
        if args.out and args.out.endswith(".csv"):
            raise UsageError("--scaling writes JSON only; choose a --out path not ending in .csv")
        if args.samples < 1:
            raise UsageError(f"--samples must be >= 1, got {args.samples}")
        report = run_scaling(args.n_grid, args.samples, args.seed, args.k, args.workers)
        _emit(report_to_json(report), args.out)
        return EXIT_OK
    if args.metric is None:
        raise UsageError("--metric is required unless --scaling is given")
    try:
        spec = ExperimentSpec(
            metric=Metric(args.metric),
            n_grid=args.n_grid,
            k=args.k,
            samples=args.samples,
            seed=args.seed,
            exhaustive=args.exhaustive,
            budget_scale=args.budget_scale,
        )
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        raise UsageError(f"--{field.replace('_', '-')}: {first['msg']}")
    report = run_experiment(spec, args.workers)
    if args.out and args.out.endswith(".csv"):
        _emit(report_to_csv(report), args.out)
    else:
        _emit(report_to_json(report), args.out)
    if not report.valid:
        logger.error(f"Experiment stopped early: {report.error}")
        return EXIT_DOMAIN
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "analyze": cmd_analyze,
    "decide": cmd_decide,
    "reset": cmd_reset,
    "enumerate": cmd_enumerate,
    "experiment": cmd_experiment,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        settings = get_settings()
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    # Set up logging
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else settings.log_level.upper(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )

    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        logger.error(f"Usage error in {args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SyncLabError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
