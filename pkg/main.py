#!/usr/bin/env python3
"""
Main entry point for SymPar.

Usage:
    # Partition a benchmark (or a .env program file) and dump it
    python main.py partition navigation --depth 8 --out results/navigation.json

    # Train tabular Q-learning on a SymPar partition or a tiling
    python main.py train navigation --obs sympar --seed 7 --out results/nav_metrics.csv
    python main.py train navigation --obs tiling --budget 51

    # Experiments
    python main.py depth-sweep --benchmark braking_car --depths 1,2,3
    python main.py similarity --benchmark braking_car
    python main.py scale --benchmarks navigation,simple_maze,wumpus --scales 1,10,100
    python main.py compare --benchmark navigation --seeds 0,1,2,3,4

    # Print a validated program back in canonical syntax
    python main.py inspect navigation

Exit codes: 0 success, 1 partition invariant violated, 2 usage or input error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import structlog

from src.benchmarks import list_benchmarks, resolve_program
from src.config import get_settings
from src.dsl import print_program
from src.errors import DSLError, PartitionInvariantError, SymParError
from src.experiments import (
    compare,
    depth_sweep,
    load_spec,
    parse_overrides,
    scale_consistent,
    scale_table,
    similarity,
    write_frame,
)
from src.learn import TrainConfig, make_tiling, train
from src.partition import load_partition, sympar
from src.solver import SolverConfig

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2

# Configure structured logging
structlog.configure(
    processors=[
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        structlog.processors.UnicodeDecoder(),
        structlog.dev.ConsoleRenderer(),
    ],
    wrapper_class=structlog.stdlib.BoundLogger,
    context_class=dict,
    logger_factory=structlog.stdlib.LoggerFactory(),
    cache_logger_on_first_use=True,
)

logger = structlog.get_logger()
settings = get_settings()


def configure_logging(verbose: bool = False):
    # stdout carries command results only.
    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=logging.DEBUG if verbose else getattr(logging, settings.log_level.upper(), logging.INFO),
        force=True,
    )


def solver_config(args: argparse.Namespace) -> SolverConfig:
    return SolverConfig.from_settings(
        backend=args.backend,
        command=args.solver,
        timeout_ms=args.timeout_ms,
        unknown_policy=args.unknown_policy,
    )


def build_partition(args: argparse.Namespace):
    program, entry = resolve_program(args.target, parse_overrides(args.param))
    depth = args.depth or (entry.depth if entry else settings.default_depth)
    return sympar(program, depth, solver_config(args), jobs=args.jobs, prune=args.prune), entry


def cmd_partition(args: argparse.Namespace) -> int:
    partition, _ = build_partition(args)
    out = Path(args.out or f"results/{partition.program.name}_k{partition.depth}.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    partition.write_json(out)

    print(f"program: {partition.program.name}")
    print(f"depth: {partition.depth}")
    print(f"parts: {partition.size}")
    for action, count, complete in zip(partition.program.actions, partition.pc_counts, partition.pc_complete):
        print(f"|PC^{action.name}| = {count}" + ("" if complete else " (truncated)"))
    print(partition.bounds_line())
    if partition.unknown_parts:
        print(f"unknown parts: {partition.unknown_parts}")
    print(f"elapsed_s: {partition.elapsed_s:.3f}")
    print(f"dump: {out}")

    if not args.no_raster:
        raster = out.with_suffix(".ppm")
        partition.write_ppm(raster, args.resolution)
        print(f"raster: {raster}")
    return EXIT_OK if partition.bounds_hold() else EXIT_INVARIANT


def cmd_train(args: argparse.Namespace) -> int:
    entry = None
    partition = None
    if args.partition:
        path = Path(args.partition)
        if not path.is_file():
            logger.error("Partition dump not found", path=str(path))
            return EXIT_USAGE
        partition = load_partition(path)
        program = partition.program
    elif args.target:
        program, entry = resolve_program(args.target, parse_overrides(args.param))
    else:
        logger.error("Either a program or --partition is required")
        return EXIT_USAGE

    if args.obs == "sympar":
        if partition is None:
            depth = args.depth or (entry.depth if entry else settings.default_depth)
            partition = sympar(program, depth, solver_config(args), jobs=args.jobs)
        obs = partition
    else:
        budget = args.budget
        if budget is None:
            if partition is None:
                logger.error("Tiling needs --budget or --partition")
                return EXIT_USAGE
            budget = partition.size
        obs = make_tiling(program.state_vars, budget)
        print(f"tiling: {' x '.join(str(c) for c in obs.counts)} = {obs.size} tiles for budget {budget}")

    cfg = TrainConfig.from_settings(
        episodes=args.episodes,
        max_steps=args.max_steps if args.max_steps is not None else (entry.max_steps if entry else None),
        alpha=args.alpha,
        gamma=args.gamma,
        seed=args.seed,
        seeding_mode=args.seeding,
        start=entry.start if entry and not args.random_start else None,
        success_threshold=args.success_threshold if args.success_threshold is not None else (entry.success_threshold if entry else None),
    )
    _, metrics = train(program, obs, cfg)

    out = Path(args.out or f"results/{program.name}_{args.obs}_seed{args.seed}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    metrics.write_csv(out, obs.size)
    summary = metrics.summary(obs.size)
    print(" ".join(f"{k}={v}" for k, v in summary.items()))
    print(f"metrics: {out}")
    return EXIT_OK


def _spec(args: argparse.Namespace, **extra):
    return load_spec(
        args.spec,
        benchmark=getattr(args, "benchmark", None),
        depths=getattr(args, "depths", None),
        seeds=getattr(args, "seeds", None),
        episodes=getattr(args, "episodes", None),
        max_steps=getattr(args, "max_steps", None),
        output_dir=getattr(args, "output_dir", None),
        jobs=args.jobs,
        **extra,
    )


def cmd_depth_sweep(args: argparse.Namespace) -> int:
    spec = _spec(args)
    frame = depth_sweep(spec, solver_config(args))
    path = write_frame(frame, Path(args.out or spec.output_dir / f"{spec.benchmark}_depth_sweep.csv"))
    print(frame.to_string(index=False))
    print(f"table: {path}")
    return EXIT_OK if frame["bounds_hold"].all() else EXIT_INVARIANT


def cmd_similarity(args: argparse.Namespace) -> int:
    spec = _spec(args, parts=args.parts, states_per_part=args.states_per_part)
    frame = similarity(spec, solver_config(args))
    path = write_frame(frame, Path(args.out or spec.output_dir / f"{spec.benchmark}_similarity.csv"))
    print(frame.to_string(index=False))
    print(f"table: {path}")
    return EXIT_OK


def cmd_scale(args: argparse.Namespace) -> int:
    spec = _spec(args, benchmarks=args.benchmarks, scales=args.scales)
    frame = scale_table(spec, solver_config(args))
    path = write_frame(frame, Path(args.out or spec.output_dir / "scale.csv"))
    print(frame.to_string(index=False))
    print(f"table: {path}")
    if not scale_consistent(frame):
        logger.error("Part counts differ across scales")
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    spec = _spec(args, eval_starts=args.eval_starts)
    frame = compare(spec, solver_config(args))
    path = write_frame(frame, Path(args.out or spec.output_dir / f"{spec.benchmark}_compare.csv"))
    print(frame.groupby(["observation", "start_set"])[["succ", "normalized_reward"]].mean().to_string())
    print(f"table: {path}")
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    program, _ = resolve_program(args.target, parse_overrides(args.param))
    print(print_program(program), end="")
    return EXIT_OK


def _solver_flags(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("solver")
    group.add_argument("--backend", choices=["internal", "external"], help="satisfiability backend")
    group.add_argument("--solver", help="external SMT-LIB v2 solver command, e.g. 'z3 -in'")
    group.add_argument("--timeout-ms", type=int, help="per-query timeout of the external solver")
    group.add_argument("--unknown-policy", choices=["keep_part", "drop_part"])


def _experiment_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--spec", type=Path, help="key=value experiment file")
    parser.add_argument("--benchmark", help="benchmark name or program file")
    parser.add_argument("--depths", help="comma-separated search depths")
    parser.add_argument("--seeds", help="comma-separated seeds")
    parser.add_argument("--episodes", type=int)
    parser.add_argument("--max-steps", type=int)
    parser.add_argument("--output-dir", type=Path)
    parser.add_argument("--out", type=Path, help="CSV output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sympar",
        description="Symbolic partitioning of reinforcement learning state spaces.",
        epilog=f"benchmarks: {', '.join(list_benchmarks())}",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("--jobs", type=int, help="worker count (default SYMPAR_JOBS)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="partition a program's state space")
    p.add_argument("target", help="benchmark name or program file")
    p.add_argument("--depth", type=int)
    p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
    p.add_argument("--prune", action="store_true", help="drop infeasible paths during exploration")
    p.add_argument("--out", help="partition dump path (JSON)")
    p.add_argument("--no-raster", action="store_true")
    p.add_argument("--resolution", type=int)
    _solver_flags(p)
    p.set_defaults(handler=cmd_partition)

    p = sub.add_parser("train", help="train tabular Q-learning")
    p.add_argument("target", nargs="?", help="benchmark name or program file")
    p.add_argument("--partition", help="partition dump to train on")
    p.add_argument("--obs", choices=["sympar", "tiling"], default="sympar")
    p.add_argument("--budget", type=int, help="tiling budget; defaults to the partition size")
    p.add_argument("--depth", type=int)
    p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
    p.add_argument("--episodes", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeding", choices=["witness_first", "random"])
    p.add_argument("--random-start", action="store_true", help="ignore the benchmark's fixed start state")
    p.add_argument("--success-threshold", type=float)
    p.add_argument("--out", help="metrics CSV path")
    _solver_flags(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("depth-sweep", help="part count and reward across search depths")
    _experiment_flags(p)
    _solver_flags(p)
    p.set_defaults(handler=cmd_depth_sweep)

    p = sub.add_parser("similarity", help="reward spread of states within parts")
    _experiment_flags(p)
    p.add_argument("--parts", type=int)
    p.add_argument("--states-per-part", type=int)
    _solver_flags(p)
    p.set_defaults(handler=cmd_similarity)

    p = sub.add_parser("scale", help="part counts at proportional sizes")
    _experiment_flags(p)
    p.add_argument("--benchmarks", help="comma-separated scalable benchmarks")
    p.add_argument("--scales", help="comma-separated scale factors")
    _solver_flags(p)
    p.set_defaults(handler=cmd_scale)

    p = sub.add_parser("compare", help="SymPar against a budget-matched tiling")
    _experiment_flags(p)
    p.add_argument("--eval-starts", type=int)
    _solver_flags(p)
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("inspect", help="print a validated program")
    p.add_argument("target", help="benchmark name or program file")
    p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
    p.set_defaults(handler=cmd_inspect)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except PartitionInvariantError as e:
        logger.error("Partition invariant violated", error=str(e))
        return EXIT_INVARIANT
    except DSLError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SymParError, ValueError, OSError) as e:
        logger.error("Command failed", command=args.command, error=str(e))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
