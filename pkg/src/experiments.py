"""Experiment drivers behind the command line.

Each driver returns a pandas DataFrame and leaves writing to the caller. Runs
that do not depend on each other (depths of a sweep, seeds of a comparison)
fan out over a process pool bounded by ``jobs``.
"""

from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog
from dotenv import dotenv_values
from pydantic import BaseModel, Field, ValidationError, field_validator

from .benchmarks import BenchmarkEntry, get_entry, load_benchmark, resolve_program
from .config import get_settings
from .dsl.ast import Program
from .errors import ExperimentConfigError
from .formula import eval_at
from .learn import TrainConfig, evaluate_policy, group_statistics, make_tiling, sample_state, train
from .partition import Partition, sympar
from .solver import SolverConfig

logger = structlog.get_logger()
settings = get_settings()

LIST_FIELDS = ("depths", "seeds", "scales", "benchmarks")


class ExperimentSpec(BaseModel):
    """What to run: a benchmark (or program file), depths, seeds and learning knobs."""

    benchmark: str = "navigation"
    depths: List[int] = Field(default_factory=lambda: [settings.default_depth])
    seeds: List[int] = Field(default_factory=lambda: [0])
    episodes: Optional[int] = Field(default=None, gt=0)
    max_steps: Optional[int] = Field(default=None, gt=0)
    alpha: Optional[float] = Field(default=None, gt=0, le=1)
    gamma: Optional[float] = Field(default=None, ge=0, le=1)
    epsilon_start: Optional[float] = Field(default=None, ge=0, le=1)
    epsilon_end: Optional[float] = Field(default=None, ge=0, le=1)
    parts: int = Field(default=5, gt=0)  # parts sampled by the similarity protocol
    states_per_part: int = Field(default=5, gt=0)
    eval_starts: int = Field(default=20, gt=0)
    volume_samples: int = Field(default=2000, gt=0)
    scales: List[float] = Field(default_factory=lambda: [1.0, 10.0, 100.0])
    benchmarks: List[str] = Field(default_factory=lambda: ["navigation", "simple_maze", "wumpus"])
    output_dir: Path = Path("results")
    jobs: int = Field(default_factory=lambda: settings.jobs, gt=0)

    @field_validator("depths")
    @classmethod
    def _depths(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("depth list must not be empty")
        if any(k < 1 for k in v):
            raise ValueError("depths must be positive")
        return v

    @field_validator("seeds")
    @classmethod
    def _seeds(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("seed list must not be empty")
        if len(set(v)) != len(v):
            raise ValueError("seeds must be distinct")
        return v

    @field_validator("scales")
    @classmethod
    def _scales(cls, v: List[float]) -> List[float]:
        if not v or any(s <= 0 for s in v):
            raise ValueError("scales must be a non-empty list of positive numbers")
        return v

    def train_config(self, entry: Optional[BenchmarkEntry], seed: int) -> TrainConfig:
        return TrainConfig.from_settings(
            episodes=self.episodes,
            max_steps=self.max_steps if self.max_steps is not None else (entry.max_steps if entry else None),
            alpha=self.alpha,
            gamma=self.gamma,
            epsilon_start=self.epsilon_start,
            epsilon_end=self.epsilon_end,
            seed=seed,
            start=entry.start if entry else None,
            success_threshold=entry.success_threshold if entry else None,
        )


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def load_spec(path: Optional[Path] = None, **flags) -> ExperimentSpec:
    """Build a spec from a ``key=value`` file and flags; flags win over the file, the file over defaults."""
    values: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ExperimentConfigError(f"spec file {path} not found")
        values.update({k.lower(): v for k, v in dotenv_values(path).items() if v is not None and v != ""})
    values.update({k: v for k, v in flags.items() if v is not None})
    for key in LIST_FIELDS:
        if key in values:
            values[key] = _split_list(values[key])
    unknown = set(values) - set(ExperimentSpec.model_fields)
    if unknown:
        raise ExperimentConfigError(f"unknown spec keys: {', '.join(sorted(unknown))}")
    try:
        return ExperimentSpec(**values)
    except ValidationError as e:
        raise ExperimentConfigError(f"invalid experiment spec: {e}") from e


def _pool_map(fn: Callable, items: Sequence, jobs: int) -> List:
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def evaluation_starts(program: Program, n: int, seed: int) -> List[Tuple[Fraction, ...]]:
    rng = np.random.default_rng([seed, 7919])
    return [sample_state(program, rng) for _ in range(n)]


# -- depth sweep -------------------------------------------------------------


def _sweep_point(job: Tuple[Program, Optional[BenchmarkEntry], int, ExperimentSpec, SolverConfig]) -> Dict[str, Any]:
    program, entry, depth, spec, solver_cfg = job
    partition = sympar(program, depth, solver_cfg, jobs=1)
    best, evaluated = [], []
    starts = evaluation_starts(program, spec.eval_starts, 0)
    for seed in spec.seeds:
        cfg = spec.train_config(entry, seed)
        q, metrics = train(program, partition, cfg)
        best.append(metrics.best_reward)
        evaluated.append(float(np.mean(evaluate_policy(program, partition, q, starts, max_steps=cfg.max_steps, seed=seed))))
    return {
        "k": depth,
        "parts": partition.size,
        "complete": partition.complete,
        "bounds_hold": partition.bounds_hold(),
        "best_reward": float(np.mean(best)),
        "eval_reward": float(np.mean(evaluated)),
        "elapsed_s": round(partition.elapsed_s, 3),
    }


def depth_sweep(spec: ExperimentSpec, solver_cfg: Optional[SolverConfig] = None) -> pd.DataFrame:
    """Part count and learning reward as the search depth grows."""
    solver_cfg = solver_cfg or SolverConfig.from_settings()
    program, entry = resolve_program(spec.benchmark)
    jobs = [(program, entry, k, spec, solver_cfg) for k in sorted(set(spec.depths))]
    rows = _pool_map(_sweep_point, jobs, spec.jobs)
    frame = pd.DataFrame(rows, columns=["k", "parts", "complete", "bounds_hold", "best_reward", "eval_reward", "elapsed_s"])
    logger.info("Depth sweep finished", benchmark=spec.benchmark, depths=len(rows))
    return frame


# -- similarity within parts -------------------------------------------------


def sample_in_part(
    partition: Partition,
    part_id: int,
    n: int,
    rng: np.random.Generator,
    attempts: int = 20_000,
) -> List[Tuple[Fraction, ...]]:
    """Up to ``n`` uniform box states inside one part, by rejection."""
    program = partition.program
    formula = partition.parts[part_id].formula
    found: List[Tuple[Fraction, ...]] = []
    for _ in range(attempts):
        state = sample_state(program, rng)
        if eval_at(formula, program.state_env(state)):
            found.append(state)
            if len(found) == n:
                break
    return found


def similarity(spec: ExperimentSpec, solver_cfg: Optional[SolverConfig] = None) -> pd.DataFrame:
    """Train once, then compare greedy rewards of several states drawn from each of a few parts."""
    solver_cfg = solver_cfg or SolverConfig.from_settings()
    program, entry = resolve_program(spec.benchmark)
    depth = spec.depths[-1]
    seed = spec.seeds[0]
    partition = sympar(program, depth, solver_cfg, jobs=spec.jobs)
    cfg = spec.train_config(entry, seed)
    q, _ = train(program, partition, cfg)

    rng = np.random.default_rng(seed)
    groups: Dict[int, List[float]] = {}
    for part_id in rng.permutation(partition.size):
        part_id = int(part_id)
        if partition.parts[part_id].is_complement:
            continue
        states = sample_in_part(partition, part_id, spec.states_per_part, rng)
        if len(states) < spec.states_per_part:
            continue
        groups[part_id] = evaluate_policy(program, partition, q, states, max_steps=cfg.max_steps, seed=seed)
        if len(groups) == spec.parts:
            break
    if not groups:
        raise ExperimentConfigError("no part could be sampled for the similarity protocol")
    if len(groups) < spec.parts:
        logger.warning("Fewer parts sampled than requested", requested=spec.parts, sampled=len(groups))
    frame = group_statistics(groups)
    logger.info("Similarity finished", benchmark=spec.benchmark, parts=len(groups))
    return frame


# -- scale independence ------------------------------------------------------


def scale_table(spec: ExperimentSpec, solver_cfg: Optional[SolverConfig] = None) -> pd.DataFrame:
    """Part counts of scalable benchmarks at several proportional sizes."""
    solver_cfg = solver_cfg or SolverConfig.from_settings()
    rows = []
    for name in spec.benchmarks:
        entry = get_entry(name)
        if not entry.scalable:
            raise ExperimentConfigError(f"benchmark {name} has no scalable params")
        for scale in spec.scales:
            program, _ = load_benchmark(name, scale=scale)
            partition = sympar(program, entry.depth, solver_cfg, jobs=spec.jobs)
            rows.append(
                {
                    "benchmark": name,
                    "scale": scale,
                    "parts": partition.size,
                    "reference_parts": entry.reference_parts,
                    "elapsed_s": round(partition.elapsed_s, 3),
                }
            )
    return pd.DataFrame(rows, columns=["benchmark", "scale", "parts", "reference_parts", "elapsed_s"])


def scale_consistent(frame: pd.DataFrame) -> bool:
    """Whether every benchmark kept the same part count at every scale."""
    return bool((frame.groupby("benchmark")["parts"].nunique() <= 1).all())


# -- SymPar against tile coding ----------------------------------------------


def estimate_volumes(partition: Partition, n: int, rng: np.random.Generator) -> np.ndarray:
    """Monte Carlo share of the box each part occupies."""
    counts = np.zeros(partition.size)
    for _ in range(n):
        counts[partition.locate(sample_state(partition.program, rng))] += 1
    return counts / n


def less_likely_starts(partition: Partition, n: int, volume_samples: int, seed: int) -> List[Tuple[Fraction, ...]]:
    """Start states from the parts with the smallest estimated volume."""
    rng = np.random.default_rng([seed, 104729])
    volumes = estimate_volumes(partition, volume_samples, rng)
    starts: List[Tuple[Fraction, ...]] = []
    for part_id in np.argsort(volumes, kind="stable"):
        part = partition.parts[int(part_id)]
        if volumes[part_id] > 0:
            starts.extend(sample_in_part(partition, part.id, 1, rng))
        elif part.witness is not None:
            starts.append(part.witness)
        if len(starts) == n:
            break
    return starts


def _compare_seed(job: Tuple[Program, Optional[BenchmarkEntry], Partition, ExperimentSpec, int, Dict[str, list]]) -> List[Dict[str, Any]]:
    program, entry, partition, spec, seed, start_sets = job
    tiling = make_tiling(program.state_vars, partition.size)
    cfg = spec.train_config(entry, seed)
    rows = []
    for label, obs in (("sympar", partition), ("tiling", tiling)):
        q, metrics = train(program, obs, cfg)
        for start_set, starts in start_sets.items():
            rewards = evaluate_policy(program, obs, q, starts, max_steps=cfg.max_steps, seed=seed)
            rows.append(
                {
                    "observation": label,
                    "parts": obs.size,
                    "start_set": start_set,
                    "seed": seed,
                    "succ": round(metrics.succ, 2),
                    "mean_reward": float(np.mean(rewards)),
                }
            )
    return rows


def compare(spec: ExperimentSpec, solver_cfg: Optional[SolverConfig] = None) -> pd.DataFrame:
    """SymPar against a budget-matched tiling, from random and from less likely start states.

    ``normalized_reward`` rescales ``mean_reward`` to [0, 1] over all rows of the table.
    """
    solver_cfg = solver_cfg or SolverConfig.from_settings()
    program, entry = resolve_program(spec.benchmark)
    partition = sympar(program, spec.depths[-1], solver_cfg, jobs=spec.jobs)
    start_sets = {
        "random": evaluation_starts(program, spec.eval_starts, spec.seeds[0]),
        "less_likely": less_likely_starts(partition, spec.eval_starts, spec.volume_samples, spec.seeds[0]),
    }
    jobs = [(program, entry, partition, spec, seed, start_sets) for seed in spec.seeds]
    rows = [row for chunk in _pool_map(_compare_seed, jobs, spec.jobs) for row in chunk]
    frame = pd.DataFrame(rows, columns=["observation", "parts", "start_set", "seed", "succ", "mean_reward"])
    low, high = frame["mean_reward"].min(), frame["mean_reward"].max()
    frame["normalized_reward"] = (frame["mean_reward"] - low) / (high - low) if high > low else 0.0
    logger.info("Comparison finished", benchmark=spec.benchmark, seeds=len(spec.seeds), parts=partition.size)
    return frame


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def parse_overrides(items: Iterable[str]) -> Dict[str, Fraction]:
    """``NAME=value`` pairs from the command line into param overrides."""
    overrides: Dict[str, Fraction] = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise ExperimentConfigError(f"expected NAME=value, got {item!r}")
        try:
            overrides[name.strip()] = Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise ExperimentConfigError(f"bad value for {name.strip()}: {value!r}") from e
    return overrides
