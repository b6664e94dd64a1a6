"""Benchmark environment programs shipped with the package.

Each entry points at a ``.env`` file under ``programs/`` and records how the
experiments use it: the recommended search depth, the reward that counts as a
success, a fixed start state when training should always start there, and
which params scale the state box proportionally.
"""

from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import structlog
from pydantic import BaseModel, Field

from ..dsl import Program, parse_file
from ..errors import BenchmarkNotFoundError, ExperimentConfigError

logger = structlog.get_logger()

PROGRAMS_DIR = Path(__file__).parent / "programs"


class BenchmarkEntry(BaseModel):
    name: str
    file: str
    depth: int = Field(gt=0)
    success_threshold: float = 0.0
    max_steps: int = Field(default=200, gt=0)
    start: Optional[List[float]] = None
    scaled_params: Dict[str, float] = {}
    reference_parts: Optional[int] = None  # part count reported for the original encoding
    notes: str = ""

    @property
    def path(self) -> Path:
        return PROGRAMS_DIR / self.file

    @property
    def scalable(self) -> bool:
        return bool(self.scaled_params)

    def scale_overrides(self, scale: float) -> Dict[str, Fraction]:
        """Param overrides that multiply every scaled constant by ``scale``."""
        if scale <= 0:
            raise ExperimentConfigError(f"scale must be positive, got {scale}")
        factor = Fraction(str(scale))
        return {name: Fraction(str(value)) * factor for name, value in self.scaled_params.items()}


CATALOG: Dict[str, BenchmarkEntry] = {
    entry.name: entry
    for entry in [
        BenchmarkEntry(
            name="navigation",
            file="navigation.env",
            depth=8,
            success_threshold=0,
            start=[1, 1],
            scaled_params={"W": 10, "H": 10, "V": 1},
            reference_parts=51,
            notes="10x10 room, trap in the corner, cheese next to it; -1 per step.",
        ),
        BenchmarkEntry(
            name="simple_maze",
            file="simple_maze.env",
            depth=8,
            success_threshold=0,
            start=[0, 0],
            scaled_params={"N": 10, "S": 1},
            reference_parts=33,
            notes="Integer grid with a wall block and a hole; goal in the top right corner.",
        ),
        BenchmarkEntry(
            name="wumpus",
            file="wumpus.env",
            depth=8,
            success_threshold=1000,
            max_steps=400,
            start=[0, 0],
            scaled_params={"N": 16, "S": 1},
            reference_parts=73,
            notes="16x16 by default; scale 4 gives the 64x64 world.",
        ),
        BenchmarkEntry(
            name="braking_car",
            file="braking_car.env",
            depth=3,
            success_threshold=900,
            max_steps=100,
            notes="Stop before the obstacle with as little brake pressure as possible.",
        ),
        BenchmarkEntry(
            name="mountain_car",
            file="mountain_car.env",
            depth=4,
            success_threshold=0,
            max_steps=500,
            start=[-0.5, 0],
            notes="Nonlinear through cos; emptiness checks may come back unknown.",
        ),
        BenchmarkEntry(
            name="random_walk",
            file="random_walk.env",
            depth=4,
            success_threshold=100,
            start=[10],
            notes="Uniform step noise exercises sampling variables and disjointification.",
        ),
        BenchmarkEntry(
            name="synthetic_one_action",
            file="synthetic_one_action.env",
            depth=2,
            max_steps=1,
            notes="One action: a single part would do, the partition still splits.",
        ),
        BenchmarkEntry(
            name="synthetic_chain",
            file="synthetic_chain.env",
            depth=2,
            success_threshold=10,
            max_steps=20,
            notes="Two-state deterministic chain with a known optimal policy.",
        ),
        BenchmarkEntry(
            name="synthetic_unbranched",
            file="synthetic_unbranched.env",
            depth=1,
            max_steps=1,
            notes="No branches: one part at any depth.",
        ),
    ]
}


def list_benchmarks() -> List[str]:
    return list(CATALOG)


def get_entry(name: str) -> BenchmarkEntry:
    try:
        return CATALOG[name]
    except KeyError:
        raise BenchmarkNotFoundError(f"unknown benchmark {name!r}; available: {', '.join(CATALOG)}") from None


def load_benchmark(
    name: str,
    scale: float = 1,
    overrides: Optional[Mapping[str, Fraction]] = None,
) -> Tuple[Program, BenchmarkEntry]:
    """Parse and validate a shipped benchmark, optionally scaled."""
    entry = get_entry(name)
    params: Dict[str, Fraction] = {}
    if scale != 1:
        if not entry.scalable:
            raise ExperimentConfigError(f"benchmark {name} has no scalable params")
        params.update(entry.scale_overrides(scale))
    params.update({k: Fraction(v) for k, v in (overrides or {}).items()})
    program = parse_file(entry.path, params or None)
    logger.debug("Benchmark loaded", name=name, scale=scale, overrides=sorted(params))
    return program, entry


def resolve_program(target: str, overrides: Optional[Mapping[str, Fraction]] = None) -> Tuple[Program, Optional[BenchmarkEntry]]:
    """A benchmark name or a path to a ``.env`` file."""
    if target in CATALOG:
        return load_benchmark(target, overrides=overrides)
    path = Path(target)
    if not path.is_file():
        raise BenchmarkNotFoundError(f"{target} is neither a benchmark name nor a program file")
    return parse_file(path, overrides), None
