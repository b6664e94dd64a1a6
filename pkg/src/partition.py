"""State-space partitioning from per-action path conditions.

``sympar`` runs symbolic execution once per action, intersects the resulting
path-condition sets into their coarsest common refinement, adds a complement
part when the refinement does not cover the state box, and attaches a witness
state to every part. ``Partition.locate`` is the observation function the
learner uses: it maps a concrete state to the id of the only part containing it.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel

from .config import get_settings
from .dsl import parse, print_program
from .dsl.ast import Program, StateVar
from .errors import PartitionInvariantError
from .formula import FALSE, TRUE, Formula, box_formula, conjoin, disjoin, eval_at, format_formula, negate, parse_formula
from .solver import SatResult, SolverConfig, check_many, check_sat, witness
from .symexec import PathConditionSet, project_and_disjointify, sym_execute

logger = structlog.get_logger()
settings = get_settings()

FORMAT_VERSION = 1

State = Tuple[Fraction, ...]
Provenance = Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class Part:
    id: int
    formula: Formula
    witness: Optional[State] = None
    provenance: Provenance = ()
    is_complement: bool = False
    emptiness_status: Literal["nonempty", "unknown"] = "nonempty"


@dataclass
class Partition:
    program: Program
    parts: List[Part]
    depth: int
    backend: str = "internal"
    pc_counts: Tuple[int, ...] = ()
    pc_complete: Tuple[bool, ...] = ()
    elapsed_s: float = 0.0
    locate_cache_size: int = field(default_factory=lambda: settings.locate_cache_size)

    def __post_init__(self):
        self._cached_locate = lru_cache(maxsize=self.locate_cache_size)(self._locate)

    # The locate cache does not pickle; worker processes rebuild it.
    def __getstate__(self):
        state = self.__dict__.copy()
        state.pop("_cached_locate", None)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self.__post_init__()

    @property
    def size(self) -> int:
        return len(self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    @property
    def complete(self) -> bool:
        return all(self.pc_complete)

    @property
    def has_complement(self) -> bool:
        return any(p.is_complement for p in self.parts)

    @property
    def unknown_parts(self) -> int:
        """Parts whose emptiness, or grid point for integer variables, was not settled."""
        return sum(p.emptiness_status == "unknown" for p in self.parts)

    def witnesses(self) -> List[Tuple[int, State]]:
        """``(part id, witness)`` for every part that has one, in id order."""
        return [(p.id, p.witness) for p in self.parts if p.witness is not None]

    def locate(self, state: Sequence) -> int:
        """Id of the unique part containing ``state``."""
        return self._cached_locate(tuple(Fraction(v) for v in state))

    def _locate(self, state: State) -> int:
        if not self.program.contains(state):
            raise PartitionInvariantError(f"state {_show(state)} is outside the state box")
        env = self.program.state_env(state)
        matches = [p.id for p in self.parts if eval_at(p.formula, env)]
        if len(matches) != 1:
            raise PartitionInvariantError(
                f"state {_show(state)} lies in {len(matches)} parts" + (f" {matches}" if matches else "")
            )
        return matches[0]

    def bounds(self) -> Tuple[int, int]:
        """Lower and upper bound on the part count implied by the per-action sets."""
        lower = max(self.pc_counts, default=0)
        upper = math.prod(self.pc_counts) + (1 if self.has_complement else 0)
        return lower, upper

    def bounds_hold(self) -> bool:
        lower, upper = self.bounds()
        return lower <= self.size <= upper

    def bounds_line(self) -> str:
        lower, upper = self.bounds()
        return f"max|PC^a| = {lower} <= |parts| = {self.size} <= prod|PC^a| = {upper}: {str(self.bounds_hold()).lower()}"

    def to_dump(self) -> "PartitionDump":
        return PartitionDump(
            program=self.program.name,
            program_source=print_program(self.program),
            state_vars=list(self.program.state_names),
            depth=self.depth,
            backend=self.backend,
            complete=self.complete,
            pc_counts=list(self.pc_counts),
            pc_complete=list(self.pc_complete),
            elapsed_s=self.elapsed_s,
            parts=[
                PartRecord(
                    id=p.id,
                    formula=format_formula(p.formula),
                    witness=[_fraction_text(v) for v in p.witness] if p.witness is not None else None,
                    provenance=[list(pair) for pair in p.provenance],
                    is_complement=p.is_complement,
                    emptiness_status=p.emptiness_status,
                )
                for p in self.parts
            ],
        )

    def write_json(self, path: Path):
        Path(path).write_text(self.to_dump().model_dump_json(indent=2) + "\n", encoding="utf-8")

    def raster(self, resolution: Optional[int] = None) -> np.ndarray:
        """Part ids over a grid of cell centres spanning the first two state dimensions."""
        resolution = resolution or settings.raster_resolution
        vars_ = self.program.state_vars
        xs = _centres(vars_[0], resolution)
        ys = _centres(vars_[1], resolution) if len(vars_) > 1 else [None]
        rest = [(v.lower + v.upper) / 2 for v in vars_[2:]]
        grid = np.zeros((len(ys), len(xs)), dtype=np.int64)
        for row, y in enumerate(reversed(ys)):
            for col, x in enumerate(xs):
                state = (x,) + ((y,) if y is not None else ()) + tuple(rest)
                grid[row, col] = self.locate(state)
        return grid

    def write_ppm(self, path: Path, resolution: Optional[int] = None):
        grid = self.raster(resolution)
        palette = _palette(self.size)
        pixels = palette[grid]
        height, width = grid.shape
        with open(path, "wb") as fh:
            fh.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
            fh.write(pixels.astype(np.uint8).tobytes())


class PartRecord(BaseModel):
    id: int
    formula: str
    witness: Optional[List[str]] = None
    provenance: List[List[int]] = []
    is_complement: bool = False
    emptiness_status: Literal["nonempty", "unknown"] = "nonempty"


class PartitionDump(BaseModel):
    format_version: Literal[1] = FORMAT_VERSION
    program: str
    program_source: str
    state_vars: List[str]
    depth: int
    backend: str
    complete: bool
    pc_counts: List[int]
    pc_complete: List[bool]
    elapsed_s: float
    parts: List[PartRecord]


def load_partition(path: Path) -> Partition:
    dump = PartitionDump.model_validate_json(Path(path).read_text(encoding="utf-8"))
    program = parse(dump.program_source)
    parts = [
        Part(
            id=r.id,
            formula=parse_formula(r.formula),
            witness=tuple(Fraction(v) for v in r.witness) if r.witness is not None else None,
            provenance=tuple((a, i) for a, i in r.provenance),
            is_complement=r.is_complement,
            emptiness_status=r.emptiness_status,
        )
        for r in dump.parts
    ]
    return Partition(
        program=program,
        parts=parts,
        depth=dump.depth,
        backend=dump.backend,
        pc_counts=tuple(dump.pc_counts),
        pc_complete=tuple(dump.pc_complete),
        elapsed_s=dump.elapsed_s,
    )


def _show(state: State) -> str:
    return "(" + ", ".join(_fraction_text(v) for v in state) + ")"


def _fraction_text(value: Fraction) -> str:
    return str(Fraction(value))


def _centres(var: StateVar, n: int) -> List[Fraction]:
    width = (var.upper - var.lower) / n
    return [var.lower + width * (i + Fraction(1, 2)) for i in range(n)]


def _palette(n: int) -> np.ndarray:
    hues = (np.arange(max(n, 1)) * 0.618033988749895) % 1.0
    h = hues * 6
    c = np.full_like(h, 0.85)
    x = c * (1 - np.abs(h % 2 - 1))
    zeros = np.zeros_like(h)
    sector = np.floor(h).astype(int) % 6
    rgb = np.select(
        [sector[:, None] == k for k in range(6)],
        [
            np.stack([c, x, zeros], axis=1),
            np.stack([x, c, zeros], axis=1),
            np.stack([zeros, c, x], axis=1),
            np.stack([zeros, x, c], axis=1),
            np.stack([x, zeros, c], axis=1),
            np.stack([c, zeros, x], axis=1),
        ],
    )
    return np.round((rgb + 0.1) * 255 / 0.95).clip(0, 255)


def _keep(result: SatResult, cfg: SolverConfig) -> bool:
    if result.is_unknown:
        return cfg.unknown_policy == "keep_part"
    return result.is_sat


def _refine(
    sets: Sequence[Sequence[Formula]],
    cfg: SolverConfig,
    box: Formula = TRUE,
    jobs: int = 1,
) -> List[Tuple[Formula, Provenance, bool]]:
    """Fold the sets in order, dropping empty intersections after every fold.

    Returns ``(formula, provenance, undecided)`` triples, where ``undecided``
    marks intersections whose emptiness the solver could not settle.
    """
    frontier: List[Tuple[Formula, Provenance, bool]] = [(TRUE, (), False)]
    for a, pcs in enumerate(sets):
        candidates = [
            (conjoin([f, pc]), prov + ((a, i),), undecided)
            for f, prov, undecided in frontier
            for i, pc in enumerate(pcs)
        ]
        results = check_many([conjoin([c, box]) for c, _, _ in candidates], cfg, jobs)
        frontier = [
            (c, prov, undecided or result.is_unknown)
            for (c, prov, undecided), result in zip(candidates, results)
            if _keep(result, cfg)
        ]
        logger.debug("Refinement fold", action=a, candidates=len(candidates), kept=len(frontier))
    return frontier


def coarsest_common_refinement(
    sets: Sequence[Sequence[Formula]],
    cfg: Optional[SolverConfig] = None,
    box: Formula = TRUE,
    jobs: int = 1,
) -> List[Formula]:
    """Every non-empty intersection choosing one formula per set."""
    cfg = cfg if cfg is not None else SolverConfig.from_settings()
    if not sets:
        return []
    return [f for f, _, _ in _refine(sets, cfg, box, jobs)]


def _per_action(program: Program, depth: int, cfg: SolverConfig, jobs: int, prune: bool) -> List[PathConditionSet]:
    def run(action: int) -> PathConditionSet:
        raw = sym_execute(program, action, depth, prune=prune, cfg=cfg)
        return project_and_disjointify(raw, cfg, program.state_vars)

    actions = range(program.n_actions)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run, actions))
    return [run(a) for a in actions]


def _covers(sets: Sequence[PathConditionSet], box: Formula, cfg: SolverConfig) -> bool:
    """Whether every action's path conditions cover the box (so their refinement does too)."""
    for pcs in sets:
        if not check_sat(conjoin([box, negate(disjoin(pcs.pcs))]), cfg).is_unsat:
            return False
    return True


def sympar(
    program: Program,
    depth: int,
    cfg: Optional[SolverConfig] = None,
    jobs: Optional[int] = None,
    prune: bool = False,
) -> Partition:
    """Partition the state box of ``program`` from its path conditions at search depth ``depth``."""
    cfg = cfg if cfg is not None else SolverConfig.from_settings()
    jobs = jobs if jobs is not None else settings.jobs
    started = time.perf_counter()
    box = box_formula(program.state_vars)

    sets = _per_action(program, depth, cfg, jobs, prune)
    for pcs in sets:
        logger.info("Path conditions", action=program.actions[pcs.action].name, count=len(pcs), complete=pcs.complete)

    refined = _refine([pcs.pcs for pcs in sets], cfg, box, jobs)
    formulas = [f for f, _, _ in refined]

    # Dropped undecided intersections may leave holes the per-action cover cannot see.
    dropped_unknown = cfg.unknown_policy == "drop_part"
    complement: Optional[Formula] = None
    if dropped_unknown or not _covers(sets, box, cfg):
        candidate = negate(disjoin(formulas)) if formulas else TRUE
        result = check_sat(conjoin([box, candidate]), cfg)
        if not result.is_unsat:
            complement = candidate
            logger.warning("Adding complement part", status=result.status.value)

    entries = [(f, prov, undecided, False) for f, prov, undecided in refined]
    if complement is not None and complement != FALSE:
        entries.append((complement, (), False, True))

    def attach(entry) -> Tuple[Optional[State], str]:
        formula, _, undecided, _ = entry
        result = witness(formula, program.state_vars, cfg)
        if result.is_sat and result.model is not None:
            point = tuple(result.model[name] for name in program.state_names)
            if any(v.discrete and Fraction(x).denominator != 1 for v, x in zip(program.state_vars, point)):
                logger.warning("Part has no grid point", formula=format_formula(formula))
                return None, "unknown"
            return point, "nonempty"
        if result.is_unsat:
            logger.warning("Kept part has no witness", formula=format_formula(formula))
        return None, ("nonempty" if result.is_sat and not undecided else "unknown")

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            attached = list(pool.map(attach, entries))
    else:
        attached = [attach(e) for e in entries]

    parts = [
        Part(
            id=i,
            formula=formula,
            witness=point,
            provenance=prov,
            is_complement=is_complement,
            emptiness_status=status,
        )
        for i, ((formula, prov, _, is_complement), (point, status)) in enumerate(zip(entries, attached))
    ]

    partition = Partition(
        program=program,
        parts=parts,
        depth=depth,
        backend=cfg.describe(),
        pc_counts=tuple(len(pcs) for pcs in sets),
        pc_complete=tuple(pcs.complete for pcs in sets),
        elapsed_s=time.perf_counter() - started,
    )
    logger.info(
        "Partition built",
        program=program.name,
        parts=partition.size,
        depth=depth,
        complete=partition.complete,
        elapsed_s=round(partition.elapsed_s, 3),
    )
    return partition
