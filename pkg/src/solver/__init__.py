"""Satisfiability, projection and witnesses over ``src.formula`` formulas.

Two backends answer ``check_sat``: the in-process Fourier–Motzkin checker
(``internal``) and any SMT-LIB v2 solver run as a subprocess (``external``).
Projection of sampling variables always goes through Fourier–Motzkin.
"""

from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, List, Literal, Optional, Sequence, Union

import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import get_settings
from ..dsl.ast import StateVar
from ..formula import Formula, Truth, box_formula, conjoin, normalize
from .internal import InternalSolver
from .result import UNSAT, SatResult, SatStatus
from .smtlib import ExternalSolver

logger = structlog.get_logger()

__all__ = [
    "SatResult",
    "SatStatus",
    "SolverConfig",
    "check_many",
    "check_sat",
    "eliminate",
    "get_solver",
    "witness",
]


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    backend: Literal["internal", "external"] = "internal"
    command: Optional[str] = None
    timeout_ms: int = Field(default=10_000, gt=0)
    seed_option: Optional[str] = None
    unknown_policy: Literal["keep_part", "drop_part"] = "keep_part"
    cube_limit: int = Field(default=10_000, gt=0)
    nonlinear_samples: int = Field(default=2_000, ge=0)
    integer_candidates: int = Field(default=64, gt=0)

    @model_validator(mode="after")
    def _external_needs_command(self) -> "SolverConfig":
        if self.backend == "external" and not self.command:
            raise ValueError("external backend requires a solver command (SYMPAR_SOLVER)")
        return self

    @classmethod
    def from_settings(cls, **overrides) -> "SolverConfig":
        settings = get_settings()
        values = dict(
            backend=settings.solver_backend,
            command=settings.solver,
            timeout_ms=settings.solver_timeout_ms,
            seed_option=settings.solver_seed_option,
            unknown_policy=settings.unknown_policy,
            cube_limit=settings.cube_limit,
            nonlinear_samples=settings.nonlinear_samples,
            integer_candidates=settings.witness_integer_candidates,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def describe(self) -> str:
        if self.backend == "external":
            return f"external:{self.command}"
        return "internal"


Backend = Union[InternalSolver, ExternalSolver]


@lru_cache(maxsize=16)
def _internal(cfg: SolverConfig) -> InternalSolver:
    return InternalSolver(cfg.cube_limit, cfg.nonlinear_samples, cfg.integer_candidates)


def get_solver(cfg: SolverConfig) -> Backend:
    if cfg.backend == "external":
        return ExternalSolver(cfg.command, cfg.timeout_ms, cfg.seed_option)
    return _internal(cfg)


def _config(cfg: Optional[SolverConfig]) -> SolverConfig:
    return cfg if cfg is not None else SolverConfig()


def check_sat(f: Formula, cfg: Optional[SolverConfig] = None) -> SatResult:
    """SAT with a model, UNSAT, or UNKNOWN (external timeout, undecided nonlinear cube)."""
    f = normalize(f)
    if isinstance(f, Truth):
        return SatResult(SatStatus.SAT, {}) if f.value else UNSAT
    return get_solver(_config(cfg)).check(f)


def check_many(fs: Sequence[Formula], cfg: Optional[SolverConfig] = None, jobs: int = 1) -> List[SatResult]:
    """``check_sat`` over a batch, in input order."""
    cfg = _config(cfg)
    if jobs <= 1 or len(fs) <= 1:
        return [check_sat(f, cfg) for f in fs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda f: check_sat(f, cfg), fs))


def eliminate(f: Formula, names: Iterable[str], cfg: Optional[SolverConfig] = None) -> Formula:
    """Existentially quantify ``names`` out of ``f`` (exact for linear occurrences)."""
    return _internal(_config(cfg)).eliminate(f, names)


def witness(f: Formula, state_vars: Sequence[StateVar], cfg: Optional[SolverConfig] = None) -> SatResult:
    """A point of ``f`` inside the state box.

    The model of a SAT result lists every state variable. Integer-valued state
    variables get integer values whenever the internal search finds some.
    """
    cfg = _config(cfg)
    bounded = conjoin([f, box_formula(state_vars)])
    if cfg.backend == "external":
        result = check_sat(bounded, cfg)
    else:
        result = _internal(cfg).check(bounded, integral=[v.name for v in state_vars if v.discrete])
    if not result.is_sat or result.model is None:
        return result
    point = {v.name: result.model.get(v.name, _midpoint(v)) for v in state_vars}
    return SatResult(SatStatus.SAT, point)


def _midpoint(var: StateVar) -> Fraction:
    return (var.lower + var.upper) / 2
