"""In-process decision procedure.

Formulas are explored as a lazy DNF: a depth-first walk that collects the
literals of one cube at a time and prunes a branch as soon as the literals
gathered so far are infeasible. Linear cubes are decided exactly by
Fourier–Motzkin elimination. Cubes with nonlinear atoms are refuted through a
linear relaxation (every opaque subterm becomes a fresh variable, ``sin`` and
``cos`` bounded by [-1, 1]) and confirmed by deterministic sampling inside the
bounds the relaxation implies; anything else is UNKNOWN.
"""

from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from ..errors import FormulaError, NonlinearError, SolverError
from ..expr import BOUNDED_FUNCTIONS, Call, Expr
from ..formula import (
    And,
    Atom,
    Formula,
    Negation,
    Or,
    Truth,
    disjoin,
    conjoin,
    eval_at,
    format_formula,
    make_atom,
    normalize,
    variables,
)
from .linear import LinearSystem, is_feasible, make_row, project, solve, variable_bounds
from .result import UNSAT, SatResult, SatStatus

logger = structlog.get_logger()

# Half-width used to sample a variable the relaxation leaves unbounded.
FALLBACK_SPAN = Fraction(100)


class CubeLimitExceeded(SolverError):
    pass


class _Counter:
    def __init__(self, limit: int):
        self.limit = limit
        self.count = 0

    def tick(self):
        self.count += 1
        if self.count > self.limit:
            raise CubeLimitExceeded(f"more than {self.limit} cubes explored")


def _relaxation(cube: Sequence[Atom]) -> LinearSystem:
    keys: Dict[Expr, str] = {}
    rows = []

    def fresh(expr: Expr) -> str:
        if expr not in keys:
            name = f"_r{len(keys)}"
            keys[expr] = name
            if isinstance(expr, Call) and expr.func in BOUNDED_FUNCTIONS:
                rows.append(make_row({name: Fraction(1)}, Fraction(-1), "<="))
                rows.append(make_row({name: Fraction(-1)}, Fraction(-1), "<="))
            elif isinstance(expr, Call) and expr.func in ("sqrt", "abs"):
                rows.append(make_row({name: Fraction(-1)}, Fraction(0), "<="))
            elif isinstance(expr, Call) and expr.func == "exp":
                rows.append(make_row({name: Fraction(-1)}, Fraction(0), "<"))
        return keys[expr]

    for atom in cube:
        coeffs: Dict[str, Fraction] = {}
        for key, c in atom.term.coeffs:
            name = key if isinstance(key, str) else fresh(key)
            coeffs[name] = coeffs.get(name, Fraction(0)) + c
        rows.append(make_row(coeffs, atom.term.const, atom.rel))
    return LinearSystem.build(rows)


def _branches(f: Formula) -> Tuple[Formula, ...]:
    if isinstance(f, Or):
        return f.args
    # A disequality ``t != 0`` is ``t < 0 or -t < 0``.
    atom = f.arg
    return (make_atom(atom.term, "<"), make_atom(-atom.term, "<"))


class InternalSolver:
    """Fourier–Motzkin backed satisfiability checker."""

    name = "internal"
    description = "Exact decision procedure for linear rational arithmetic with a sampling fallback for nonlinear atoms."

    def __init__(
        self,
        cube_limit: int = 10_000,
        nonlinear_samples: int = 2_000,
        integer_candidates: int = 64,
        seed: int = 0,
    ):
        self.cube_limit = cube_limit
        self.nonlinear_samples = nonlinear_samples
        self.integer_candidates = integer_candidates
        self.seed = seed

    def cubes(self, f: Formula, counter: Optional[_Counter] = None) -> Iterator[List[Atom]]:
        """Cubes of the DNF of ``f`` whose relaxation is feasible, in depth-first order."""
        counter = counter or _Counter(self.cube_limit)
        yield from self._walk((normalize(f),), (), counter)

    def _walk(self, pending: Tuple[Formula, ...], cube: Tuple[Atom, ...], counter: _Counter):
        todo = list(pending)
        lits = list(cube)
        while todo:
            f = todo.pop()
            if isinstance(f, Truth):
                if not f.value:
                    return
                continue
            if isinstance(f, Atom):
                lits.append(f)
                continue
            if isinstance(f, And):
                todo.extend(reversed(f.args))
                continue
            if isinstance(f, (Or, Negation)):
                counter.tick()
                if not self._feasible(lits):
                    return
                for branch in _branches(f):
                    yield from self._walk(tuple(todo) + (branch,), tuple(lits), counter)
                return
            raise FormulaError(f"not a formula: {f!r}")
        counter.tick()
        if self._feasible(lits):
            yield lits

    def _feasible(self, lits: Sequence[Atom]) -> bool:
        if not lits:
            return True
        system = _relaxation(lits)
        return is_feasible(system)

    def check(self, f: Formula, integral: Iterable[str] = ()) -> SatResult:
        integral = frozenset(integral)
        names = sorted(variables(f))
        unknown = False
        try:
            for cube in self.cubes(f):
                result = self._decide(cube, integral)
                if result.is_sat:
                    model = {v: result.model.get(v, Fraction(0)) for v in names}
                    return SatResult(SatStatus.SAT, model)
                unknown = unknown or result.is_unknown
        except CubeLimitExceeded as e:
            logger.warning("Cube limit reached", limit=self.cube_limit)
            return SatResult(SatStatus.UNKNOWN, reason=str(e))
        if unknown:
            return SatResult(SatStatus.UNKNOWN, reason="nonlinear cube not decided")
        return UNSAT

    def _decide(self, cube: Sequence[Atom], integral: frozenset) -> SatResult:
        if all(atom.is_linear for atom in cube):
            system = LinearSystem.from_atoms(cube)
            model = solve(system, integral, self.integer_candidates)
            return SatResult(SatStatus.SAT, model) if model is not None else UNSAT
        model = self._sample(cube, integral)
        if model is not None:
            return SatResult(SatStatus.SAT, model)
        return SatResult(SatStatus.UNKNOWN, reason="sampling found no model")

    def _sample(self, cube: Sequence[Atom], integral: frozenset) -> Optional[Dict[str, Fraction]]:
        relaxed = _relaxation(cube)
        names = sorted(set().union(*(atom.term.variables() for atom in cube)))

        def satisfies(point: Dict[str, Fraction]) -> bool:
            try:
                return all(eval_at(atom, point) for atom in cube)
            except (FormulaError, ArithmeticError, ValueError):
                return False

        guess = solve(relaxed, integral, self.integer_candidates) or {}
        point = {v: guess.get(v, Fraction(0)) for v in names}
        if satisfies(point):
            return point

        spans = []
        for v in names:
            bounds = variable_bounds(relaxed, v) or (None, None)
            lo, hi = bounds
            centre = point[v]
            low = lo[0] if lo else centre - FALLBACK_SPAN
            high = hi[0] if hi else centre + FALLBACK_SPAN
            spans.append((float(low), float(high)))

        rng = np.random.default_rng(self.seed)
        lows = np.array([s[0] for s in spans])
        highs = np.array([s[1] for s in spans])
        draws = rng.uniform(lows, highs, size=(self.nonlinear_samples, len(names)))
        for row in draws:
            candidate = {}
            for v, value in zip(names, row):
                candidate[v] = Fraction(round(value)) if v in integral else Fraction(float(value))
            if satisfies(candidate):
                return candidate
        return None

    def eliminate(self, f: Formula, names: Iterable[str]) -> Formula:
        """Exact projection of ``f`` onto the variables not in ``names``."""
        names = frozenset(names)
        if not names & variables(f):
            return normalize(f)
        parts: List[Formula] = []
        try:
            for cube in self.cubes(f):
                linear, kept = [], []
                for atom in cube:
                    touches = bool(atom.term.variables() & names)
                    if atom.is_linear:
                        linear.append(atom)
                    elif touches:
                        raise NonlinearError(f"sampling variable occurs nonlinearly in {format_formula(atom)}")
                    else:
                        kept.append(atom)
                projected = project(LinearSystem.from_atoms(linear), names).to_formula()
                parts.append(conjoin([projected] + kept))
        except CubeLimitExceeded as e:
            raise SolverError(f"cannot eliminate sampling variables: {e}") from e
        return disjoin(parts)
