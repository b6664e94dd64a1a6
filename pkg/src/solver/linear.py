"""Exact Fourier–Motzkin elimination over the rationals.

A ``LinearSystem`` is a conjunction of rows ``sum(c_i * x_i) + const rel 0``
with ``rel`` in ``<``, ``<=``, ``==``. Elimination keeps strictness exactly:
combining a strict row with any other row yields a strict row. Equalities are
eliminated by substitution before any pairwise combination.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import structlog

from ..errors import SolverError
from ..expr import LinearTerm
from ..formula import FALSE, Atom, Formula, conjoin, make_atom

logger = structlog.get_logger()


@dataclass(frozen=True)
class Row:
    coeffs: Tuple[Tuple[str, Fraction], ...]
    const: Fraction
    rel: str

    def coefficient(self, var: str) -> Fraction:
        for name, c in self.coeffs:
            if name == var:
                return c
        return Fraction(0)

    def variables(self) -> frozenset:
        return frozenset(name for name, _ in self.coeffs)


def _holds(value: Fraction, rel: str) -> bool:
    if rel == "<":
        return value < 0
    if rel == "<=":
        return value <= 0
    return value == 0


def make_row(coeffs: Mapping[str, Fraction], const: Fraction, rel: str):
    """Canonical row, or a bool when no variable is left."""
    items = sorted((k, Fraction(c)) for k, c in coeffs.items() if c != 0)
    if not items:
        return _holds(Fraction(const), rel)
    lead = items[0][1]
    factor = 1 / lead if rel == "==" else 1 / abs(lead)
    return Row(tuple((k, c * factor) for k, c in items), Fraction(const) * factor, rel)


@dataclass(frozen=True)
class LinearSystem:
    """A conjunction of linear rows with an explicit variable order."""

    variables: Tuple[str, ...]
    rows: Tuple[Row, ...]
    infeasible: bool = False

    @classmethod
    def build(cls, rows: Iterable, variables: Sequence[str] = ()) -> "LinearSystem":
        kept = _simplify(rows)
        names = list(variables)
        for row in kept or ():
            for name, _ in row.coeffs:
                if name not in names:
                    names.append(name)
        if kept is None:
            return cls(tuple(names), (), infeasible=True)
        return cls(tuple(names), tuple(kept))

    @classmethod
    def from_atoms(cls, atoms: Iterable[Atom], variables: Sequence[str] = ()) -> "LinearSystem":
        rows = []
        for atom in atoms:
            if not atom.is_linear:
                raise SolverError("nonlinear atom in a linear system")
            rows.append(make_row(dict(atom.term.coeffs), atom.term.const, atom.rel))
        return cls.build(rows, variables)

    def to_formula(self) -> Formula:
        if self.infeasible:
            return FALSE
        return conjoin(make_atom(LinearTerm.build(dict(r.coeffs), r.const), r.rel) for r in self.rows)


def _simplify(rows: Iterable) -> Optional[List[Row]]:
    """Drop trivially true rows and keep only the tightest of parallel rows; ``None`` if infeasible."""
    tightest: Dict[Tuple, Row] = {}
    equalities: Dict[Tuple, Row] = {}
    for row in rows:
        if row is True:
            continue
        if row is False:
            return None
        if row.rel == "==":
            seen = equalities.get(row.coeffs)
            if seen is not None and seen.const != row.const:
                return None
            equalities[row.coeffs] = row
            continue
        seen = tightest.get(row.coeffs)
        # For ``a.x + c rel 0`` a larger c is tighter; on ties strict wins.
        if seen is None or row.const > seen.const or (row.const == seen.const and row.rel == "<"):
            tightest[row.coeffs] = row
    for coeffs, eq in equalities.items():
        ineq = tightest.get(coeffs)
        if ineq is not None:
            # a.x == -c_eq turns a.x + c rel 0 into c - c_eq rel 0.
            if not _holds(ineq.const - eq.const, ineq.rel):
                return None
            del tightest[coeffs]
    return list(equalities.values()) + list(tightest.values())


def _substitute(row: Row, var: str, coeffs: Mapping[str, Fraction], const: Fraction):
    """Replace ``var`` in ``row`` by ``sum(coeffs) + const``."""
    c = row.coefficient(var)
    if c == 0:
        return row
    merged = {k: v for k, v in row.coeffs if k != var}
    for k, v in coeffs.items():
        merged[k] = merged.get(k, Fraction(0)) + c * v
    return make_row(merged, row.const + c * const, row.rel)


def eliminate_variable(rows: Sequence[Row], var: str) -> Optional[List[Row]]:
    """Project one variable out of a conjunction of rows."""
    for row in rows:
        if row.rel == "==" and row.coefficient(var) != 0:
            c = row.coefficient(var)
            coeffs = {k: -v / c for k, v in row.coeffs if k != var}
            const = -row.const / c
            return _simplify(_substitute(other, var, coeffs, const) for other in rows if other is not row)

    lower, upper, rest = [], [], []
    for row in rows:
        c = row.coefficient(var)
        if c < 0:
            lower.append(row)
        elif c > 0:
            upper.append(row)
        else:
            rest.append(row)

    combined: List = list(rest)
    for lo in lower:
        a_lo = -lo.coefficient(var)
        for up in upper:
            a_up = up.coefficient(var)
            merged: Dict[str, Fraction] = {}
            for k, v in lo.coeffs:
                merged[k] = merged.get(k, Fraction(0)) + a_up * v
            for k, v in up.coeffs:
                merged[k] = merged.get(k, Fraction(0)) + a_lo * v
            merged.pop(var, None)
            rel = "<" if "<" in (lo.rel, up.rel) else "<="
            combined.append(make_row(merged, a_up * lo.const + a_lo * up.const, rel))
    return _simplify(combined)


def _elimination_cost(rows: Sequence[Row], var: str) -> Tuple[int, int]:
    pos = neg = 0
    for row in rows:
        c = row.coefficient(var)
        if c == 0:
            continue
        if row.rel == "==":
            return (0, 0)
        if c > 0:
            pos += 1
        else:
            neg += 1
    return (1, pos * neg - pos - neg)


def _next_variable(rows: Sequence[Row], candidates: Sequence[str]) -> str:
    order = {name: i for i, name in enumerate(candidates)}
    return min(candidates, key=lambda v: (_elimination_cost(rows, v), order[v]))


def project(system: LinearSystem, names: Iterable[str]) -> LinearSystem:
    """Existentially quantify ``names`` out of the system."""
    names = frozenset(names)
    if system.infeasible:
        return system
    rows: Optional[List[Row]] = list(system.rows)
    todo = [v for v in system.variables if v in names]
    while todo and rows is not None:
        var = _next_variable(rows, todo)
        todo.remove(var)
        rows = eliminate_variable(rows, var)
    keep = tuple(v for v in system.variables if v not in names)
    if rows is None:
        return LinearSystem(keep, (), infeasible=True)
    return LinearSystem(keep, tuple(rows))


def _stages(system: LinearSystem) -> Tuple[List[str], List[List[Row]], bool]:
    """Eliminate every variable; return the order and the row set before each step."""
    rows: Optional[List[Row]] = list(system.rows)
    todo = [v for v in system.variables if any(v in r.variables() for r in system.rows)]
    order: List[str] = []
    stages: List[List[Row]] = []
    while todo:
        var = _next_variable(rows, todo)
        todo.remove(var)
        order.append(var)
        stages.append(rows)
        rows = eliminate_variable(rows, var)
        if rows is None:
            return order, stages, False
    return order, stages, True


def is_feasible(system: LinearSystem) -> bool:
    if system.infeasible:
        return False
    return _stages(system)[2]


def _interval(rows: Sequence[Row], var: str, values: Mapping[str, Fraction]):
    """Bounds on ``var`` once every other variable of ``rows`` takes its value."""
    lo: Optional[Tuple[Fraction, bool]] = None
    hi: Optional[Tuple[Fraction, bool]] = None
    for row in rows:
        c = Fraction(0)
        rest = row.const
        for name, v in row.coeffs:
            if name == var:
                c = v
            else:
                rest += v * values.get(name, Fraction(0))
        if c == 0:
            if not _holds(rest, row.rel):
                return None
            continue
        bound = -rest / c
        strict = row.rel == "<"
        if row.rel == "==" or c > 0:
            if hi is None or bound < hi[0] or (bound == hi[0] and strict):
                hi = (bound, strict)
        if row.rel == "==" or c < 0:
            if lo is None or bound > lo[0] or (bound == lo[0] and strict):
                lo = (bound, strict)
    if lo and hi:
        if lo[0] > hi[0] or (lo[0] == hi[0] and (lo[1] or hi[1])):
            return None
    return lo, hi


def _midpoint(lo, hi) -> Fraction:
    if lo and hi:
        return (lo[0] + hi[0]) / 2
    if lo:
        return lo[0] + 1 if lo[1] else lo[0]
    if hi:
        return hi[0] - 1 if hi[1] else hi[0]
    return Fraction(0)


def _integer_candidates(lo, hi, limit: int) -> List[Fraction]:
    first = last = None
    if lo:
        first = math.ceil(lo[0])
        if lo[1] and first == lo[0]:
            first += 1
    if hi:
        last = math.floor(hi[0])
        if hi[1] and last == hi[0]:
            last -= 1
    if first is not None and last is not None and first > last:
        return []
    centre = round(_midpoint(lo, hi))
    if first is not None:
        centre = max(centre, first)
    if last is not None:
        centre = min(centre, last)

    out: List[Fraction] = [Fraction(centre)]
    step = 1
    while len(out) < limit:
        below = centre - step
        above = centre + step
        below_ok = first is None or below >= first
        above_ok = last is None or above <= last
        if not below_ok and not above_ok:
            break
        if below_ok:
            out.append(Fraction(below))
        if above_ok:
            out.append(Fraction(above))
        step += 1
    return out[:limit]


def solve(
    system: LinearSystem,
    integral: Iterable[str] = (),
    candidates: int = 64,
) -> Optional[Dict[str, Fraction]]:
    """A deterministic point of the system, or ``None`` when it is empty.

    Variables are fixed in reverse elimination order at the midpoint of the
    interval left for them. Variables in ``integral`` first try integers
    nearest that midpoint, backtracking within a bounded budget, and fall back
    to the real point when no integer assignment is found.
    """
    if system.infeasible:
        return None
    order, stages, feasible = _stages(system)
    if not feasible:
        return None
    integral = frozenset(integral)

    if integral & set(order):
        budget = [max(candidates, 1) * max(len(order), 1)]
        values: Dict[str, Fraction] = {}
        if _assign(order, stages, len(order) - 1, values, integral, candidates, budget):
            return _complete(system, values)
        logger.debug("Integer witness search gave up", variables=sorted(integral & set(order)))

    values = {}
    if not _assign(order, stages, len(order) - 1, values, frozenset(), candidates, [1]):
        raise SolverError("back-substitution failed on a feasible system")
    return _complete(system, values)


def _complete(system: LinearSystem, values: Dict[str, Fraction]) -> Dict[str, Fraction]:
    return {v: values.get(v, Fraction(0)) for v in system.variables}


def _assign(order, stages, index, values, integral, candidates, budget) -> bool:
    if index < 0:
        return True
    var = order[index]
    bounds = _interval(stages[index], var, values)
    if bounds is None:
        return False
    lo, hi = bounds
    if var in integral:
        for k in _integer_candidates(lo, hi, candidates):
            budget[0] -= 1
            if budget[0] < 0:
                return False
            values[var] = k
            if _assign(order, stages, index - 1, values, integral, candidates, budget):
                return True
        values.pop(var, None)
        return False
    values[var] = _midpoint(lo, hi)
    return _assign(order, stages, index - 1, values, integral, candidates, budget)


def variable_bounds(system: LinearSystem, var: str):
    """``(lo, hi)`` of ``var`` over the system, each ``(value, strict)`` or ``None`` when unbounded."""
    projected = project(system, [v for v in system.variables if v != var])
    if projected.infeasible:
        return None
    return _interval(projected.rows, var, {})
