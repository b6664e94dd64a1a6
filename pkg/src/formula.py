"""Quantifier-free arithmetic constraints: path conditions and part descriptors.

Canonical form, produced by every constructor below:

* atoms are ``term rel 0`` with ``rel`` in ``<``, ``<=``, ``==``; the first key
  of the term has coefficient magnitude 1 (exactly 1 for equalities);
* negation is pushed to the atoms: ``not (t < 0)`` becomes ``-t <= 0`` and
  ``not (t <= 0)`` becomes ``-t < 0``; a negated equality stays a ``Negation``
  of the atom, so strictness is never widened and ``not not (t == 0)`` is
  ``t == 0`` again;
* conjunctions and disjunctions are flattened, deduplicated in first-seen
  order, and absorb ``true`` / ``false``.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Tuple

from .dsl.ast import BoolConst, BoolExpr, BoolOp, Compare, Not, StateVar
from .errors import EvaluationError, FormulaError
from .expr import LinearTerm, format_expr, symbolic_eval, to_expr

RELATIONS = ("<", "<=", "==")


class Formula:
    """Base class of formula nodes."""


@dataclass(frozen=True)
class Truth(Formula):
    value: bool


TRUE = Truth(True)
FALSE = Truth(False)


@dataclass(frozen=True)
class Atom(Formula):
    term: LinearTerm
    rel: str

    @property
    def is_linear(self) -> bool:
        return self.term.is_linear


@dataclass(frozen=True)
class Negation(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    args: Tuple[Formula, ...]


@dataclass(frozen=True)
class Or(Formula):
    args: Tuple[Formula, ...]


def _holds(value: Fraction, rel: str) -> bool:
    if rel == "<":
        return value < 0
    if rel == "<=":
        return value <= 0
    return value == 0


def make_atom(term: LinearTerm, rel: str) -> Formula:
    """Canonical atom ``term rel 0``; variable-free atoms fold to a truth value."""
    if rel not in RELATIONS:
        raise FormulaError(f"unknown relation {rel}")
    if term.is_constant:
        return TRUE if _holds(term.const, rel) else FALSE
    lead = term.coeffs[0][1]
    factor = 1 / lead if rel == "==" else 1 / abs(lead)
    return Atom(term.scale(factor), rel)


def compare(left: LinearTerm, op: str, right: LinearTerm) -> Formula:
    """Atom for ``left op right`` with ``op`` any surface comparison."""
    if op == "<":
        return make_atom(left - right, "<")
    if op == "<=":
        return make_atom(left - right, "<=")
    if op == ">":
        return make_atom(right - left, "<")
    if op == ">=":
        return make_atom(right - left, "<=")
    if op == "==":
        return make_atom(left - right, "==")
    if op == "!=":
        return negate(make_atom(left - right, "=="))
    raise FormulaError(f"unknown comparison {op}")


def _flatten(fs: Iterable[Formula], kind: type, unit: Truth, zero: Truth) -> Formula:
    seen = {}
    for f in fs:
        f = normalize(f)
        if f == zero:
            return zero
        if f == unit:
            continue
        for arg in (f.args if isinstance(f, kind) else (f,)):
            seen.setdefault(arg, None)
    args = tuple(seen)
    if not args:
        return unit
    if len(args) == 1:
        return args[0]
    return kind(args)


def conjoin(fs: Iterable[Formula]) -> Formula:
    return _flatten(fs, And, TRUE, FALSE)


def disjoin(fs: Iterable[Formula]) -> Formula:
    return _flatten(fs, Or, FALSE, TRUE)


def negate(f: Formula) -> Formula:
    if isinstance(f, Truth):
        return FALSE if f.value else TRUE
    if isinstance(f, Atom):
        if f.rel == "<":
            return make_atom(-f.term, "<=")
        if f.rel == "<=":
            return make_atom(-f.term, "<")
        atom = make_atom(f.term, "==")
        return Negation(atom) if isinstance(atom, Atom) else negate(atom)
    if isinstance(f, Negation):
        return normalize(f.arg)
    if isinstance(f, And):
        return disjoin(negate(a) for a in f.args)
    if isinstance(f, Or):
        return conjoin(negate(a) for a in f.args)
    raise FormulaError(f"not a formula: {f!r}")


def normalize(f: Formula) -> Formula:
    if isinstance(f, Truth):
        return f
    if isinstance(f, Atom):
        return make_atom(f.term, f.rel)
    if isinstance(f, Negation):
        return negate(normalize(f.arg))
    if isinstance(f, And):
        return conjoin(f.args)
    if isinstance(f, Or):
        return disjoin(f.args)
    raise FormulaError(f"not a formula: {f!r}")


def eval_at(f: Formula, point: Mapping[str, Fraction]) -> bool:
    """Exact truth value of ``f`` at a point."""
    if isinstance(f, Truth):
        return f.value
    if isinstance(f, Atom):
        try:
            return _holds(f.term.evaluate(point), f.rel)
        except EvaluationError as e:
            raise FormulaError(f"cannot evaluate {format_formula(f)}: {e}") from e
    if isinstance(f, Negation):
        return not eval_at(f.arg, point)
    if isinstance(f, And):
        return all(eval_at(a, point) for a in f.args)
    if isinstance(f, Or):
        return any(eval_at(a, point) for a in f.args)
    raise FormulaError(f"not a formula: {f!r}")


def atoms(f: Formula) -> Iterator[Atom]:
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, Negation):
        yield from atoms(f.arg)
    elif isinstance(f, (And, Or)):
        for arg in f.args:
            yield from atoms(arg)


def variables(f: Formula) -> frozenset:
    names = frozenset()
    for atom in atoms(f):
        names |= atom.term.variables()
    return names


def is_linear(f: Formula) -> bool:
    return all(atom.is_linear for atom in atoms(f))


def from_condition(cond: BoolExpr, store: Optional[Mapping[str, LinearTerm]] = None) -> Formula:
    """Translate a program condition under a symbolic store (``sigma b``)."""
    if isinstance(cond, BoolConst):
        return TRUE if cond.value else FALSE
    if isinstance(cond, Compare):
        return compare(symbolic_eval(cond.left, store), cond.op, symbolic_eval(cond.right, store))
    if isinstance(cond, BoolOp):
        parts = [from_condition(a, store) for a in cond.args]
        return conjoin(parts) if cond.op == "and" else disjoin(parts)
    if isinstance(cond, Not):
        return negate(from_condition(cond.arg, store))
    raise FormulaError(f"not a condition: {cond!r}")


def box_formula(state_vars: Sequence[StateVar]) -> Formula:
    """``lower <= v <= upper`` for every state variable."""
    parts = []
    for var in state_vars:
        v = LinearTerm.variable(var.name)
        parts.append(compare(LinearTerm.constant(var.lower), "<=", v))
        parts.append(compare(v, "<=", LinearTerm.constant(var.upper)))
    return conjoin(parts)


def _format_atom(atom: Atom, negated: bool = False) -> str:
    term, rel = atom.term, atom.rel
    ops = {"<": "<", "<=": "<=", "==": "=="}
    if rel != "==" and term.coeffs[0][1] < 0:
        term = -term
        ops = {"<": ">", "<=": ">="}
    op = "!=" if negated else ops[rel]
    lhs = to_expr(LinearTerm(term.coeffs))
    rhs = to_expr(LinearTerm.constant(-term.const))
    return f"{format_expr(lhs)} {op} {format_expr(rhs)}"


def _format(f: Formula) -> Tuple[str, int]:
    if isinstance(f, Truth):
        return ("true" if f.value else "false"), 4
    if isinstance(f, Atom):
        return _format_atom(f), 4
    if isinstance(f, Negation):
        if isinstance(f.arg, Atom) and f.arg.rel == "==":
            return _format_atom(f.arg, negated=True), 4
        text, prec = _format(f.arg)
        return f"not ({text})" if prec < 4 else f"not {text}", 3
    if isinstance(f, (And, Or)):
        op, prec = ("and", 2) if isinstance(f, And) else ("or", 1)
        parts = []
        for arg in f.args:
            text, arg_prec = _format(arg)
            parts.append(f"({text})" if arg_prec <= prec else text)
        return f" {op} ".join(parts), prec
    raise FormulaError(f"not a formula: {f!r}")


def format_formula(f: Formula) -> str:
    """Textual form, in the condition syntax of environment programs."""
    return _format(f)[0]


def parse_formula(text: str) -> Formula:
    from .dsl.parser import parse_condition

    return from_condition(parse_condition(text))
