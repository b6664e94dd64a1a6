"""Arithmetic expressions over exact rationals.

Expressions come from three places: the bodies of environment programs, the
symbolic store during symbolic execution, and the opaque (nonlinear) keys of
linear terms. Evaluation is exact in ``Fraction`` except for transcendental
functions, which go through ``math`` and are converted back exactly from the
resulting float.
"""

import math
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Mapping, Optional, Tuple, Union

from .errors import EvaluationError

ARITH_OPERATORS: Dict[str, Callable[[Fraction, Fraction], Fraction]] = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "/": operator.truediv,
}

FUNCTIONS: Dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "sqrt": math.sqrt,
    "abs": abs,
}

# Functions whose range is known to lie in [-1, 1]; used by the linear relaxation.
BOUNDED_FUNCTIONS = frozenset({"sin", "cos"})

PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


class Expr:
    """Base class of arithmetic expression nodes."""


@dataclass(frozen=True)
class Num(Expr):
    value: Fraction


@dataclass(frozen=True)
class Var(Expr):
    name: str
    line: int = field(default=0, compare=False, repr=False)
    column: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: Tuple[Expr, ...]


def apply_function(func: str, value: Fraction) -> Fraction:
    """Apply a named function to an exact value."""
    if func == "abs":
        return abs(value)
    if func not in FUNCTIONS:
        raise EvaluationError(f"Unsupported function: {func}")
    try:
        return Fraction(FUNCTIONS[func](float(value)))
    except (ValueError, OverflowError) as e:
        raise EvaluationError(f"{func}({value}) is undefined: {e}") from e


def evaluate(expr: Expr, env: Mapping[str, Fraction]) -> Fraction:
    """Evaluate an expression in a concrete environment."""
    if isinstance(expr, Num):
        return expr.value

    elif isinstance(expr, Var):
        try:
            return env[expr.name]
        except KeyError:
            raise EvaluationError(f"unbound variable {expr.name}") from None

    elif isinstance(expr, BinOp):
        left = evaluate(expr.left, env)
        right = evaluate(expr.right, env)
        if expr.op == "/" and right == 0:
            raise EvaluationError("division by zero")
        return ARITH_OPERATORS[expr.op](left, right)

    elif isinstance(expr, Neg):
        return -evaluate(expr.operand, env)

    elif isinstance(expr, Call):
        if len(expr.args) != 1:
            raise EvaluationError(f"{expr.func} expects one argument")
        return apply_function(expr.func, evaluate(expr.args[0], env))

    raise EvaluationError(f"Unsupported expression: {type(expr).__name__}")


def expr_variables(expr: Expr) -> frozenset:
    if isinstance(expr, Var):
        return frozenset({expr.name})
    if isinstance(expr, BinOp):
        return expr_variables(expr.left) | expr_variables(expr.right)
    if isinstance(expr, Neg):
        return expr_variables(expr.operand)
    if isinstance(expr, Call):
        names = frozenset()
        for arg in expr.args:
            names |= expr_variables(arg)
        return names
    return frozenset()


def format_number(value: Fraction) -> str:
    """Render a rational as a decimal literal when it has one, else as ``n/d``."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{value.numerator}/{value.denominator}"
    digits = max(twos, fives)
    scaled = abs(value.numerator) * (10 ** digits) // value.denominator
    text = str(scaled).rjust(digits + 1, "0")
    sign = "-" if value < 0 else ""
    return f"{sign}{text[:-digits]}.{text[-digits:]}"


def _number_text(value: Fraction) -> Tuple[str, int]:
    text = format_number(value)
    if "/" in text:
        return f"({text})", 4
    if value < 0:
        return text, 3
    return text, 4


def _format(expr: Expr) -> Tuple[str, int]:
    if isinstance(expr, Num):
        return _number_text(expr.value)
    if isinstance(expr, Var):
        return expr.name, 4
    if isinstance(expr, Call):
        return f"{expr.func}({', '.join(format_expr(a) for a in expr.args)})", 4
    if isinstance(expr, Neg):
        text, prec = _format(expr.operand)
        if prec < 3:
            text = f"({text})"
        return f"-{text}", 3
    if isinstance(expr, BinOp):
        prec = PRECEDENCE[expr.op]
        left, left_prec = _format(expr.left)
        right, right_prec = _format(expr.right)
        if left_prec < prec:
            left = f"({left})"
        if right_prec <= prec:
            right = f"({right})"
        return f"{left} {expr.op} {right}", prec
    raise TypeError(f"not an expression: {expr!r}")


def format_expr(expr: Expr) -> str:
    """Render an expression in the surface syntax, with minimal parentheses."""
    return _format(expr)[0]


Key = Union[str, Expr]


def _key_order(key: Key) -> Tuple[int, str]:
    return (0, key) if isinstance(key, str) else (1, format_expr(key))


@dataclass(frozen=True)
class LinearTerm:
    """``sum(coeff * key) + const`` where a key is a variable or an opaque nonlinear expression."""

    coeffs: Tuple[Tuple[Key, Fraction], ...] = ()
    const: Fraction = Fraction(0)

    @classmethod
    def build(cls, coeffs: Mapping[Key, Fraction], const: Fraction = Fraction(0)) -> "LinearTerm":
        items = [(k, Fraction(c)) for k, c in coeffs.items() if c != 0]
        items.sort(key=lambda item: _key_order(item[0]))
        return cls(tuple(items), Fraction(const))

    @classmethod
    def constant(cls, value: Fraction) -> "LinearTerm":
        return cls((), Fraction(value))

    @classmethod
    def variable(cls, name: str) -> "LinearTerm":
        return cls(((name, Fraction(1)),), Fraction(0))

    @classmethod
    def opaque(cls, expr: Expr) -> "LinearTerm":
        return cls(((expr, Fraction(1)),), Fraction(0))

    def as_dict(self) -> Dict[Key, Fraction]:
        return dict(self.coeffs)

    @property
    def is_constant(self) -> bool:
        return not self.coeffs

    @property
    def is_linear(self) -> bool:
        return all(isinstance(k, str) for k, _ in self.coeffs)

    def keys(self) -> Tuple[Key, ...]:
        return tuple(k for k, _ in self.coeffs)

    def variables(self) -> frozenset:
        names = frozenset()
        for key, _ in self.coeffs:
            names |= frozenset({key}) if isinstance(key, str) else expr_variables(key)
        return names

    def coefficient(self, key: Key) -> Fraction:
        for k, c in self.coeffs:
            if k == key:
                return c
        return Fraction(0)

    def __add__(self, other: "LinearTerm") -> "LinearTerm":
        merged = self.as_dict()
        for k, c in other.coeffs:
            merged[k] = merged.get(k, Fraction(0)) + c
        return LinearTerm.build(merged, self.const + other.const)

    def __neg__(self) -> "LinearTerm":
        return LinearTerm(tuple((k, -c) for k, c in self.coeffs), -self.const)

    def __sub__(self, other: "LinearTerm") -> "LinearTerm":
        return self + (-other)

    def scale(self, factor: Fraction) -> "LinearTerm":
        if factor == 0:
            return LinearTerm.constant(Fraction(0))
        return LinearTerm(tuple((k, c * factor) for k, c in self.coeffs), self.const * factor)

    def evaluate(self, env: Mapping[str, Fraction]) -> Fraction:
        total = self.const
        for key, coeff in self.coeffs:
            if isinstance(key, str):
                try:
                    total += coeff * env[key]
                except KeyError:
                    raise EvaluationError(f"unbound variable {key}") from None
            else:
                total += coeff * evaluate(key, env)
        return total


def to_expr(term: LinearTerm) -> Expr:
    """Rebuild an expression tree from a linear term."""
    result: Optional[Expr] = None
    for key, coeff in term.coeffs:
        base = Var(key) if isinstance(key, str) else key
        magnitude = abs(coeff)
        piece = base if magnitude == 1 else BinOp("*", Num(magnitude), base)
        if result is None:
            result = piece if coeff > 0 else Neg(piece)
        else:
            result = BinOp("+" if coeff > 0 else "-", result, piece)
    if result is None:
        return Num(term.const) if term.const >= 0 else Neg(Num(-term.const))
    if term.const > 0:
        result = BinOp("+", result, Num(term.const))
    elif term.const < 0:
        result = BinOp("-", result, Num(-term.const))
    return result


def symbolic_eval(expr: Expr, store: Optional[Mapping[str, LinearTerm]] = None) -> LinearTerm:
    """Evaluate an expression over a symbolic store (identity store when ``None``)."""
    if isinstance(expr, Num):
        return LinearTerm.constant(expr.value)

    elif isinstance(expr, Var):
        if store is None:
            return LinearTerm.variable(expr.name)
        try:
            return store[expr.name]
        except KeyError:
            raise EvaluationError(f"unbound variable {expr.name}") from None

    elif isinstance(expr, Neg):
        return -symbolic_eval(expr.operand, store)

    elif isinstance(expr, BinOp):
        left = symbolic_eval(expr.left, store)
        right = symbolic_eval(expr.right, store)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            if left.is_constant:
                return right.scale(left.const)
            if right.is_constant:
                return left.scale(right.const)
            factors = sorted((to_expr(left), to_expr(right)), key=format_expr)
            return LinearTerm.opaque(BinOp("*", factors[0], factors[1]))
        if expr.op == "/":
            if right.is_constant:
                if right.const == 0:
                    raise EvaluationError("division by zero")
                return left.scale(1 / right.const)
            return LinearTerm.opaque(BinOp("/", to_expr(left), to_expr(right)))
        raise EvaluationError(f"Unsupported operator: {expr.op}")

    elif isinstance(expr, Call):
        args = [symbolic_eval(a, store) for a in expr.args]
        if len(args) != 1:
            raise EvaluationError(f"{expr.func} expects one argument")
        if args[0].is_constant:
            return LinearTerm.constant(apply_function(expr.func, args[0].const))
        return LinearTerm.opaque(Call(expr.func, (to_expr(args[0]),)))

    raise EvaluationError(f"Unsupported expression: {type(expr).__name__}")
