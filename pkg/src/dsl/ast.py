"""Typed AST of environment programs.

Statements and boolean expressions mirror the productions of the minimal
probabilistic language; arithmetic expressions live in ``src.expr``. All nodes
are frozen, so a validated ``Program`` can be shared freely between threads.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Tuple

from ..expr import Expr

COMPARISONS = ("<", "<=", ">", ">=", "==", "!=")
DISTRIBUTIONS = ("uniform", "bernoulli")


class BoolExpr:
    """Base class of boolean expression nodes."""


@dataclass(frozen=True)
class BoolConst(BoolExpr):
    value: bool


@dataclass(frozen=True)
class Compare(BoolExpr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class BoolOp(BoolExpr):
    op: str  # "and" | "or"
    args: Tuple[BoolExpr, ...]


@dataclass(frozen=True)
class Not(BoolExpr):
    arg: BoolExpr


class Stmt:
    """Base class of statement nodes."""


@dataclass(frozen=True)
class Block(Stmt):
    stmts: Tuple[Stmt, ...] = ()


@dataclass(frozen=True)
class Assign(Stmt):
    target: str
    expr: Expr
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Sample(Stmt):
    """``target ~ dist(args)``."""

    target: str
    dist: str
    args: Tuple[Expr, ...]
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class If(Stmt):
    cond: BoolExpr
    then: Block
    orelse: Block = Block()
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class While(Stmt):
    cond: BoolExpr
    body: Block
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Skip(Stmt):
    pass


@dataclass(frozen=True)
class StateVar:
    name: str
    lower: Fraction
    upper: Fraction
    discrete: bool = False


@dataclass(frozen=True)
class Action:
    name: str
    values: Tuple[Fraction, ...]


@dataclass(frozen=True)
class Program:
    name: str
    state_vars: Tuple[StateVar, ...]
    action_components: Tuple[str, ...]
    actions: Tuple[Action, ...]
    params: Tuple[Tuple[str, Fraction], ...]
    body: Block
    reward_var: str = "reward"
    done_var: str = "done"

    @property
    def state_names(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.state_vars)

    @property
    def dimension(self) -> int:
        return len(self.state_vars)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def integral_vars(self) -> frozenset:
        return frozenset(v.name for v in self.state_vars if v.discrete)

    def param_values(self) -> Dict[str, Fraction]:
        return dict(self.params)

    def action_env(self, index: int) -> Dict[str, Fraction]:
        """Action components of action ``index`` as a name -> value map."""
        return dict(zip(self.action_components, self.actions[index].values))

    def contains(self, state: Tuple[Fraction, ...]) -> bool:
        """Whether a concrete state lies inside the declared state box."""
        if len(state) != len(self.state_vars):
            return False
        for value, var in zip(state, self.state_vars):
            if not var.lower <= value <= var.upper:
                return False
        return True

    def state_env(self, state: Tuple[Fraction, ...]) -> Dict[str, Fraction]:
        return dict(zip(self.state_names, state))
