"""Concrete semantics of environment programs."""

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

from ..config import get_settings
from ..errors import EvaluationError, FuelExhaustedError, InterpreterError
from ..expr import evaluate
from .ast import Assign, Block, BoolConst, BoolExpr, BoolOp, Compare, If, Not, Program, Sample, Skip, Stmt, While

COMPARE_OPERATORS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


class RandomSource(Protocol):
    def random(self) -> float: ...


@dataclass(frozen=True)
class StepResult:
    next_state: Tuple[Fraction, ...]
    reward: Fraction
    done: bool
    samples: Tuple[Fraction, ...] = ()  # values drawn for y0, y1, ... in order


def eval_condition(cond: BoolExpr, env: Dict[str, Fraction]) -> bool:
    if isinstance(cond, BoolConst):
        return cond.value
    if isinstance(cond, Compare):
        return COMPARE_OPERATORS[cond.op](evaluate(cond.left, env), evaluate(cond.right, env))
    if isinstance(cond, BoolOp):
        if cond.op == "and":
            return all(eval_condition(a, env) for a in cond.args)
        return any(eval_condition(a, env) for a in cond.args)
    if isinstance(cond, Not):
        return not eval_condition(cond.arg, env)
    raise InterpreterError(f"Unsupported condition: {type(cond).__name__}")


@dataclass
class _Run:
    """Per-call bookkeeping of one step."""

    rng: RandomSource
    remaining: int
    samples: List[Fraction]


class Interpreter:
    """Runs one step of a program on a concrete state and action."""

    def __init__(self, program: Program, fuel: Optional[int] = None):
        self.program = program
        self.fuel = fuel if fuel is not None else get_settings().loop_fuel

    def step(self, state: Sequence[Fraction], action: int, rng: RandomSource) -> StepResult:
        program = self.program
        if not 0 <= action < program.n_actions:
            raise InterpreterError(f"action index {action} out of range")
        if len(state) != program.dimension:
            raise InterpreterError(f"state has {len(state)} components, expected {program.dimension}")

        env: Dict[str, Fraction] = program.param_values()
        env.update(program.action_env(action))
        env.update(program.state_env(tuple(Fraction(v) for v in state)))
        env[program.reward_var] = Fraction(0)
        env[program.done_var] = Fraction(0)

        run = _Run(rng=rng, remaining=self.fuel, samples=[])
        self._exec(program.body, env, run)

        next_state = tuple(env[name] for name in program.state_names)
        return StepResult(
            next_state=next_state,
            reward=env[program.reward_var],
            done=env[program.done_var] != 0,
            samples=tuple(run.samples),
        )

    def _exec(self, stmt: Stmt, env: Dict[str, Fraction], run: _Run):
        if isinstance(stmt, Block):
            for inner in stmt.stmts:
                self._exec(inner, env, run)

        elif isinstance(stmt, Assign):
            try:
                env[stmt.target] = evaluate(stmt.expr, env)
            except EvaluationError as e:
                raise EvaluationError(f"{e} at line {stmt.line}") from e

        elif isinstance(stmt, Sample):
            args = [evaluate(a, env) for a in stmt.args]
            u = Fraction(float(run.rng.random()))
            if stmt.dist == "uniform":
                value = args[0] + u * (args[1] - args[0])
                run.samples.append(value)
                env[stmt.target] = value
            else:
                run.samples.append(u)
                env[stmt.target] = Fraction(1) if u < args[0] else Fraction(0)

        elif isinstance(stmt, If):
            self._exec(stmt.then if eval_condition(stmt.cond, env) else stmt.orelse, env, run)

        elif isinstance(stmt, While):
            while eval_condition(stmt.cond, env):
                run.remaining -= 1
                if run.remaining < 0:
                    raise FuelExhaustedError(f"loop at line {stmt.line} exceeded {self.fuel} iterations")
                self._exec(stmt.body, env, run)

        elif isinstance(stmt, Skip):
            pass

        else:
            raise InterpreterError(f"Unsupported statement: {type(stmt).__name__}")


def concrete_step(
    program: Program,
    state: Sequence[Fraction],
    action: int,
    rng: RandomSource,
    fuel: Optional[int] = None,
) -> StepResult:
    """Run the program body once: ``(state, action) -> (next state, reward, done)``."""
    return Interpreter(program, fuel).step(state, action, rng)
