"""Depth-bounded symbolic execution of one program step for a fixed action.

State variables start as their own symbols, parameters and action components
are substituted as constants, and every ``~`` statement introduces a fresh
sampling variable ``_y<k>`` constrained to its support. Exploration is a
depth-first worklist, true branch first, so path conditions come out in a
reproducible order.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import structlog

from .config import get_settings
from .dsl.ast import Assign, Block, If, Program, Sample, Skip, StateVar, Stmt, While
from .errors import InterpreterError
from .expr import LinearTerm, symbolic_eval
from .formula import FALSE, TRUE, Formula, box_formula, compare, conjoin, from_condition, negate
from .solver import SolverConfig, check_sat, eliminate

logger = structlog.get_logger()

SAMPLE_PREFIX = "_y"


def sample_name(index: int) -> str:
    return f"{SAMPLE_PREFIX}{index}"


@dataclass(frozen=True)
class SymState:
    """One frontier entry: what is left to run and what is known on the way there."""

    rest: Tuple[Stmt, ...]
    store: Dict[str, LinearTerm] = field(compare=False)
    sample_index: int = 0
    path_condition: Formula = TRUE
    branch_depth: int = 0
    steps: int = 0


@dataclass(frozen=True)
class PathConditionSet:
    action: int
    pcs: Tuple[Formula, ...]
    complete: bool = True
    sampling_vars: frozenset = frozenset()
    truncated: int = 0

    def __len__(self) -> int:
        return len(self.pcs)


class SymbolicExecutor:
    """Enumerates the path conditions of ``program`` under one concrete action."""

    def __init__(self, program: Program, depth: int, fuel: Optional[int] = None, prune=None):
        if depth < 1:
            raise ValueError("depth must be at least 1")
        self.program = program
        self.depth = depth
        self.fuel = fuel if fuel is not None else get_settings().loop_fuel
        # Optional infeasible-prefix pruning: a callable Formula -> bool (True = keep).
        self.prune = prune

    def initial_store(self, action: int) -> Dict[str, LinearTerm]:
        program = self.program
        store = {name: LinearTerm.constant(value) for name, value in program.params}
        store.update({name: LinearTerm.constant(v) for name, v in program.action_env(action).items()})
        store.update({name: LinearTerm.variable(name) for name in program.state_names})
        store[program.reward_var] = LinearTerm.constant(Fraction(0))
        store[program.done_var] = LinearTerm.constant(Fraction(0))
        return store

    def run(self, action: int) -> PathConditionSet:
        if not 0 <= action < self.program.n_actions:
            raise InterpreterError(f"action index {action} out of range")
        worklist: List[SymState] = [SymState(rest=(self.program.body,), store=self.initial_store(action))]
        pcs: List[Formula] = []
        truncated = 0
        samples = 0

        while worklist:
            state = worklist.pop()
            if not state.rest:
                pcs.append(state.path_condition)
                samples = max(samples, state.sample_index)
                continue
            if state.steps >= self.fuel:
                logger.warning("Path exceeded statement budget", action=action, fuel=self.fuel)
                pcs.append(state.path_condition)
                samples = max(samples, state.sample_index)
                truncated += 1
                continue
            successors = self._step(state)
            if successors is None:
                pcs.append(state.path_condition)
                samples = max(samples, state.sample_index)
                truncated += 1
                continue
            # Reversed so the first successor (the true branch) is popped first.
            worklist.extend(reversed(successors))

        if truncated:
            logger.info("Symbolic execution truncated", action=action, depth=self.depth, paths=truncated)
        return PathConditionSet(
            action=action,
            pcs=tuple(pcs),
            complete=truncated == 0,
            sampling_vars=frozenset(sample_name(i) for i in range(samples)),
            truncated=truncated,
        )

    def _advance(self, state: SymState, rest: Tuple[Stmt, ...], **changes) -> SymState:
        values = dict(
            rest=rest,
            store=state.store,
            sample_index=state.sample_index,
            path_condition=state.path_condition,
            branch_depth=state.branch_depth,
            steps=state.steps + 1,
        )
        values.update(changes)
        return SymState(**values)

    def _step(self, state: SymState) -> Optional[List[SymState]]:
        """Successors of ``state``; ``None`` when the depth bound cuts the path."""
        stmt, rest = state.rest[0], state.rest[1:]

        if isinstance(stmt, Block):
            return [self._advance(state, stmt.stmts + rest, steps=state.steps)]

        if isinstance(stmt, Skip):
            return [self._advance(state, rest)]

        if isinstance(stmt, Assign):
            store = dict(state.store)
            store[stmt.target] = symbolic_eval(stmt.expr, state.store)
            return [self._advance(state, rest, store=store)]

        if isinstance(stmt, Sample):
            return self._sample(state, stmt, rest)

        if isinstance(stmt, If):
            cond = from_condition(stmt.cond, state.store)
            return self._branch(state, cond, (stmt.then,) + rest, (stmt.orelse,) + rest)

        if isinstance(stmt, While):
            cond = from_condition(stmt.cond, state.store)
            return self._branch(state, cond, (stmt.body, stmt) + rest, rest)

        raise InterpreterError(f"Unsupported statement: {type(stmt).__name__}")

    def _sample(self, state: SymState, stmt: Sample, rest: Tuple[Stmt, ...]):
        y = sample_name(state.sample_index)
        y_term = LinearTerm.variable(y)
        args = [symbolic_eval(a, state.store) for a in stmt.args]
        store = dict(state.store)

        if stmt.dist == "uniform":
            support = conjoin([compare(args[0], "<=", y_term), compare(y_term, "<=", args[1])])
            store[stmt.target] = y_term
            return [
                self._advance(
                    state,
                    rest,
                    store=store,
                    sample_index=state.sample_index + 1,
                    path_condition=conjoin([state.path_condition, support]),
                )
            ]

        # bernoulli(p): y ~ uniform(0, 1), outcome 1 when y < p.
        zero, one = LinearTerm.constant(Fraction(0)), LinearTerm.constant(Fraction(1))
        support = conjoin([compare(zero, "<=", y_term), compare(y_term, "<=", one)])
        base = self._advance(
            state,
            rest,
            store=store,
            sample_index=state.sample_index + 1,
            path_condition=conjoin([state.path_condition, support]),
            steps=state.steps,
        )
        hit = dict(store, **{stmt.target: one})
        miss = dict(store, **{stmt.target: zero})
        cond = compare(y_term, "<", args[0])
        return self._branch(base, cond, rest, rest, stores=(hit, miss))

    def _branch(
        self,
        state: SymState,
        cond: Formula,
        then_rest: Tuple[Stmt, ...],
        else_rest: Tuple[Stmt, ...],
        stores=None,
    ) -> Optional[List[SymState]]:
        then_store, else_store = stores or (state.store, state.store)
        if cond == TRUE:
            return [self._advance(state, then_rest, store=then_store)]
        if cond == FALSE:
            return [self._advance(state, else_rest, store=else_store)]
        if state.branch_depth >= self.depth:
            return None

        successors = []
        for guard, rest, store in ((cond, then_rest, then_store), (negate(cond), else_rest, else_store)):
            pc = conjoin([state.path_condition, guard])
            if pc == FALSE or (self.prune is not None and not self.prune(pc)):
                continue
            successors.append(
                self._advance(state, rest, store=store, path_condition=pc, branch_depth=state.branch_depth + 1)
            )
        return successors


def sym_execute(
    program: Program,
    action: int,
    depth: int,
    fuel: Optional[int] = None,
    prune: bool = False,
    cfg: Optional[SolverConfig] = None,
) -> PathConditionSet:
    """``PC^a``: the path conditions of one step of ``program`` under action ``action``.

    With ``prune`` set, prefixes the solver proves empty are cut as soon as
    they appear.
    """
    keep = None
    if prune:

        def keep(pc: Formula) -> bool:
            return not check_sat(pc, cfg).is_unsat

    return SymbolicExecutor(program, depth, fuel, keep).run(action)


def project_and_disjointify(
    pcs: PathConditionSet,
    cfg: Optional[SolverConfig] = None,
    state_vars: Sequence[StateVar] = (),
) -> PathConditionSet:
    """Eliminate sampling variables and restore mutual exclusivity.

    With ``state_vars`` given, path conditions empty inside the state box are
    dropped as well. A projected condition ``h`` that overlaps an earlier
    ``r`` splits ``r`` into ``r and h`` / ``r and not h`` and keeps only the
    part of ``h`` outside every earlier condition.
    """
    cfg = cfg if cfg is not None else SolverConfig.from_settings()
    box = box_formula(state_vars) if state_vars else TRUE

    def nonempty(f: Formula) -> bool:
        if f == FALSE:
            return False
        result = check_sat(conjoin([f, box]), cfg)
        if result.is_unknown:
            logger.warning("Emptiness undecided", policy=cfg.unknown_policy, reason=result.reason)
            return cfg.unknown_policy == "keep_part"
        return result.is_sat

    projected = [eliminate(pc, pcs.sampling_vars, cfg) if pcs.sampling_vars else pc for pc in pcs.pcs]
    if state_vars or pcs.sampling_vars:
        projected = [pc for pc in projected if nonempty(pc)]

    if not pcs.sampling_vars:
        return PathConditionSet(pcs.action, tuple(projected), pcs.complete, frozenset(), pcs.truncated)

    result: List[Formula] = []
    for h in projected:
        remainder = h
        refined: List[Formula] = []
        for r in result:
            inside = conjoin([r, remainder])
            if not nonempty(inside):
                refined.append(r)
                continue
            outside = conjoin([r, negate(remainder)])
            if nonempty(outside):
                refined.extend([inside, outside])
            else:
                refined.append(r)
            remainder = conjoin([remainder, negate(r)])
        if nonempty(remainder):
            refined.append(remainder)
        result = refined

    return PathConditionSet(pcs.action, tuple(result), pcs.complete, frozenset(), pcs.truncated)


