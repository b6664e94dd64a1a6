"""External backend: one SMT-LIB v2 script per query, piped to a solver process.

Any solver that reads a script on stdin works (``z3 -in``, ``cvc5 --lang
smt2``, ``dreal --in`` ...). The timeout is enforced here, not by the solver:
a process that does not answer in time is killed and the query is UNKNOWN.
"""

import re
import shlex
import subprocess
from fractions import Fraction
from typing import Dict, List, Optional, Union

import structlog
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from ..errors import FormulaError, SolverError, SolverProcessError, SolverReplyError
from ..expr import BinOp, Call, Expr, Neg, Num, Var, to_expr
from ..formula import And, Atom, Formula, Negation, Or, Truth, eval_at, is_linear, variables
from .result import UNSAT, SatResult, SatStatus

logger = structlog.get_logger()

SExpr = Union[str, List["SExpr"]]

TOKEN = re.compile(r'\(|\)|\|[^|]*\||"(?:[^"]|"")*"|[^\s()]+')
RELATIONS = {"<": "<", "<=": "<=", "==": "="}
# Solver errors for symbols outside the solver's theory; the query counts as undecided.
UNSUPPORTED_MARKERS = ("unknown constant", "unknown function", "unsupported")
IGNORED_REPLIES = {"success", "unsupported"}


def quote(name: str) -> str:
    return f"|{name}|"


def number(value: Fraction) -> str:
    value = Fraction(value)
    magnitude = abs(value)
    text = f"{magnitude.numerator}.0"
    if magnitude.denominator != 1:
        text = f"(/ {text} {magnitude.denominator}.0)"
    return f"(- {text})" if value < 0 else text


def term_sexpr(expr: Expr) -> str:
    if isinstance(expr, Num):
        return number(expr.value)
    if isinstance(expr, Var):
        return quote(expr.name)
    if isinstance(expr, Neg):
        return f"(- {term_sexpr(expr.operand)})"
    if isinstance(expr, BinOp):
        return f"({expr.op} {term_sexpr(expr.left)} {term_sexpr(expr.right)})"
    if isinstance(expr, Call):
        arg = term_sexpr(expr.args[0])
        if expr.func == "abs":
            return f"(ite (>= {arg} 0.0) {arg} (- {arg}))"
        if expr.func == "sqrt":
            return f"(^ {arg} 0.5)"
        return f"({expr.func} {arg})"
    raise FormulaError(f"cannot emit {expr!r}")


def formula_sexpr(f: Formula) -> str:
    if isinstance(f, Truth):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        return f"({RELATIONS[f.rel]} {term_sexpr(to_expr(f.term))} 0.0)"
    if isinstance(f, Negation):
        return f"(not {formula_sexpr(f.arg)})"
    if isinstance(f, (And, Or)):
        op = "and" if isinstance(f, And) else "or"
        return f"({op} {' '.join(formula_sexpr(a) for a in f.args)})"
    raise FormulaError(f"not a formula: {f!r}")


def build_script(f: Formula, seed_option: Optional[str] = None) -> str:
    lines = ["(set-option :produce-models true)"]
    if seed_option:
        lines.append(seed_option)
    lines.append(f"(set-logic {'QF_LRA' if is_linear(f) else 'QF_NRA'})")
    for name in sorted(variables(f)):
        lines.append(f"(declare-const {quote(name)} Real)")
    lines.append(f"(assert {formula_sexpr(f)})")
    lines.extend(["(check-sat)", "(get-model)", "(exit)"])
    return "\n".join(lines) + "\n"


def parse_sexprs(text: str) -> List[SExpr]:
    stack: List[List[SExpr]] = [[]]
    for token in TOKEN.findall(text):
        if token == "(":
            stack.append([])
        elif token == ")":
            if len(stack) == 1:
                raise SolverReplyError(f"unbalanced reply: {text[:200]}")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(token)
    if len(stack) != 1:
        raise SolverReplyError(f"unbalanced reply: {text[:200]}")
    return stack[0]


def _value(node: SExpr) -> Fraction:
    if isinstance(node, str):
        return Fraction(node)
    head, *args = node
    if head == "-" and len(args) == 1:
        return -_value(args[0])
    if head == "-":
        return _value(args[0]) - sum((_value(a) for a in args[1:]), Fraction(0))
    if head == "/" and len(args) == 2:
        return _value(args[0]) / _value(args[1])
    if head == "+":
        return sum((_value(a) for a in args), Fraction(0))
    raise ValueError(f"unreadable value {node}")


def _definitions(node: SExpr, out: Dict[str, SExpr]):
    if isinstance(node, str):
        return
    if node and node[0] == "define-fun" and len(node) == 5:
        out[node[1].strip("|")] = node[4]
        return
    for child in node:
        _definitions(child, out)


def parse_reply(text: str) -> SatResult:
    """Status and model of a ``check-sat`` / ``get-model`` transcript."""
    status: Optional[SatStatus] = None
    rest: List[SExpr] = []
    for item in parse_sexprs(text):
        if status is None:
            if isinstance(item, str) and item in IGNORED_REPLIES:
                continue
            if isinstance(item, str) and item in ("sat", "unsat", "unknown"):
                status = SatStatus(item)
                continue
            if isinstance(item, list) and item and item[0] == "error":
                raise SolverReplyError(f"solver error: {' '.join(map(str, item[1:]))}")
            raise SolverReplyError(f"unexpected solver output: {item}")
        rest.append(item)
    if status is None:
        raise SolverReplyError("solver gave no answer")
    if status is not SatStatus.SAT:
        return UNSAT if status is SatStatus.UNSAT else SatResult(SatStatus.UNKNOWN, reason="solver answered unknown")

    raw: Dict[str, SExpr] = {}
    for item in rest:
        _definitions(item, raw)
    try:
        model = {name: _value(value) for name, value in raw.items()}
    except (ValueError, ZeroDivisionError, IndexError):
        return SatResult(SatStatus.SAT, reason="model not representable as rationals")
    return SatResult(SatStatus.SAT, model)


class ExternalSolver:
    """Runs an SMT-LIB v2 solver as a subprocess, one process per query."""

    name = "external"
    description = "Pipes SMT-LIB v2 scripts to an external solver command and reads back status and model."

    def __init__(self, command: str, timeout_ms: int = 10_000, seed_option: Optional[str] = None):
        if not command:
            raise SolverError("no external solver command configured (set SYMPAR_SOLVER)")
        self.command = shlex.split(command)
        self.timeout_ms = timeout_ms
        self.seed_option = seed_option

    @retry(
        retry=retry_if_exception_type((BrokenPipeError, ConnectionResetError, InterruptedError)),
        stop=stop_after_attempt(3),
        wait=wait_exponential(multiplier=0.1, max=1),
        reraise=True,
    )
    def _run(self, script: str) -> subprocess.CompletedProcess:
        return subprocess.run(
            self.command,
            input=script,
            capture_output=True,
            text=True,
            timeout=self.timeout_ms / 1000,
        )

    def check(self, f: Formula) -> SatResult:
        script = build_script(f, self.seed_option)
        try:
            proc = self._run(script)
        except subprocess.TimeoutExpired:
            logger.warning("External solver timed out", timeout_ms=self.timeout_ms)
            return SatResult(SatStatus.UNKNOWN, reason="timeout")
        except OSError as e:
            logger.error("External solver failed to run", command=self.command[0], error=str(e))
            raise SolverProcessError(f"cannot run {self.command[0]}: {e}") from e

        try:
            result = parse_reply(proc.stdout)
        except SolverReplyError as e:
            if not any(marker in str(e) for marker in UNSUPPORTED_MARKERS):
                raise
            logger.warning("External solver rejected a symbol", error=str(e))
            return SatResult(SatStatus.UNKNOWN, reason="unsupported symbol")
        if result.is_sat and result.model is not None:
            model = {name: result.model.get(name, Fraction(0)) for name in variables(f)}
            try:
                verified = eval_at(f, model)
            except FormulaError:
                verified = False
            if not verified:
                logger.debug("External model failed exact re-check")
                return SatResult(SatStatus.SAT, reason="model failed exact re-check")
            return SatResult(SatStatus.SAT, model)
        return result
