"""Parser and validator for ``.env`` environment programs.

Surface syntax (line oriented, blocks closed by ``end``)::

    env navigation
    param W = 10
    state x: real in [0, W]
    actions d, v
    action U = 1, 1
    reward r
    done fin
    body
      if d == 1: y = y + v
      elif d == 2: y = y - v
      end
    end

``#`` starts a comment. Statements are separated by newlines or ``;``.
"""

import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Set, Tuple

import structlog

from ..errors import EvaluationError, ParseError, ProgramValidationError
from ..expr import FUNCTIONS, BinOp, Call, Expr, Neg, Num, Var, evaluate, expr_variables
from .ast import (
    COMPARISONS,
    DISTRIBUTIONS,
    Action,
    Assign,
    Block,
    BoolConst,
    BoolExpr,
    BoolOp,
    Compare,
    If,
    Not,
    Program,
    Sample,
    Skip,
    StateVar,
    Stmt,
    While,
)

logger = structlog.get_logger()

KEYWORDS = frozenset({"body", "end", "if", "elif", "else", "while", "skip", "and", "or", "not", "true", "false"})

TOKEN_SPEC = [
    ("NUMBER", r"\d+\.\d*|\.\d+|\d+"),
    ("IDENT", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("OP", r"<=|>=|==|!=|[<>+\-*/()\[\],:=~;]"),
    ("NEWLINE", r"\n"),
    ("SKIPWS", r"[ \t\r]+"),
    ("COMMENT", r"\#[^\n]*"),
    ("MISMATCH", r"."),
]
TOKEN_RE = re.compile("|".join(f"(?P<{name}>{pattern})" for name, pattern in TOKEN_SPEC))


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    column: int


def tokenize(source: str) -> List[Token]:
    tokens: List[Token] = []
    line, line_start = 1, 0
    for match in TOKEN_RE.finditer(source):
        kind, value = match.lastgroup, match.group()
        column = match.start() - line_start + 1
        if kind == "NEWLINE":
            tokens.append(Token("NEWLINE", value, line, column))
            line += 1
            line_start = match.end()
        elif kind in ("SKIPWS", "COMMENT"):
            continue
        elif kind == "MISMATCH":
            raise ParseError(f"unexpected character {value!r}", line, column)
        else:
            tokens.append(Token(kind, value, line, column))
    tokens.append(Token("EOF", "", line, 1))
    return tokens


class Parser:
    """Recursive-descent parser over the token stream."""

    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.pos = 0

    # -- token helpers -----------------------------------------------------

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def at(self, value: str) -> bool:
        tok = self.current
        return tok.kind in ("OP", "IDENT") and tok.value == value

    def at_separator(self) -> bool:
        return self.current.kind == "NEWLINE" or self.at(";")

    def advance(self) -> Token:
        tok = self.current
        self.pos += 1
        return tok

    def expect(self, value: str) -> Token:
        if not self.at(value):
            self.error(f"expected {value!r}")
        return self.advance()

    def expect_ident(self) -> Token:
        tok = self.current
        if tok.kind != "IDENT" or tok.value in KEYWORDS:
            self.error("expected identifier")
        return self.advance()

    def error(self, message: str):
        tok = self.current
        found = "end of input" if tok.kind == "EOF" else ("newline" if tok.kind == "NEWLINE" else repr(tok.value))
        raise ParseError(f"syntax error: {message}, found {found}", tok.line, tok.column)

    def skip_separators(self):
        while self.at_separator():
            self.advance()

    def end_of_line(self):
        if self.current.kind == "EOF":
            return
        if self.current.kind != "NEWLINE":
            self.error("expected end of line")
        self.skip_separators()

    # -- expressions -------------------------------------------------------

    def expr(self) -> Expr:
        node = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance().value
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.at("*") or self.at("/"):
            op = self.advance().value
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        if self.at("-"):
            self.advance()
            return Neg(self.factor())
        return self.primary()

    def primary(self) -> Expr:
        tok = self.current
        if tok.kind == "NUMBER":
            self.advance()
            return Num(Fraction(tok.value))
        if tok.kind == "IDENT" and tok.value not in KEYWORDS:
            self.advance()
            if self.at("("):
                self.advance()
                args = [self.expr()]
                while self.at(","):
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                return Call(tok.value, tuple(args))
            return Var(tok.value, tok.line, tok.column)
        if self.at("("):
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.error("expected expression")

    # -- boolean expressions -----------------------------------------------

    def bexpr(self) -> BoolExpr:
        args = [self.band()]
        while self.at("or"):
            self.advance()
            args.append(self.band())
        return args[0] if len(args) == 1 else BoolOp("or", tuple(args))

    def band(self) -> BoolExpr:
        args = [self.bnot()]
        while self.at("and"):
            self.advance()
            args.append(self.bnot())
        return args[0] if len(args) == 1 else BoolOp("and", tuple(args))

    def bnot(self) -> BoolExpr:
        if self.at("not"):
            self.advance()
            return Not(self.bnot())
        return self.batom()

    def batom(self) -> BoolExpr:
        if self.at("true"):
            self.advance()
            return BoolConst(True)
        if self.at("false"):
            self.advance()
            return BoolConst(False)
        if self.at("("):
            # Either a parenthesized condition or a comparison whose left side is parenthesized.
            saved = self.pos
            try:
                return self.comparison()
            except ParseError:
                self.pos = saved
            self.advance()
            node = self.bexpr()
            self.expect(")")
            return node
        return self.comparison()

    def comparison(self) -> BoolExpr:
        left = self.expr()
        tok = self.current
        if tok.kind != "OP" or tok.value not in COMPARISONS:
            self.error("expected comparison operator")
        self.advance()
        return Compare(tok.value, left, self.expr())

    # -- statements --------------------------------------------------------

    def block(self, terminators: Tuple[str, ...]) -> Block:
        stmts: List[Stmt] = []
        self.skip_separators()
        while not any(self.at(t) for t in terminators):
            if self.current.kind == "EOF":
                self.error(f"expected {' or '.join(repr(t) for t in terminators)}")
            stmts.append(self.statement())
            if not any(self.at(t) for t in terminators):
                if not self.at_separator():
                    self.error("expected end of statement")
                self.skip_separators()
        return Block(tuple(stmts))

    def statement(self) -> Stmt:
        tok = self.current
        if self.at("skip"):
            self.advance()
            return Skip()
        if self.at("if"):
            self.advance()
            return self.if_rest(tok.line)
        if self.at("while"):
            self.advance()
            cond = self.bexpr()
            self.expect(":")
            body = self.block(("end",))
            self.expect("end")
            return While(cond, body, tok.line)
        target = self.expect_ident()
        if self.at("="):
            self.advance()
            return Assign(target.value, self.expr(), target.line)
        if self.at("~"):
            self.advance()
            dist = self.expect_ident()
            if dist.value not in DISTRIBUTIONS:
                raise ParseError(f"unknown distribution {dist.value}", dist.line, dist.column)
            self.expect("(")
            args = [self.expr()]
            while self.at(","):
                self.advance()
                args.append(self.expr())
            self.expect(")")
            return Sample(target.value, dist.value, tuple(args), target.line)
        self.error("expected '=' or '~'")

    def if_rest(self, line: int) -> If:
        cond = self.bexpr()
        self.expect(":")
        then = self.block(("elif", "else", "end"))
        if self.at("elif"):
            elif_tok = self.advance()
            return If(cond, then, Block((self.if_rest(elif_tok.line),)), line)
        orelse = Block()
        if self.at("else"):
            self.advance()
            self.expect(":")
            orelse = self.block(("end",))
        self.expect("end")
        return If(cond, then, orelse, line)

    # -- program -----------------------------------------------------------

    def program(self) -> "RawProgram":
        raw = RawProgram()
        self.skip_separators()
        while not self.at("body"):
            if self.current.kind == "EOF":
                self.error("expected 'body'")
            self.header(raw)
            self.end_of_line()
        self.advance()
        raw.body = self.block(("end",))
        self.expect("end")
        self.skip_separators()
        if self.current.kind != "EOF":
            self.error("expected end of input after program body")
        return raw

    def header(self, raw: "RawProgram"):
        tok = self.expect_ident()
        directive = tok.value
        if directive == "env":
            raw.name = self.expect_ident().value
        elif directive == "param":
            name = self.expect_ident()
            self.expect("=")
            raw.params.append((name.value, self.expr(), name.line))
        elif directive == "state":
            name = self.expect_ident()
            self.expect(":")
            kind = self.expect_ident()
            if kind.value not in ("real", "int"):
                raise ParseError(f"unknown state type {kind.value}", kind.line, kind.column)
            self.expect("in")
            self.expect("[")
            lower = self.expr()
            self.expect(",")
            upper = self.expr()
            self.expect("]")
            raw.states.append((name.value, lower, upper, kind.value == "int", name.line))
        elif directive == "actions":
            names = [self.expect_ident().value]
            while self.at(","):
                self.advance()
                names.append(self.expect_ident().value)
            raw.components.extend(names)
        elif directive == "action":
            name = self.expect_ident()
            values = []
            if self.at("="):
                self.advance()
                values.append(self.expr())
                while self.at(","):
                    self.advance()
                    values.append(self.expr())
            raw.actions.append((name.value, tuple(values), name.line))
        elif directive == "reward":
            raw.reward_var = self.expect_ident().value
        elif directive == "done":
            raw.done_var = self.expect_ident().value
        else:
            raise ParseError(f"unknown directive {directive}", tok.line, tok.column)


class RawProgram:
    """Header declarations as parsed, before constant evaluation and validation."""

    def __init__(self):
        self.name = "program"
        self.params: List[Tuple[str, Expr, int]] = []
        self.states: List[Tuple[str, Expr, Expr, bool, int]] = []
        self.components: List[str] = []
        self.actions: List[Tuple[str, Tuple[Expr, ...], int]] = []
        self.reward_var = "reward"
        self.done_var = "done"
        self.body = Block()


def _constant(expr: Expr, params: Mapping[str, Fraction], line: int, what: str) -> Fraction:
    for name in sorted(expr_variables(expr)):
        if name not in params:
            raise ProgramValidationError(f"{what} uses non-constant {name}", line)
    try:
        return evaluate(expr, params)
    except EvaluationError as e:
        raise ProgramValidationError(f"{what}: {e}", line) from e


class Validator:
    """Checks scoping and declaration invariants of a raw program."""

    def __init__(self, raw: RawProgram, overrides: Optional[Mapping[str, Fraction]] = None):
        self.raw = raw
        self.overrides = {k: Fraction(v) for k, v in (overrides or {}).items()}

    def declare(self, seen: Set[str], name: str, line: int):
        if name.startswith("_"):
            raise ProgramValidationError(f"identifier {name} is reserved (leading underscore)", line)
        if name in seen:
            raise ProgramValidationError(f"duplicate declaration of {name}", line)
        seen.add(name)

    def build(self) -> Program:
        raw = self.raw
        seen: Set[str] = set()

        params: Dict[str, Fraction] = {}
        for name, expr, line in raw.params:
            self.declare(seen, name, line)
            if name in self.overrides:
                params[name] = self.overrides[name]
            else:
                params[name] = _constant(expr, params, line, f"param {name}")
        unknown = set(self.overrides) - set(params)
        if unknown:
            raise ProgramValidationError(f"override of undeclared param {', '.join(sorted(unknown))}")

        state_vars = []
        for name, lower, upper, discrete, line in raw.states:
            self.declare(seen, name, line)
            lo = _constant(lower, params, line, f"lower bound of {name}")
            hi = _constant(upper, params, line, f"upper bound of {name}")
            if not lo < hi:
                raise ProgramValidationError(f"degenerate bounds [{lo}, {hi}] for {name}", line)
            state_vars.append(StateVar(name, lo, hi, discrete))
        if not state_vars:
            raise ProgramValidationError("program declares no state variables")

        for name in raw.components:
            self.declare(seen, name, None)

        if not raw.actions:
            raise ProgramValidationError("program declares no actions")
        actions = []
        action_names: Set[str] = set()
        for name, values, line in raw.actions:
            if name in action_names:
                raise ProgramValidationError(f"duplicate action {name}", line)
            action_names.add(name)
            if len(values) != len(raw.components):
                raise ProgramValidationError(
                    f"action arity mismatch: {name} has {len(values)} components, expected {len(raw.components)}",
                    line,
                )
            actions.append(Action(name, tuple(_constant(v, params, line, f"action {name}") for v in values)))

        for output in (raw.reward_var, raw.done_var):
            if output in params or output in raw.components:
                raise ProgramValidationError(f"output {output} clashes with a constant")
            if output.startswith("_"):
                raise ProgramValidationError(f"identifier {output} is reserved (leading underscore)")
        if raw.reward_var == raw.done_var:
            raise ProgramValidationError("reward and done must be distinct variables")

        self.constants = set(params) | set(raw.components)
        self.params = params
        defined = set(self.constants) | {v.name for v in state_vars} | {raw.reward_var, raw.done_var}
        self.walk(raw.body, defined)

        return Program(
            name=raw.name,
            state_vars=tuple(state_vars),
            action_components=tuple(raw.components),
            actions=tuple(actions),
            params=tuple(params.items()),
            body=raw.body,
            reward_var=raw.reward_var,
            done_var=raw.done_var,
        )

    def check_expr(self, expr: Expr, defined: Set[str], line: int):
        if isinstance(expr, Var):
            if expr.name not in defined:
                raise ProgramValidationError(f"unbound variable {expr.name}", expr.line or line, expr.column or None)
        elif isinstance(expr, BinOp):
            self.check_expr(expr.left, defined, line)
            self.check_expr(expr.right, defined, line)
        elif isinstance(expr, Neg):
            self.check_expr(expr.operand, defined, line)
        elif isinstance(expr, Call):
            if expr.func not in FUNCTIONS:
                raise ProgramValidationError(f"unknown function {expr.func}", line)
            if len(expr.args) != 1:
                raise ProgramValidationError(f"{expr.func} expects one argument", line)
            for arg in expr.args:
                self.check_expr(arg, defined, line)

    def check_cond(self, cond: BoolExpr, defined: Set[str], line: int):
        if isinstance(cond, Compare):
            self.check_expr(cond.left, defined, line)
            self.check_expr(cond.right, defined, line)
        elif isinstance(cond, BoolOp):
            for arg in cond.args:
                self.check_cond(arg, defined, line)
        elif isinstance(cond, Not):
            self.check_cond(cond.arg, defined, line)

    def check_target(self, target: str, line: int):
        if target in self.constants:
            raise ProgramValidationError(f"cannot assign to constant {target}", line)
        if target.startswith("_"):
            raise ProgramValidationError(f"identifier {target} is reserved (leading underscore)", line)

    def walk(self, stmt: Stmt, defined: Set[str]) -> Set[str]:
        """Definite-assignment analysis; returns the names assigned on every path."""
        if isinstance(stmt, Block):
            for inner in stmt.stmts:
                defined = self.walk(inner, defined)
            return defined
        if isinstance(stmt, Assign):
            self.check_target(stmt.target, stmt.line)
            self.check_expr(stmt.expr, defined, stmt.line)
            return defined | {stmt.target}
        if isinstance(stmt, Sample):
            self.check_target(stmt.target, stmt.line)
            values = [_constant(a, self.params, stmt.line, f"{stmt.dist} argument") for a in stmt.args]
            if stmt.dist == "uniform":
                if len(values) != 2 or not values[0] < values[1]:
                    raise ProgramValidationError("uniform(alpha, beta) needs alpha < beta", stmt.line)
            elif len(values) != 1 or not 0 <= values[0] <= 1:
                raise ProgramValidationError("bernoulli(p) needs 0 <= p <= 1", stmt.line)
            return defined | {stmt.target}
        if isinstance(stmt, If):
            self.check_cond(stmt.cond, defined, stmt.line)
            return self.walk(stmt.then, defined) & self.walk(stmt.orelse, defined)
        if isinstance(stmt, While):
            self.check_cond(stmt.cond, defined, stmt.line)
            self.walk(stmt.body, defined)
            return defined
        return defined


def parse(source: str, overrides: Optional[Mapping[str, Fraction]] = None) -> Program:
    """Parse and validate an environment program."""
    raw = Parser(source).program()
    program = Validator(raw, overrides).build()
    logger.debug(
        "Program parsed",
        name=program.name,
        state_vars=len(program.state_vars),
        actions=program.n_actions,
    )
    return program


def parse_file(path, overrides: Optional[Mapping[str, Fraction]] = None) -> Program:
    return parse(Path(path).read_text(encoding="utf-8"), overrides)


def parse_condition(text: str) -> BoolExpr:
    """Parse a standalone boolean condition (the formula text syntax)."""
    parser = Parser(text)
    parser.skip_separators()
    cond = parser.bexpr()
    parser.skip_separators()
    if parser.current.kind != "EOF":
        parser.error("expected end of condition")
    return cond
