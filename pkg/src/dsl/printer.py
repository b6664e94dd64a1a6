"""Canonical surface syntax for programs and conditions.

``parse(print_program(p)) == p`` holds for every validated program.
"""

from typing import List, Tuple

from ..expr import format_expr, format_number
from .ast import Assign, Block, BoolConst, BoolExpr, BoolOp, Compare, If, Not, Program, Sample, Skip, Stmt, While

INDENT = "  "
BOOL_PRECEDENCE = {"or": 1, "and": 2}


def _format_cond(cond: BoolExpr) -> Tuple[str, int]:
    if isinstance(cond, BoolConst):
        return ("true" if cond.value else "false"), 4
    if isinstance(cond, Compare):
        return f"{format_expr(cond.left)} {cond.op} {format_expr(cond.right)}", 4
    if isinstance(cond, Not):
        text, prec = _format_cond(cond.arg)
        if prec < 3:
            text = f"({text})"
        return f"not {text}", 3
    if isinstance(cond, BoolOp):
        prec = BOOL_PRECEDENCE[cond.op]
        parts = []
        for arg in cond.args:
            text, arg_prec = _format_cond(arg)
            parts.append(f"({text})" if arg_prec <= prec else text)
        return f" {cond.op} ".join(parts), prec
    raise TypeError(f"not a condition: {cond!r}")


def format_condition(cond: BoolExpr) -> str:
    return _format_cond(cond)[0]


def _emit_block(block: Block, depth: int, out: List[str]):
    for stmt in block.stmts:
        _emit(stmt, depth, out)


def _emit(stmt: Stmt, depth: int, out: List[str]):
    pad = INDENT * depth
    if isinstance(stmt, Assign):
        out.append(f"{pad}{stmt.target} = {format_expr(stmt.expr)}")
    elif isinstance(stmt, Sample):
        out.append(f"{pad}{stmt.target} ~ {stmt.dist}({', '.join(format_expr(a) for a in stmt.args)})")
    elif isinstance(stmt, Skip):
        out.append(f"{pad}skip")
    elif isinstance(stmt, While):
        out.append(f"{pad}while {format_condition(stmt.cond)}:")
        _emit_block(stmt.body, depth + 1, out)
        out.append(f"{pad}end")
    elif isinstance(stmt, If):
        keyword = "if"
        node = stmt
        while True:
            out.append(f"{pad}{keyword} {format_condition(node.cond)}:")
            _emit_block(node.then, depth + 1, out)
            rest = node.orelse.stmts
            # An else-branch holding exactly one if prints as elif; it parses back to the same tree.
            if len(rest) == 1 and isinstance(rest[0], If):
                node, keyword = rest[0], "elif"
                continue
            if rest:
                out.append(f"{pad}else:")
                _emit_block(node.orelse, depth + 1, out)
            break
        out.append(f"{pad}end")
    elif isinstance(stmt, Block):
        _emit_block(stmt, depth, out)
    else:
        raise TypeError(f"not a statement: {stmt!r}")


def print_program(program: Program) -> str:
    out = [f"env {program.name}"]
    for name, value in program.params:
        out.append(f"param {name} = {format_number(value)}")
    for var in program.state_vars:
        kind = "int" if var.discrete else "real"
        out.append(f"state {var.name}: {kind} in [{format_number(var.lower)}, {format_number(var.upper)}]")
    if program.action_components:
        out.append(f"actions {', '.join(program.action_components)}")
    for action in program.actions:
        values = ", ".join(format_number(v) for v in action.values)
        out.append(f"action {action.name} = {values}" if values else f"action {action.name}")
    out.append(f"reward {program.reward_var}")
    out.append(f"done {program.done_var}")
    out.append("body")
    _emit_block(program.body, 1, out)
    out.append("end")
    return "\n".join(out) + "\n"
