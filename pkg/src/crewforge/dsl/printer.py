"""Canonical text form for policies.

The printer emits one normative layout (one declaration per line, single
spaces, ``repr``-shortest float literals) and only the parentheses the
precedence rules require, so that printing is a pure function of the tree
and ``parse(print_policy(p))`` reproduces ``p`` exactly.
"""
from __future__ import annotations

from .nodes import (
    BinOp,
    BoolLit,
    BoolOp,
    Call,
    Cmp,
    Expr,
    Neg,
    Not,
    Num,
    Policy,
    Var,
)

# Higher binds tighter. Mirrors the parser's tower.
_LEVEL_OR = 1
_LEVEL_AND = 2
_LEVEL_NOT = 3
_LEVEL_CMP = 4
_LEVEL_ADD = 5
_LEVEL_MUL = 6
_LEVEL_UNARY = 7
_LEVEL_ATOM = 8


def _number(x: float) -> str:
    text = repr(float(x))
    # Negative literals do not exist in the grammar; Neg owns the sign.
    return text


def _level(node: Expr) -> int:
    if isinstance(node, (Num, Var, BoolLit, Call)):
        return _LEVEL_ATOM
    if isinstance(node, Neg):
        return _LEVEL_UNARY
    if isinstance(node, BinOp):
        return _LEVEL_MUL if node.op in ("*", "/") else _LEVEL_ADD
    if isinstance(node, Cmp):
        return _LEVEL_CMP
    if isinstance(node, Not):
        return _LEVEL_NOT
    if isinstance(node, BoolOp):
        return _LEVEL_AND if node.op == "and" else _LEVEL_OR
    raise TypeError(f"unexpected node {node!r}")


def _child(node: Expr, parent_level: int, right_of_binary: bool = False) -> str:
    text = print_expr(node)
    level = _level(node)
    if level < parent_level or (right_of_binary and level == parent_level):
        return f"({text})"
    return text


def print_expr(node: Expr) -> str:
    if isinstance(node, Num):
        return _number(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, BoolLit):
        return "true" if node.value else "false"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(print_expr(a) for a in node.args)})"
    if isinstance(node, Neg):
        return f"-{_child(node.operand, _LEVEL_UNARY)}"
    if isinstance(node, BinOp):
        level = _level(node)
        left = _child(node.left, level)
        right = _child(node.right, level, right_of_binary=True)
        return f"{left} {node.op} {right}"
    if isinstance(node, Cmp):
        # Operands of a comparison must parenthesize nested comparisons on
        # either side, since comparisons do not chain.
        left = _child(node.left, _LEVEL_CMP, right_of_binary=False)
        right = _child(node.right, _LEVEL_CMP, right_of_binary=True)
        if _level(node.left) == _LEVEL_CMP:
            left = f"({print_expr(node.left)})"
        return f"{left} {node.op} {right}"
    if isinstance(node, Not):
        return f"not {_child(node.operand, _LEVEL_NOT)}"
    if isinstance(node, BoolOp):
        level = _level(node)
        left = _child(node.left, level)
        right = _child(node.right, level, right_of_binary=True)
        return f"{left} {node.op} {right}"
    raise TypeError(f"unexpected node {node!r}")


def print_policy(policy: Policy) -> str:
    lines = [f"policy {policy.name} {{"]
    for p in policy.params:
        lines.append(
            f"  param {p.name} = {_number(p.value)} [{_number(p.lo)}, {_number(p.hi)}]"
        )
    for r in policy.rules:
        lines.append(
            f"  rule {r.name}: when {print_expr(r.guard)} -> "
            f"drive(v = {print_expr(r.action.v)}, w = {print_expr(r.action.w)})"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
