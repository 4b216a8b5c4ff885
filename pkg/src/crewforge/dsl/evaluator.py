"""Policy evaluation.

Expressions compile once into nested Python closures over an environment
dict (param values plus the six sensor readings); evaluating a tick is then
dict lookups and float math, no tree walking. Compilation is cached per
policy value, so repeated ticks and tuning probes reuse the same closures.

Division saturates instead of raising: a denominator smaller than 1e-9 in
magnitude yields ±1e9 with the numerator's sign (0 for a zero numerator).
Final drive outputs are clamped to ±1e6 so a runaway expression cannot
produce inf/nan downstream.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Callable

from ..errors import UnknownParam
from .nodes import (
    BinOp,
    BoolLit,
    BoolOp,
    Call,
    Cmp,
    DriveCommand,
    Expr,
    Neg,
    Not,
    Num,
    Policy,
    SensorFrame,
    Var,
)

_DIV_EPS = 1e-9
_DIV_SAT = 1e9
_OUTPUT_LIMIT = 1e6

_Env = dict[str, float]
_Fn = Callable[[_Env], float]


def safe_div(x: float, y: float) -> float:
    if abs(y) < _DIV_EPS:
        if x > 0.0:
            return _DIV_SAT
        if x < 0.0:
            return -_DIV_SAT
        return 0.0
    return x / y


def _sign(x: float) -> float:
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


def _clamp(x: float, lo: float, hi: float) -> float:
    return min(max(x, lo), hi)


def compile_expr(node: Expr) -> _Fn:
    if isinstance(node, Num):
        value = node.value
        return lambda env: value
    if isinstance(node, Var):
        name = node.name
        return lambda env: env[name]
    if isinstance(node, BoolLit):
        value = node.value
        return lambda env: value
    if isinstance(node, Neg):
        operand = compile_expr(node.operand)
        return lambda env: -operand(env)
    if isinstance(node, BinOp):
        left, right = compile_expr(node.left), compile_expr(node.right)
        if node.op == "+":
            return lambda env: left(env) + right(env)
        if node.op == "-":
            return lambda env: left(env) - right(env)
        if node.op == "*":
            return lambda env: left(env) * right(env)
        return lambda env: safe_div(left(env), right(env))
    if isinstance(node, Call):
        fns = tuple(compile_expr(a) for a in node.args)
        if node.func == "min":
            a, b = fns
            return lambda env: min(a(env), b(env))
        if node.func == "max":
            a, b = fns
            return lambda env: max(a(env), b(env))
        if node.func == "clamp":
            x, lo, hi = fns
            return lambda env: _clamp(x(env), lo(env), hi(env))
        if node.func == "abs":
            (x,) = fns
            return lambda env: abs(x(env))
        (x,) = fns
        return lambda env: _sign(x(env))
    if isinstance(node, Cmp):
        left, right = compile_expr(node.left), compile_expr(node.right)
        if node.op == "<":
            return lambda env: left(env) < right(env)
        if node.op == "<=":
            return lambda env: left(env) <= right(env)
        if node.op == ">":
            return lambda env: left(env) > right(env)
        if node.op == ">=":
            return lambda env: left(env) >= right(env)
        return lambda env: left(env) == right(env)
    if isinstance(node, Not):
        operand = compile_expr(node.operand)
        return lambda env: not operand(env)
    if isinstance(node, BoolOp):
        left, right = compile_expr(node.left), compile_expr(node.right)
        if node.op == "and":
            return lambda env: left(env) and right(env)
        return lambda env: left(env) or right(env)
    raise TypeError(f"unexpected node {node!r}")


@lru_cache(maxsize=256)
def compile_policy(policy: Policy) -> Callable[[_Env], DriveCommand]:
    """Build a closure mapping an environment to a drive command.

    Rules fire first-match-wins in declaration order; when no guard holds
    the command is a full stop.
    """
    compiled = tuple(
        (compile_expr(r.guard), compile_expr(r.action.v), compile_expr(r.action.w))
        for r in policy.rules
    )

    def run(env: _Env) -> DriveCommand:
        for guard, v_fn, w_fn in compiled:
            if guard(env):
                v = _clamp(float(v_fn(env)), -_OUTPUT_LIMIT, _OUTPUT_LIMIT)
                w = _clamp(float(w_fn(env)), -_OUTPUT_LIMIT, _OUTPUT_LIMIT)
                return DriveCommand(v=v, w=w)
        return DriveCommand(v=0.0, w=0.0)

    return run


def evaluate(policy: Policy, frame: SensorFrame) -> DriveCommand:
    env = dict(policy.param_values())
    env.update(frame.as_env())
    return compile_policy(policy)(env)


def set_params(policy: Policy, updates: dict[str, float]) -> Policy:
    """Return a copy with new param values, each clamped into its bounds."""
    known = {p.name for p in policy.params}
    for name in updates:
        if name not in known:
            raise UnknownParam(name)
    new_params = tuple(
        p if p.name not in updates
        else type(p)(name=p.name, value=_clamp(float(updates[p.name]), p.lo, p.hi), lo=p.lo, hi=p.hi)
        for p in policy.params
    )
    return type(policy)(name=policy.name, params=new_params, rules=policy.rules)
