"""Rule-based drive policy language: parse, validate, print, evaluate."""
from .evaluator import compile_expr, compile_policy, evaluate, safe_div, set_params
from .lexer import Token, tokenize
from .nodes import (
    ARITH_OPS,
    CMP_OPS,
    FUNCTIONS,
    KEYWORDS,
    SENSOR_NAMES,
    Action,
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
    Param,
    Policy,
    Rule,
    SensorFrame,
    Var,
    is_boolean,
)
from .parser import parse, parse_with_warnings, validate_policy
from .printer import print_expr, print_policy

__all__ = [
    "ARITH_OPS",
    "CMP_OPS",
    "FUNCTIONS",
    "KEYWORDS",
    "SENSOR_NAMES",
    "Action",
    "BinOp",
    "BoolLit",
    "BoolOp",
    "Call",
    "Cmp",
    "DriveCommand",
    "Expr",
    "Neg",
    "Not",
    "Num",
    "Param",
    "Policy",
    "Rule",
    "SensorFrame",
    "Token",
    "Var",
    "compile_expr",
    "compile_policy",
    "evaluate",
    "is_boolean",
    "parse",
    "parse_with_warnings",
    "print_expr",
    "print_policy",
    "safe_div",
    "set_params",
    "tokenize",
    "validate_policy",
]
