"""AST nodes and value types for the rule-based control policy language.

A policy is a list of bounded numeric parameters plus a prioritized list of
rules; on each tick the first rule whose guard holds produces the drive
command. Expression nodes are immutable and compare structurally, which is
what makes the parse/print round-trip checkable with plain ``==``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

SENSOR_NAMES = (
    "dist_to_target",
    "bearing_to_target",
    "obst_front",
    "obst_left",
    "obst_right",
    "own_speed",
)

ARITH_OPS = ("+", "-", "*", "/")
CMP_OPS = ("<", "<=", ">", ">=", "==")
FUNCTIONS = {"min": 2, "max": 2, "clamp": 3, "abs": 1, "sign": 1}

KEYWORDS = frozenset(
    {"policy", "param", "rule", "when", "drive", "and", "or", "not", "true", "false", "v", "w"}
    | set(FUNCTIONS)
)


# --- numeric expressions ---

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "RExpr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of ARITH_OPS
    left: "RExpr"
    right: "RExpr"


@dataclass(frozen=True)
class Call:
    func: str  # one of FUNCTIONS
    args: tuple["RExpr", ...]


RExpr = Union[Num, Var, Neg, BinOp, Call]


# --- boolean expressions ---

@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Cmp:
    op: str  # one of CMP_OPS
    left: RExpr
    right: RExpr


@dataclass(frozen=True)
class Not:
    operand: "BExpr"


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or"
    left: "BExpr"
    right: "BExpr"


BExpr = Union[BoolLit, Cmp, Not, BoolOp]
Expr = Union[RExpr, BExpr]


def is_boolean(node: Expr) -> bool:
    return isinstance(node, (BoolLit, Cmp, Not, BoolOp))


# --- policy structure ---

@dataclass(frozen=True)
class Param:
    """A tunable value with inclusive bounds. The grammar only admits
    unsigned number literals, so lo >= 0 for any parsed policy."""

    name: str
    value: float
    lo: float
    hi: float


@dataclass(frozen=True)
class Action:
    v: RExpr
    w: RExpr


@dataclass(frozen=True)
class Rule:
    name: str
    guard: BExpr
    action: Action


@dataclass(frozen=True)
class Policy:
    name: str
    params: tuple[Param, ...]
    rules: tuple[Rule, ...]

    def param_map(self) -> dict[str, Param]:
        return {p.name: p for p in self.params}

    def param_values(self) -> dict[str, float]:
        return {p.name: p.value for p in self.params}


# --- runtime values ---

@dataclass(frozen=True)
class DriveCommand:
    v: float  # linear velocity, m/s
    w: float  # angular velocity, rad/s


@dataclass(frozen=True)
class SensorFrame:
    """One tick's worth of sensor readings, in SI units."""

    dist_to_target: float
    bearing_to_target: float  # rad, in (-pi, pi]
    obst_front: float
    obst_left: float
    obst_right: float
    own_speed: float = 0.0

    def __post_init__(self) -> None:
        for name in ("dist_to_target", "obst_front", "obst_left", "obst_right"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not (-math.pi < self.bearing_to_target <= math.pi):
            raise ValueError("bearing_to_target must lie in (-pi, pi]")

    def as_env(self) -> dict[str, float]:
        return {
            "dist_to_target": self.dist_to_target,
            "bearing_to_target": self.bearing_to_target,
            "obst_front": self.obst_front,
            "obst_left": self.obst_left,
            "obst_right": self.obst_right,
            "own_speed": self.own_speed,
        }
