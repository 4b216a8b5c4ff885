"""Recursive-descent parser and semantic validator for the policy language.

Grammar (comments run # to end of line, whitespace is insignificant):

    policy    := "policy" IDENT "{" param* rule+ "}"
    param     := "param" IDENT "=" NUMBER "[" NUMBER "," NUMBER "]"
    rule      := "rule" IDENT ":" "when" bexpr "->"
                 "drive" "(" "v" "=" rexpr "," "w" "=" rexpr ")"

Boolean and numeric expressions share one precedence tower (low to high:
or, and, not, comparison, additive, multiplicative, unary minus); the split
into bexpr/rexpr is enforced by a type check after parsing, which is what
turns e.g. ``when dist_to_target -> ...`` into a diagnostic instead of a
mystery. Comparisons do not chain.
"""
from __future__ import annotations

from ..errors import PolicySyntaxError, PolicyValidationError
from .lexer import Token, tokenize
from .nodes import (
    ARITH_OPS,
    CMP_OPS,
    FUNCTIONS,
    SENSOR_NAMES,
    BinOp,
    BoolLit,
    BoolOp,
    Call,
    Cmp,
    Expr,
    Neg,
    Not,
    Num,
    Param,
    Policy,
    Action,
    Rule,
    Var,
    is_boolean,
)

_DIV_EPS = 1e-9


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def error(self, msg: str, tok: Token | None = None) -> PolicySyntaxError:
        tok = tok or self.cur
        return PolicySyntaxError(tok.line, tok.col, msg)

    def advance(self) -> Token:
        tok = self.cur
        self.pos += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.cur
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            got = tok.text if tok.kind != "EOF" else "end of input"
            raise self.error(f"expected {want!r}, got {got!r}")
        return self.advance()

    def at(self, kind: str, text: str | None = None) -> bool:
        return self.cur.kind == kind and (text is None or self.cur.text == text)

    # --- grammar productions ---

    def parse_policy(self) -> Policy:
        self.expect("KEYWORD", "policy")
        name = self.expect("IDENT").text
        self.expect("PUNCT", "{")
        params = []
        while self.at("KEYWORD", "param"):
            params.append(self.parse_param())
        rules = []
        while self.at("KEYWORD", "rule"):
            rules.append(self.parse_rule())
        if not rules:
            raise self.error("policy must declare at least one rule")
        self.expect("PUNCT", "}")
        if self.cur.kind != "EOF":
            raise self.error(f"unexpected trailing input {self.cur.text!r}")
        return Policy(name=name, params=tuple(params), rules=tuple(rules))

    def parse_param(self) -> Param:
        self.expect("KEYWORD", "param")
        name = self.expect("IDENT").text
        self.expect("PUNCT", "=")
        value = self.expect("NUMBER").number
        self.expect("PUNCT", "[")
        lo = self.expect("NUMBER").number
        self.expect("PUNCT", ",")
        hi = self.expect("NUMBER").number
        self.expect("PUNCT", "]")
        return Param(name=name, value=value, lo=lo, hi=hi)

    def parse_rule(self) -> Rule:
        self.expect("KEYWORD", "rule")
        name = self.expect("IDENT").text
        self.expect("PUNCT", ":")
        self.expect("KEYWORD", "when")
        guard = self.parse_expr()
        self.expect("PUNCT", "->")
        self.expect("KEYWORD", "drive")
        self.expect("PUNCT", "(")
        self.expect("KEYWORD", "v")
        self.expect("PUNCT", "=")
        v = self.parse_expr()
        self.expect("PUNCT", ",")
        self.expect("KEYWORD", "w")
        self.expect("PUNCT", "=")
        w = self.parse_expr()
        self.expect("PUNCT", ")")
        return Rule(name=name, guard=guard, action=Action(v=v, w=w))  # type: ignore[arg-type]

    # --- expression tower, lowest precedence first ---

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        node = self.parse_and()
        while self.at("KEYWORD", "or"):
            self.advance()
            node = BoolOp("or", node, self.parse_and())  # type: ignore[arg-type]
        return node

    def parse_and(self) -> Expr:
        node = self.parse_not()
        while self.at("KEYWORD", "and"):
            self.advance()
            node = BoolOp("and", node, self.parse_not())  # type: ignore[arg-type]
        return node

    def parse_not(self) -> Expr:
        if self.at("KEYWORD", "not"):
            self.advance()
            return Not(self.parse_not())  # type: ignore[arg-type]
        return self.parse_cmp()

    def parse_cmp(self) -> Expr:
        node = self.parse_add()
        if self.cur.kind == "PUNCT" and self.cur.text in CMP_OPS:
            op = self.advance().text
            node = Cmp(op, node, self.parse_add())  # type: ignore[arg-type]
            if self.cur.kind == "PUNCT" and self.cur.text in CMP_OPS:
                raise self.error("comparisons do not chain; parenthesize and combine with 'and'")
        return node

    def parse_add(self) -> Expr:
        node = self.parse_mul()
        while self.cur.kind == "PUNCT" and self.cur.text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.parse_mul())  # type: ignore[arg-type]
        return node

    def parse_mul(self) -> Expr:
        node = self.parse_unary()
        while self.cur.kind == "PUNCT" and self.cur.text in ("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.parse_unary())  # type: ignore[arg-type]
        return node

    def parse_unary(self) -> Expr:
        if self.at("PUNCT", "-"):
            self.advance()
            return Neg(self.parse_unary())  # type: ignore[arg-type]
        return self.parse_atom()

    def parse_atom(self) -> Expr:
        tok = self.cur
        if tok.kind == "NUMBER":
            self.advance()
            return Num(tok.number)
        if tok.kind == "KEYWORD" and tok.text in ("true", "false"):
            self.advance()
            return BoolLit(tok.text == "true")
        if tok.kind == "KEYWORD" and tok.text in FUNCTIONS:
            self.advance()
            arity = FUNCTIONS[tok.text]
            self.expect("PUNCT", "(")
            args = [self.parse_expr()]
            for _ in range(arity - 1):
                self.expect("PUNCT", ",")
                args.append(self.parse_expr())
            self.expect("PUNCT", ")")
            return Call(tok.text, tuple(args))  # type: ignore[arg-type]
        if tok.kind == "IDENT":
            self.advance()
            return Var(tok.text)
        if self.at("PUNCT", "("):
            self.advance()
            node = self.parse_expr()
            self.expect("PUNCT", ")")
            return node
        got = tok.text if tok.kind != "EOF" else "end of input"
        raise self.error(f"expected an expression, got {got!r}")


# --- semantic validation ----------------------------------------------------


def _check_expr(
    node: Expr,
    known: set[str],
    where: str,
    issues: list[str],
    warnings: list[str],
    want_bool: bool,
) -> None:
    actual_bool = is_boolean(node)
    if actual_bool != want_bool:
        wanted = "boolean" if want_bool else "numeric"
        issues.append(f"type mismatch in {where}: expected a {wanted} expression")
        return
    _walk(node, known, where, issues, warnings)


def _walk(node: Expr, known: set[str], where: str, issues: list[str], warnings: list[str]) -> None:
    if isinstance(node, Num) or isinstance(node, BoolLit):
        return
    if isinstance(node, Var):
        if node.name not in known:
            issues.append(f"unknown identifier {node.name!r} in {where}")
        return
    if isinstance(node, Neg):
        _check_expr(node.operand, known, where, issues, warnings, want_bool=False)
        return
    if isinstance(node, BinOp):
        _check_expr(node.left, known, where, issues, warnings, want_bool=False)
        _check_expr(node.right, known, where, issues, warnings, want_bool=False)
        if node.op == "/":
            denom = node.right
            lit = denom.value if isinstance(denom, Num) else (
                -denom.operand.value if isinstance(denom, Neg) and isinstance(denom.operand, Num) else None
            )
            if lit is not None and abs(lit) < _DIV_EPS:
                warnings.append(f"division by a near-zero constant in {where} saturates at runtime")
        return
    if isinstance(node, Call):
        for arg in node.args:
            _check_expr(arg, known, where, issues, warnings, want_bool=False)
        return
    if isinstance(node, Cmp):
        _check_expr(node.left, known, where, issues, warnings, want_bool=False)
        _check_expr(node.right, known, where, issues, warnings, want_bool=False)
        return
    if isinstance(node, Not):
        _check_expr(node.operand, known, where, issues, warnings, want_bool=True)
        return
    if isinstance(node, BoolOp):
        _check_expr(node.left, known, where, issues, warnings, want_bool=True)
        _check_expr(node.right, known, where, issues, warnings, want_bool=True)
        return
    raise TypeError(f"unexpected node {node!r}")


def validate_policy(policy: Policy) -> tuple[list[str], list[str]]:
    """Return (issues, warnings) for a policy structure.

    Issues are hard errors: duplicate or reserved names, bound violations,
    unknown identifiers, type mismatches. Warnings do not reject the policy.
    """
    issues: list[str] = []
    warnings: list[str] = []

    seen: set[str] = set()
    for p in policy.params:
        if p.name in seen:
            issues.append(f"duplicate param name {p.name!r}")
        seen.add(p.name)
        if p.name in SENSOR_NAMES:
            issues.append(f"param name {p.name!r} shadows a sensor")
        if not p.lo < p.hi:
            issues.append(f"param {p.name!r}: bounds must satisfy lo < hi")
        elif not (p.lo <= p.value <= p.hi):
            issues.append(
                f"param {p.name!r}: bound violation, value {p.value!r} outside [{p.lo!r}, {p.hi!r}]"
            )

    rule_names: set[str] = set()
    for r in policy.rules:
        if r.name in rule_names:
            issues.append(f"duplicate rule name {r.name!r}")
        rule_names.add(r.name)

    if not policy.rules:
        issues.append("policy must declare at least one rule")

    known = set(SENSOR_NAMES) | {p.name for p in policy.params}
    for r in policy.rules:
        _check_expr(r.guard, known, f"guard of rule {r.name!r}", issues, warnings, want_bool=True)
        _check_expr(r.action.v, known, f"v of rule {r.name!r}", issues, warnings, want_bool=False)
        _check_expr(r.action.w, known, f"w of rule {r.name!r}", issues, warnings, want_bool=False)

    return issues, warnings


def parse_with_warnings(source: str) -> tuple[Policy, list[str]]:
    """Parse and validate; raise on errors, return validation warnings."""
    policy = _Parser(tokenize(source)).parse_policy()
    issues, warnings = validate_policy(policy)
    if issues:
        raise PolicyValidationError(issues)
    return policy, warnings


def parse(source: str) -> Policy:
    policy, _ = parse_with_warnings(source)
    return policy
