"""Tester-role machinery: suite evaluation, bounded tuning, feedback mapping.

The numeric loop here is deliberately algorithmic — thresholds, a scalar
objective, and derivative-free coordinate descent over the policy's bounded
parameters — so that every adjustment is reproducible from the transcript.
The language model narrates; it never supplies numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Mapping, Sequence

from .dsl import Expr, Policy, Var, set_params
from .dsl.nodes import BinOp, BoolOp, Call, Cmp, Neg, Not
from .errors import NoParams, NothingToEscalate, WrongVerdict
from .sim import Scenario, ScenarioResult, run_scenario


class Verdict(str, Enum):
    APPROVE = "Approve"
    REJECT = "Reject"
    ADJUST = "Adjust"


class FeedbackCategory(str, Enum):
    TOO_CLOSE = "TooClose"
    TOO_FAR = "TooFar"
    HIT_OBSTACLE = "HitObstacle"
    TOO_SLOW = "TooSlow"
    TOO_JERKY = "TooJerky"


class Direction(str, Enum):
    INCREASE = "Increase"
    DECREASE = "Decrease"
    FREE = "Free"


@dataclass(frozen=True)
class MetricThresholds:
    min_band_fraction: float = 0.90
    max_collisions: int = 0
    allow_target_loss: bool = False

    def violations(self, result: ScenarioResult) -> list[str]:
        out = []
        if result.band_fraction < self.min_band_fraction:
            out.append(
                f"{result.scenario_name}: band_fraction "
                f"{result.band_fraction:.3f} < {self.min_band_fraction:.3f}"
            )
        if result.collisions > self.max_collisions:
            out.append(
                f"{result.scenario_name}: {result.collisions} collisions "
                f"(allowed {self.max_collisions})"
            )
        if result.target_lost and not self.allow_target_loss:
            out.append(f"{result.scenario_name}: target lost")
        return out

    def meets(self, result: ScenarioResult) -> bool:
        return not self.violations(result)

    def to_dict(self) -> dict[str, Any]:
        return {
            "min_band_fraction": self.min_band_fraction,
            "max_collisions": self.max_collisions,
            "allow_target_loss": self.allow_target_loss,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "MetricThresholds":
        return cls(
            min_band_fraction=float(d.get("min_band_fraction", 0.90)),
            max_collisions=int(d.get("max_collisions", 0)),
            allow_target_loss=bool(d.get("allow_target_loss", False)),
        )


@dataclass(frozen=True)
class Objective:
    """Scalarizes a run: distance error, collisions, and loss, averaged."""

    w_dist: float = 1.0
    w_coll: float = 10.0
    w_loss: float = 50.0

    def score_one(self, result: ScenarioResult) -> float:
        return (
            self.w_dist * result.rms_dist_error
            + self.w_coll * result.collisions
            + self.w_loss * (1.0 if result.target_lost else 0.0)
        )

    def score(self, results: Sequence[ScenarioResult]) -> float:
        return sum(self.score_one(r) for r in results) / len(results)

    def score_summary(self, summary: Mapping[str, Any]) -> float:
        return (
            self.w_dist * float(summary["rms_dist_error"])
            + self.w_coll * int(summary["collisions"])
            + self.w_loss * (1.0 if summary["target_lost"] else 0.0)
        )

    def to_dict(self) -> dict[str, float]:
        return {"w_dist": self.w_dist, "w_coll": self.w_coll, "w_loss": self.w_loss}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Objective":
        return cls(
            w_dist=float(d.get("w_dist", 1.0)),
            w_coll=float(d.get("w_coll", 10.0)),
            w_loss=float(d.get("w_loss", 50.0)),
        )


@dataclass(frozen=True)
class Hint:
    param_name: str | None
    direction: Direction
    reason: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "param_name": self.param_name,
            "direction": self.direction.value,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class TuningDirective:
    hints: tuple[Hint, ...] = ()

    def direction_for(self, param_name: str) -> Direction:
        for h in self.hints:
            if h.param_name == param_name:
                return h.direction
        return Direction.FREE

    def named(self) -> list[str]:
        return [h.param_name for h in self.hints if h.param_name is not None]

    def to_dicts(self) -> list[dict[str, Any]]:
        return [h.to_dict() for h in self.hints]


@dataclass(frozen=True)
class UserFeedback:
    verdict: Verdict
    categories: tuple[FeedbackCategory, ...] = ()
    notes: str = ""

    def __post_init__(self) -> None:
        if self.verdict is Verdict.ADJUST and not self.categories:
            raise ValueError("Adjust feedback requires at least one category")

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "categories": [c.value for c in self.categories],
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "UserFeedback":
        return cls(
            verdict=Verdict(d["verdict"]),
            categories=tuple(FeedbackCategory(c) for c in d.get("categories", ())),
            notes=str(d.get("notes", "")),
        )


@dataclass(frozen=True)
class TestReport:
    results: tuple[ScenarioResult, ...]
    objective: float
    passed: bool
    params: Mapping[str, float] = field(default_factory=dict)
    failures: tuple[str, ...] = ()
    summaries: tuple[dict[str, Any], ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "objective": self.objective,
            "params": dict(self.params),
            "failures": list(self.failures),
            "scenarios": [dict(s) for s in self.summaries],
        }

    @classmethod
    def from_payload(cls, d: Mapping[str, Any]) -> "TestReport":
        """Rebuild the report (sans trajectories) from a transcript payload."""
        return cls(
            results=(),
            objective=float(d["objective"]),
            passed=bool(d["passed"]),
            params={k: float(v) for k, v in d.get("params", {}).items()},
            failures=tuple(str(f) for f in d.get("failures", ())),
            summaries=tuple(dict(s) for s in d.get("scenarios", ())),
        )


def evaluate_suite(
    policy: Policy,
    suite: Sequence[Scenario],
    thresholds: MetricThresholds,
    objective: Objective,
    seed: int = 0,
) -> TestReport:
    """Run every scenario and score the policy against the thresholds."""
    results = tuple(run_scenario(policy, sc, seed) for sc in suite)
    failures: list[str] = []
    for r in results:
        failures.extend(thresholds.violations(r))
    return TestReport(
        results=results,
        objective=objective.score(results),
        passed=not failures,
        params=policy.param_values(),
        failures=tuple(failures),
        summaries=tuple(r.summary() for r in results),
    )


# --- feedback → directive ---------------------------------------------------


def _vars_in(expr: Expr) -> set[str]:
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, (Neg, Not)):
        return _vars_in(expr.operand)
    if isinstance(expr, (BinOp, Cmp, BoolOp)):
        return _vars_in(expr.left) | _vars_in(expr.right)
    if isinstance(expr, Call):
        out: set[str] = set()
        for a in expr.args:
            out |= _vars_in(a)
        return out
    return set()


def _classify_params(policy: Policy) -> dict[str, list[str]]:
    """Bucket param names by the role they play in the policy's structure.

    distance: params compared with dist_to_target in a guard; avoidance:
    params in guards that read obstacle sensors; speed: params in v
    expressions (minus distance params); angular: params in w expressions.
    Declaration order is preserved within each bucket.
    """
    names = [p.name for p in policy.params]
    name_set = set(names)
    distance: set[str] = set()
    avoidance: set[str] = set()
    speed: set[str] = set()
    angular: set[str] = set()
    for rule in policy.rules:
        guard_vars = _vars_in(rule.guard)
        guard_params = guard_vars & name_set
        if "dist_to_target" in guard_vars:
            distance |= guard_params
        if guard_vars & {"obst_front", "obst_left", "obst_right"}:
            avoidance |= guard_params
        speed |= _vars_in(rule.action.v) & name_set
        angular |= _vars_in(rule.action.w) & name_set
    speed -= distance
    ordered = lambda bucket: [n for n in names if n in bucket]
    return {
        "distance": ordered(distance),
        "avoidance": ordered(avoidance),
        "speed": ordered(speed),
        "angular": ordered(angular),
    }


_CATEGORY_PLAN: dict[FeedbackCategory, tuple[str, Direction, str]] = {
    FeedbackCategory.TOO_CLOSE: ("distance", Direction.INCREASE, "robot follows too closely"),
    FeedbackCategory.TOO_FAR: ("distance", Direction.DECREASE, "robot trails too far back"),
    FeedbackCategory.HIT_OBSTACLE: (
        "avoidance",
        Direction.INCREASE,
        "raise avoidance margins; weight collisions heavily",
    ),
    FeedbackCategory.TOO_SLOW: ("speed", Direction.INCREASE, "robot lags the target"),
    FeedbackCategory.TOO_JERKY: ("angular", Direction.DECREASE, "smooth the steering"),
}


def feedback_to_directive(fb: UserFeedback, policy: Policy) -> TuningDirective:
    """Translate categorical feedback into per-parameter adjustment hints.

    Parameters are matched structurally (which rules and expressions use
    them), so the mapping works on any policy, not just the shipped one. A
    category that matches nothing falls back to Free hints on every param.
    If two categories disagree about one param, its direction degrades to
    Free rather than picking a winner.
    """
    if fb.verdict is not Verdict.ADJUST:
        raise WrongVerdict(fb.verdict.value)
    buckets = _classify_params(policy)
    hints: dict[str, Hint] = {}

    def add(name: str, direction: Direction, reason: str) -> None:
        prior = hints.get(name)
        if prior is not None and prior.direction != direction:
            direction = Direction.FREE
            reason = f"{prior.reason}; {reason}"
        hints[name] = Hint(param_name=name, direction=direction, reason=reason)

    for cat in fb.categories:
        bucket, direction, reason = _CATEGORY_PLAN[cat]
        matched = buckets[bucket]
        if matched:
            for name in matched:
                add(name, direction, reason)
        else:
            for p in policy.params:
                add(p.name, Direction.FREE, f"no structural match for {cat.value}")
    return TuningDirective(hints=tuple(hints.values()))


def apply_directive(policy: Policy, directive: TuningDirective, fraction: float = 0.1) -> Policy:
    """Nudge each hinted param by ``fraction`` of its range in the hinted
    direction (clamped). This is the immediate, guaranteed response to user
    feedback; the tuner then refines from the nudged point without undoing
    the requested direction.
    """
    updates: dict[str, float] = {}
    by_name = policy.param_map()
    for h in directive.hints:
        if h.param_name is None or h.param_name not in by_name:
            continue
        p = by_name[h.param_name]
        span = (p.hi - p.lo) * fraction
        if h.direction is Direction.INCREASE:
            updates[p.name] = p.value + span
        elif h.direction is Direction.DECREASE:
            updates[p.name] = p.value - span
    return set_params(policy, updates) if updates else policy


# --- bounded tuning ---------------------------------------------------------


@dataclass(frozen=True)
class TuneBudget:
    rounds: int = 6
    evals_per_round: int | None = None  # default: 8 × number of params

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ValueError("budget.rounds must be >= 1")


@dataclass(frozen=True)
class TuneOutcome:
    policy: Policy
    history: tuple[dict[str, Any], ...]  # {params, J} snapshots, best-so-far

    @property
    def best_j(self) -> float:
        return self.history[-1]["J"]


def minimize_params(
    policy: Policy,
    j_fn: Callable[[Policy], float],
    directive: TuningDirective | None = None,
    budget: TuneBudget = TuneBudget(),
) -> TuneOutcome:
    """Derivative-free coordinate descent over the policy's bounded params.

    Per round, each parameter is probed at ±delta·(hi−lo) (hinted params
    first, hinted direction only) and the probe is accepted while it strictly
    improves J; delta starts at 0.25 and halves every round. Keep-best: the
    returned policy never scores worse than the input.
    """
    if not policy.params:
        raise NoParams("policy declares no tunable parameters")
    directive = directive or TuningDirective()
    per_round = budget.evals_per_round or 8 * len(policy.params)

    named = [n for n in directive.named() if n in {p.name for p in policy.params}]
    ordered = named + [p.name for p in policy.params if p.name not in named]

    best = policy
    best_j = j_fn(best)
    evals = 1
    history: list[dict[str, Any]] = [{"params": best.param_values(), "J": best_j}]

    delta = 0.25
    for _ in range(budget.rounds):
        round_evals = 1 if evals == 1 else 0  # the initial eval bills to round 1
        for name in ordered:
            direction = directive.direction_for(name)
            if direction is Direction.INCREASE:
                signs = (1.0,)
            elif direction is Direction.DECREASE:
                signs = (-1.0,)
            else:
                signs = (1.0, -1.0)
            moved = False
            for sign in signs:
                if moved:
                    break  # keep walking one direction only once it pays off
                while round_evals < per_round:
                    p = best.param_map()[name]
                    probe_value = min(max(p.value + sign * delta * (p.hi - p.lo), p.lo), p.hi)
                    if probe_value == p.value:
                        break
                    candidate = set_params(best, {name: probe_value})
                    j = j_fn(candidate)
                    round_evals += 1
                    evals += 1
                    if j < best_j:
                        best, best_j = candidate, j
                        moved = True
                    else:
                        break
        history.append({"params": best.param_values(), "J": best_j})
        delta *= 0.5
    return TuneOutcome(policy=best, history=tuple(history))


def tune(
    policy: Policy,
    suite: Sequence[Scenario],
    objective: Objective,
    directive: TuningDirective | None = None,
    budget: TuneBudget = TuneBudget(),
    seed: int = 0,
) -> TuneOutcome:
    """Tune the policy's params to minimize the suite objective."""

    def j_fn(p: Policy) -> float:
        return objective.score([run_scenario(p, sc, seed) for sc in suite])

    return minimize_params(policy, j_fn, directive, budget)


# --- escalation -------------------------------------------------------------


@dataclass(frozen=True)
class EscalationReport:
    reason: str
    worst_scenario: str
    violations: tuple[str, ...]
    param_history: tuple[dict[str, float], ...]
    tried_directions: tuple[dict[str, Any], ...]

    def to_payload(self) -> dict[str, Any]:
        return {
            "reason": self.reason,
            "worst_scenario": self.worst_scenario,
            "violations": list(self.violations),
            "param_history": [dict(p) for p in self.param_history],
            "tried_directions": [dict(d) for d in self.tried_directions],
            "notes": "",
        }


def compose_escalation(
    reports: Sequence[TestReport],
    directives: Sequence[TuningDirective] = (),
) -> EscalationReport:
    """Summarize a failed tuning cycle for the analyst.

    Picks the worst failing report (highest objective), names its worst
    scenario, and lists what was tried so the analyst can change structure
    rather than repeat parameter twiddling.
    """
    failing = [r for r in reports if not r.passed]
    if not failing:
        raise NothingToEscalate("all test reports pass thresholds")
    worst = max(failing, key=lambda r: r.objective)
    objective = Objective()
    worst_name = str(
        max(worst.summaries, key=objective.score_summary)["scenario"]
        if worst.summaries
        else max(worst.results, key=objective.score_one).scenario_name
    )
    return EscalationReport(
        reason=(
            f"metrics still failing after tuning: objective {worst.objective:.3f}, "
            f"worst scenario {worst_name!r}"
        ),
        worst_scenario=worst_name,
        violations=worst.failures,
        param_history=tuple(dict(r.params) for r in reports),
        tried_directions=tuple(d for dv in directives for d in dv.to_dicts()),
    )
