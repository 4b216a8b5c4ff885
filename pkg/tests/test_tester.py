from __future__ import annotations

import math
import os
import random

import pytest

from crewforge.config import happy_path_dir
from crewforge.dsl import parse, set_params
from crewforge.errors import NoParams, NothingToEscalate, WrongVerdict
from crewforge.sim import Circle, Pose, RobotLimits, Scenario, ScenarioResult, Waypoint
from crewforge.tester import (
    Direction,
    FeedbackCategory,
    Hint,
    MetricThresholds,
    Objective,
    TestReport,
    TuneBudget,
    TuningDirective,
    UserFeedback,
    Verdict,
    apply_directive,
    compose_escalation,
    evaluate_suite,
    feedback_to_directive,
    minimize_params,
    tune,
)


def result(name="s", rms=0.2, collisions=0, lost=False, band=1.0, ticks=100) -> ScenarioResult:
    return ScenarioResult(
        scenario_name=name,
        ticks=ticks,
        band_fraction=band,
        rms_dist_error=rms,
        collisions=collisions,
        target_lost=lost,
        trajectory=(),
    )


def one_param_policy(value=1.5, lo=0.0, hi=3.0):
    return parse(
        f"policy t {{ param c = {value} [{lo}, {hi}] "
        "rule r: when true -> drive(v = c, w = 0.0) }"
    )


@pytest.fixture(scope="module")
def shipped_policy():
    with open(os.path.join(happy_path_dir(), "follow.policy"), encoding="utf-8") as fh:
        return parse(fh.read())


# --- thresholds and objective ------------------------------------------------


def test_objective_is_mean_of_weighted_terms():
    obj = Objective(w_dist=1.0, w_coll=10.0, w_loss=50.0)
    a = result(rms=0.2)
    b = result(rms=0.4, collisions=2, lost=True)
    assert obj.score_one(a) == pytest.approx(0.2)
    assert obj.score_one(b) == pytest.approx(0.4 + 20.0 + 50.0)
    assert obj.score([a, b]) == pytest.approx((0.2 + 70.4) / 2)
    assert obj.score_summary(b.summary()) == pytest.approx(obj.score_one(b))


def test_thresholds_catch_each_violation_kind():
    th = MetricThresholds(min_band_fraction=0.9, max_collisions=0, allow_target_loss=False)
    assert th.meets(result())
    assert "band_fraction" in th.violations(result(band=0.5))[0]
    assert "collisions" in th.violations(result(collisions=1))[0]
    assert "lost" in th.violations(result(lost=True))[0]
    assert MetricThresholds(allow_target_loss=True).meets(result(lost=True))


def test_evaluate_suite_perfect_run_scores_distance_only():
    stop = parse("policy stop { rule s: when false -> drive(v = 1.0, w = 0.0) }")
    sc = Scenario(
        name="hold", duration_s=5.0, dt=0.05,
        robot_start=Pose(0, 0, 0),
        target_path=(Waypoint(1.5, 0.0, 0.0),),
        obstacles=(),
        desired_follow_dist=1.5, band_tolerance=0.5, lose_dist=8.0, sensor_max=5.0,
        robot=RobotLimits(0.25, 1.0, 2.5),
    )
    report = evaluate_suite(stop, [sc], MetricThresholds(), Objective())
    assert report.passed
    assert report.objective == 0.0
    assert report.failures == ()
    assert report.summaries[0]["band_fraction"] == 1.0


def test_evaluate_suite_collision_fails_thresholds():
    stop = parse("policy stop { rule s: when false -> drive(v = 1.0, w = 0.0) }")
    sc = Scenario(
        name="pinned", duration_s=2.0, dt=0.05,
        robot_start=Pose(0, 0, 0),
        target_path=(Waypoint(1.5, 0.0, 0.0),),
        obstacles=(Circle(0.1, 0.0, 0.5),),  # overlaps the robot from tick one
        desired_follow_dist=1.5, band_tolerance=0.5, lose_dist=8.0, sensor_max=5.0,
        robot=RobotLimits(0.25, 1.0, 2.5),
    )
    report = evaluate_suite(stop, [sc], MetricThresholds(max_collisions=0), Objective())
    assert not report.passed
    assert any("collision" in f for f in report.failures)


def test_test_report_payload_round_trip():
    report = TestReport(
        results=(), objective=1.25, passed=False,
        params={"d": 1.5}, failures=("s: target lost",),
        summaries=({"scenario": "s", "ticks": 1, "band_fraction": 0.5,
                    "rms_dist_error": 1.0, "collisions": 0, "target_lost": True},),
    )
    back = TestReport.from_payload(report.to_dict())
    assert back.objective == report.objective
    assert back.passed == report.passed
    assert back.params == report.params
    assert back.failures == report.failures
    assert back.summaries == report.summaries


# --- feedback mapping --------------------------------------------------------


def test_directive_requires_adjust_verdict(shipped_policy):
    with pytest.raises(WrongVerdict):
        feedback_to_directive(UserFeedback(Verdict.APPROVE), shipped_policy)


def directions(directive: TuningDirective) -> dict[str, Direction]:
    return {h.param_name: h.direction for h in directive.hints}


def test_too_close_raises_follow_distance(shipped_policy):
    fb = UserFeedback(Verdict.ADJUST, (FeedbackCategory.TOO_CLOSE,))
    d = directions(feedback_to_directive(fb, shipped_policy))
    assert d == {"follow_dist": Direction.INCREASE}


def test_too_far_lowers_follow_distance(shipped_policy):
    fb = UserFeedback(Verdict.ADJUST, (FeedbackCategory.TOO_FAR,))
    d = directions(feedback_to_directive(fb, shipped_policy))
    assert d == {"follow_dist": Direction.DECREASE}


def test_hit_obstacle_raises_avoidance_margins(shipped_policy):
    fb = UserFeedback(Verdict.ADJUST, (FeedbackCategory.HIT_OBSTACLE,))
    d = directions(feedback_to_directive(fb, shipped_policy))
    assert d == {"avoid_front": Direction.INCREASE, "avoid_side": Direction.INCREASE}


def test_too_slow_raises_speed_params(shipped_policy):
    fb = UserFeedback(Verdict.ADJUST, (FeedbackCategory.TOO_SLOW,))
    d = directions(feedback_to_directive(fb, shipped_policy))
    assert d == {"speed_gain": Direction.INCREASE, "v_cap": Direction.INCREASE}


def test_too_jerky_lowers_angular_gain(shipped_policy):
    fb = UserFeedback(Verdict.ADJUST, (FeedbackCategory.TOO_JERKY,))
    d = directions(feedback_to_directive(fb, shipped_policy))
    assert d == {"turn_gain": Direction.DECREASE}


def test_conflicting_categories_degrade_to_free(shipped_policy):
    fb = UserFeedback(Verdict.ADJUST, (FeedbackCategory.TOO_CLOSE, FeedbackCategory.TOO_FAR))
    d = directions(feedback_to_directive(fb, shipped_policy))
    assert d == {"follow_dist": Direction.FREE}


def test_unmatched_category_frees_all_params():
    no_avoid = parse(
        "policy p { param k = 1.0 [0.1, 2.0] "
        "rule go: when dist_to_target > 1.5 -> drive(v = k, w = 0.0) }"
    )
    fb = UserFeedback(Verdict.ADJUST, (FeedbackCategory.HIT_OBSTACLE,))
    d = directions(feedback_to_directive(fb, no_avoid))
    assert d == {"k": Direction.FREE}


def test_apply_directive_nudges_by_fraction_of_range(shipped_policy):
    directive = TuningDirective(
        hints=(Hint("follow_dist", Direction.INCREASE, ""),
               Hint("turn_gain", Direction.DECREASE, ""),
               Hint("v_cap", Direction.FREE, ""))
    )
    before = shipped_policy.param_values()
    after = apply_directive(shipped_policy, directive, fraction=0.1).param_values()
    pm = shipped_policy.param_map()
    assert after["follow_dist"] == pytest.approx(
        before["follow_dist"] + 0.1 * (pm["follow_dist"].hi - pm["follow_dist"].lo)
    )
    assert after["turn_gain"] == pytest.approx(
        before["turn_gain"] - 0.1 * (pm["turn_gain"].hi - pm["turn_gain"].lo)
    )
    assert after["v_cap"] == before["v_cap"]  # Free hints do not nudge


def test_apply_directive_clamps_at_bounds():
    p = one_param_policy(value=2.9, lo=0.0, hi=3.0)
    nudged = apply_directive(
        p, TuningDirective((Hint("c", Direction.INCREASE, ""),)), fraction=0.1
    )
    assert nudged.param_values()["c"] == 3.0


# --- bounded tuning ----------------------------------------------------------


def surrogate(c: float):
    def j_fn(policy) -> float:
        p = policy.param_values()["c"]
        return (p - c) * (p - c)
    return j_fn


def grid_minimum(c: float, lo=0.0, hi=3.0, step=0.001) -> float:
    best_x, best_j = lo, (lo - c) ** 2
    n = int(round((hi - lo) / step))
    for i in range(1, n + 1):
        x = lo + i * step
        j = (x - c) ** 2
        if j < best_j:
            best_x, best_j = x, j
    return best_x


def test_tuner_lands_near_target_for_100_random_surrogates():
    rng = random.Random(99)
    worst = 0.0
    for _ in range(100):
        c = rng.uniform(0.0, 3.0)
        start = rng.uniform(0.0, 3.0)
        outcome = minimize_params(
            one_param_policy(value=start), surrogate(c), budget=TuneBudget(rounds=6)
        )
        tuned = outcome.policy.param_values()["c"]
        oracle = grid_minimum(c)
        assert abs(oracle - c) <= 0.0005  # the grid pins the true optimum
        worst = max(worst, abs(tuned - oracle))
    assert worst <= 0.15


def test_tuner_history_is_monotone_and_keep_best():
    outcome = minimize_params(one_param_policy(value=0.1), surrogate(2.7))
    js = [h["J"] for h in outcome.history]
    assert js == sorted(js, reverse=True) or all(b <= a for a, b in zip(js, js[1:]))
    assert outcome.best_j <= js[0]
    assert outcome.history[0]["params"]["c"] == 0.1


def test_tuner_respects_eval_budget():
    calls = 0

    def counting(policy) -> float:
        nonlocal calls
        calls += 1
        return surrogate(2.0)(policy)

    budget = TuneBudget(rounds=3, evals_per_round=4)
    minimize_params(one_param_policy(value=0.0), counting, budget=budget)
    assert calls <= 3 * 4


def test_tuner_never_leaves_bounds_on_rough_objectives():
    rng = random.Random(4)
    for _ in range(20):
        lo = rng.uniform(0.0, 1.0)
        hi = lo + rng.uniform(0.5, 3.0)
        start = rng.uniform(lo, hi)
        seen: list[float] = []

        def j_fn(policy) -> float:
            v = policy.param_values()["c"]
            seen.append(v)
            return math.sin(7 * v) + rng.random() * 0.01

        minimize_params(one_param_policy(start, lo, hi), j_fn, budget=TuneBudget(rounds=3))
        assert all(lo <= v <= hi for v in seen)


def test_directive_restricts_probe_direction():
    seen: list[float] = []

    def j_fn(policy) -> float:
        v = policy.param_values()["c"]
        seen.append(v)
        return (v - 0.0) ** 2  # optimum sits below the start

    directive = TuningDirective((Hint("c", Direction.INCREASE, ""),))
    outcome = minimize_params(one_param_policy(value=1.0), j_fn, directive)
    assert all(v >= 1.0 for v in seen)
    assert outcome.policy.param_values()["c"] == 1.0  # increase never helped


def test_directive_restriction_at_hi_bound_is_a_no_op():
    directive = TuningDirective((Hint("c", Direction.INCREASE, ""),))
    outcome = minimize_params(one_param_policy(value=3.0), surrogate(0.0), directive)
    assert outcome.policy.param_values()["c"] == 3.0


def test_tune_on_suite_improves_objective(shipped_policy):
    # detuned start: sluggish gains
    start = set_params(shipped_policy, {"speed_gain": 0.2, "turn_gain": 0.5})
    sc = Scenario(
        name="mini", duration_s=10.0, dt=0.05,
        robot_start=Pose(0, 0, 0),
        target_path=(Waypoint(3.0, 0.0, 0.4), Waypoint(6.0, 0.0, 0.0)),
        obstacles=(),
        desired_follow_dist=1.5, band_tolerance=0.5, lose_dist=8.0, sensor_max=5.0,
        robot=RobotLimits(0.25, 1.0, 2.5),
    )
    obj = Objective()
    before = obj.score([__import__("crewforge.sim", fromlist=["run_scenario"]).run_scenario(start, sc)])
    outcome = tune(start, [sc], obj, budget=TuneBudget(rounds=2, evals_per_round=8))
    assert outcome.best_j <= before


def test_tuner_requires_params():
    p = parse("policy p { rule r: when true -> drive(v = 0.1, w = 0.0) }")
    with pytest.raises(NoParams):
        minimize_params(p, lambda _: 0.0)


# --- escalation --------------------------------------------------------------


def test_escalation_names_worst_scenario_and_violations():
    good = result(name="straight_walk", rms=0.1)
    bad = result(name="corridor", rms=0.3, collisions=2, band=0.7)
    th = MetricThresholds()
    failing = TestReport(
        results=(good, bad),
        objective=Objective().score([good, bad]),
        passed=False,
        params={"d": 1.5},
        failures=tuple(th.violations(good) + th.violations(bad)),
        summaries=(good.summary(), bad.summary()),
    )
    directive = TuningDirective((Hint("d", Direction.INCREASE, "x"),))
    esc = compose_escalation([failing], [directive])
    assert esc.worst_scenario == "corridor"
    assert any("2 collisions" in v for v in esc.violations)
    assert esc.param_history == ({"d": 1.5},)
    assert esc.tried_directions[0]["param_name"] == "d"
    payload = esc.to_payload()
    assert payload["worst_scenario"] == "corridor" and payload["notes"] == ""


def test_escalation_requires_a_failing_report():
    passing = TestReport(results=(), objective=0.1, passed=True)
    with pytest.raises(NothingToEscalate):
        compose_escalation([passing])
