"""Watch the coordinate search pull a detuned policy back into shape.

Run with:  python3 demos/03_tuning.py
"""
from crewforge import (
    Direction,
    FeedbackCategory,
    Hint,
    Objective,
    TuneBudget,
    TuningDirective,
    UserFeedback,
    Verdict,
    apply_directive,
    builtin_suite,
    evaluate_suite,
    feedback_to_directive,
    MetricThresholds,
    parse,
    tune,
)

DETUNED = """
policy sluggish {
  param follow_dist = 1.5 [1.0, 2.0]
  param speed_gain = 0.3 [0.2, 3.0]
  param turn_gain = 0.6 [0.5, 4.0]

  rule approach: when dist_to_target > follow_dist ->
    drive(v = clamp(speed_gain * (dist_to_target - follow_dist), 0.0, 0.8),
          w = clamp(turn_gain * bearing_to_target, -2.0, 2.0))
  rule hold: when true ->
    drive(v = 0.0, w = clamp(turn_gain * bearing_to_target, -2.0, 2.0))
}
"""


def main() -> None:
    policy = parse(DETUNED)
    suite = builtin_suite()[:2]  # the two walking scenarios; no obstacles
    objective = Objective()

    report = evaluate_suite(policy, suite, MetricThresholds(), objective, seed=0)
    print(f"detuned start: objective {report.objective:.4f}, "
          f"passed={report.passed}")

    outcome = tune(policy, suite, objective, budget=TuneBudget(rounds=4), seed=0)
    print("\nobjective per round (keep-best, probe step halves each round):")
    for i, snap in enumerate(outcome.history):
        label = "start" if i == 0 else f"round {i}"
        print(f"  {label:8s} J={snap['J']:.4f}  {snap['params']}")

    # user feedback narrows the search: TooClose maps to the params that set
    # the standing distance, and the search may only increase them
    fb = UserFeedback(Verdict.ADJUST, (FeedbackCategory.TOO_CLOSE,), "too close")
    directive = feedback_to_directive(fb, outcome.policy)
    print("\nfeedback 'TooClose' became:",
          {h.param_name: h.direction.value for h in directive.hints})

    nudged = apply_directive(outcome.policy, directive, fraction=0.1)
    print(f"  follow_dist nudged "
          f"{outcome.policy.param_values()['follow_dist']:.3f} -> "
          f"{nudged.param_values()['follow_dist']:.3f} before retuning")

    hinted = tune(nudged, suite, objective, directive,
                  TuneBudget(rounds=2), seed=0)
    print(f"  after a hinted retune: follow_dist "
          f"{hinted.policy.param_values()['follow_dist']:.3f}, "
          f"J={hinted.best_j:.4f}")

    # directives also work standalone, e.g. pinning one parameter upward
    manual = TuningDirective(hints=(Hint("speed_gain", Direction.INCREASE, "demo"),))
    print("\na hand-written directive:",
          {h.param_name: h.direction.value for h in manual.hints})


if __name__ == "__main__":
    main()
