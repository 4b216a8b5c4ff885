"""A tour of the drive-policy language: parse, inspect, evaluate, round-trip.

Run with:  python3 demos/01_policy_dsl.py
"""
from crewforge import SensorFrame, evaluate, parse, print_policy, set_params

SOURCE = """
policy demo {
  param follow_dist = 1.5 [1.0, 2.0]
  param speed_gain = 1.2 [0.2, 3.0]

  # rules are tried top to bottom; the first true guard drives the robot
  rule dodge: when obst_front < 0.8 ->
    drive(v = 0.2, w = -1.0)
  rule approach: when dist_to_target > follow_dist ->
    drive(v = clamp(speed_gain * (dist_to_target - follow_dist), 0.0, 0.8),
          w = clamp(2.0 * bearing_to_target, -1.5, 1.5))
}
"""


def frame(**overrides: float) -> SensorFrame:
    """A sensor frame: far-away obstacles, target 3 m ahead."""
    base = dict(
        dist_to_target=3.0,
        bearing_to_target=0.0,
        obst_front=4.0,
        obst_left=4.0,
        obst_right=4.0,
    )
    return SensorFrame(**{**base, **overrides})


def show(policy, sensors: SensorFrame, label: str) -> None:
    cmd = evaluate(policy, sensors)
    print(f"  {label:34s} -> v={cmd.v:+.3f} m/s  w={cmd.w:+.3f} rad/s")


def main() -> None:
    policy = parse(SOURCE)
    print(f"parsed policy {policy.name!r}: "
          f"{len(policy.params)} params, {len(policy.rules)} rules")

    print("\nevaluation (first true rule wins, else safe stop):")
    show(policy, frame(), "target 3 m ahead")
    show(policy, frame(obst_front=0.5), "obstacle 0.5 m in front")
    show(policy, frame(dist_to_target=1.2), "inside the follow band")

    print("\nparameters are bounded; updates clamp to the declared range:")
    eager = set_params(policy, {"speed_gain": 99.0})
    print(f"  speed_gain requested 99.0, stored "
          f"{eager.param_values()['speed_gain']}")
    show(eager, frame(), "same frame, speed_gain at its cap")

    print("\npretty-printing is canonical: parse(print(p)) == p")
    printed = print_policy(policy)
    print("  round-trip identical:", parse(printed) == policy)
    print("\n" + printed)


if __name__ == "__main__":
    main()
