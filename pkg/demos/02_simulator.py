"""Drive a policy through the built-in scenario suite and read the metrics.

Run with:  python3 demos/02_simulator.py
"""
import os
import tempfile

from crewforge import builtin_suite, export_trajectory, parse, run_scenario

POLICY = """
policy follower {
  param kp = 1.0 [0.1, 4.0]
  param kw = 2.0 [0.5, 4.0]

  rule follow: when true ->
    drive(v = clamp(kp * (dist_to_target - 1.5), 0.0, 0.8),
          w = clamp(kw * bearing_to_target, -1.0, 1.0))
}
"""


def sparkline(values: list[float], width: int = 48) -> str:
    """Coarse terminal plot of the robot-target distance over time."""
    blocks = " .:-=+*#"
    step = max(1, len(values) // width)
    sampled = values[::step][:width]
    lo, hi = min(sampled), max(sampled)
    span = (hi - lo) or 1.0
    return "".join(blocks[int((v - lo) / span * (len(blocks) - 1))] for v in sampled)


def main() -> None:
    policy = parse(POLICY)
    print("a pure pursuit policy against the four stock scenarios\n")
    print(f"{'scenario':14s} {'band':>6s} {'rms':>7s} {'coll':>4s} {'lost':>5s}")
    for scenario in builtin_suite():
        result = run_scenario(policy, scenario, seed=0)
        print(
            f"{scenario.name:14s} {result.band_fraction:6.3f} "
            f"{result.rms_dist_error:7.4f} {result.collisions:4d} "
            f"{str(result.target_lost).lower():>5s}"
        )

    # the trajectory table is the ground truth behind every metric
    straight = builtin_suite()[0]
    result = run_scenario(policy, straight, seed=0)
    dists = [row.dist for row in result.trajectory]
    print(f"\n{straight.name}: distance to target over {straight.duration_s:.0f} s")
    print(f"  {sparkline(dists)}")
    print(f"  start {dists[0]:.2f} m, final {dists[-1]:.2f} m "
          f"(desired {straight.desired_follow_dist} ± {straight.band_tolerance} m)")

    # note the blind spot: this policy never looks at the rangefinders, and
    # the corridor scenario shows it (collisions above on the corridor row)
    out = os.path.join(tempfile.gettempdir(), "straight_walk.csv")
    export_trajectory(result, out)
    print(f"\nfull trajectory written to {out}")


if __name__ == "__main__":
    main()
