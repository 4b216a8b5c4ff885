"""Deterministic planar simulation of a robot following a moving target.

The robot is a unicycle (x, y, heading) driven by a policy's (v, w) command
and integrated with explicit Euler steps. The target walks a piecewise-linear
waypoint path at per-segment speed and holds at the final waypoint. Obstacles
are static circles sensed as per-sector minimum ranges. Everything is pure
float arithmetic on immutable values, so a (policy, scenario, seed) triple
always reproduces the same trajectory bit for bit.
"""
from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

import yaml

from .dsl import DriveCommand, Policy, SensorFrame, evaluate
from .errors import InvalidSpec

_TICK_EPS = 1e-9


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]; the pi boundary maps to pi itself."""
    return math.pi - (math.pi - theta) % (2.0 * math.pi)


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float


@dataclass(frozen=True)
class Waypoint:
    """A path vertex; ``speed`` governs the segment leaving this vertex."""

    x: float
    y: float
    speed: float = 0.0


@dataclass(frozen=True)
class Circle:
    x: float
    y: float
    radius: float


@dataclass(frozen=True)
class RobotLimits:
    radius: float
    v_max: float
    w_max: float


@dataclass(frozen=True)
class Scenario:
    name: str
    duration_s: float
    dt: float
    robot_start: Pose
    target_path: tuple[Waypoint, ...]
    obstacles: tuple[Circle, ...]
    desired_follow_dist: float
    band_tolerance: float
    lose_dist: float
    sensor_max: float
    robot: RobotLimits
    sensor_noise_std: float = 0.0

    def validation_errors(self) -> list[str]:
        errors = []
        if not self.dt > 0:
            errors.append(f"{self.name}: dt must be > 0")
        elif self.duration_s < self.dt:
            errors.append(f"{self.name}: duration_s must be >= dt")
        if not self.target_path:
            errors.append(f"{self.name}: target_path needs at least one waypoint")
        if any(w.speed < 0 for w in self.target_path):
            errors.append(f"{self.name}: waypoint speeds must be >= 0")
        if any(c.radius <= 0 for c in self.obstacles):
            errors.append(f"{self.name}: obstacle radii must be > 0")
        if not self.desired_follow_dist > self.robot.radius:
            errors.append(f"{self.name}: desired_follow_dist must exceed the robot radius")
        if not self.lose_dist > self.desired_follow_dist:
            errors.append(f"{self.name}: lose_dist must exceed desired_follow_dist")
        if not self.band_tolerance > 0:
            errors.append(f"{self.name}: band_tolerance must be > 0")
        if not self.sensor_max > 0:
            errors.append(f"{self.name}: sensor_max must be > 0")
        if not (self.robot.radius > 0 and self.robot.v_max > 0 and self.robot.w_max > 0):
            errors.append(f"{self.name}: robot radius and limits must be > 0")
        if self.sensor_noise_std < 0:
            errors.append(f"{self.name}: sensor_noise_std must be >= 0")
        return errors

    def validate(self) -> None:
        errors = self.validation_errors()
        if errors:
            raise InvalidSpec(errors)

    @property
    def ticks(self) -> int:
        return int(self.duration_s / self.dt + _TICK_EPS)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "duration_s": self.duration_s,
            "dt": self.dt,
            "robot_start": {
                "x": self.robot_start.x,
                "y": self.robot_start.y,
                "theta": self.robot_start.theta,
            },
            "target_path": [
                {"x": w.x, "y": w.y, "speed": w.speed} for w in self.target_path
            ],
            "obstacles": [
                {"x": c.x, "y": c.y, "radius": c.radius} for c in self.obstacles
            ],
            "desired_follow_dist": self.desired_follow_dist,
            "band_tolerance": self.band_tolerance,
            "lose_dist": self.lose_dist,
            "sensor_max": self.sensor_max,
            "robot": {
                "radius": self.robot.radius,
                "v_max": self.robot.v_max,
                "w_max": self.robot.w_max,
            },
            "sensor_noise_std": self.sensor_noise_std,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Scenario":
        start = d.get("robot_start", {})
        robot = d.get("robot", {})
        return cls(
            name=str(d.get("name", "unnamed")),
            duration_s=float(d.get("duration_s", 0.0)),
            dt=float(d.get("dt", 0.05)),
            robot_start=Pose(
                x=float(start.get("x", 0.0)),
                y=float(start.get("y", 0.0)),
                theta=normalize_angle(float(start.get("theta", 0.0))),
            ),
            target_path=tuple(
                Waypoint(float(w["x"]), float(w["y"]), float(w.get("speed", 0.0)))
                for w in d.get("target_path", ())
            ),
            obstacles=tuple(
                Circle(float(c["x"]), float(c["y"]), float(c["radius"]))
                for c in d.get("obstacles", ())
            ),
            desired_follow_dist=float(d.get("desired_follow_dist", 1.5)),
            band_tolerance=float(d.get("band_tolerance", 0.5)),
            lose_dist=float(d.get("lose_dist", 8.0)),
            sensor_max=float(d.get("sensor_max", 5.0)),
            robot=RobotLimits(
                radius=float(robot.get("radius", 0.25)),
                v_max=float(robot.get("v_max", 1.0)),
                w_max=float(robot.get("w_max", 2.5)),
            ),
            sensor_noise_std=float(d.get("sensor_noise_std", 0.0)),
        )


@dataclass(frozen=True)
class TrajectoryRow:
    t: float
    x: float
    y: float
    theta: float
    tx: float
    ty: float
    dist: float

    def to_dict(self) -> dict[str, float]:
        return {
            "t": self.t, "x": self.x, "y": self.y, "theta": self.theta,
            "tx": self.tx, "ty": self.ty, "dist": self.dist,
        }


@dataclass(frozen=True)
class ScenarioResult:
    scenario_name: str
    ticks: int
    band_fraction: float
    rms_dist_error: float
    collisions: int
    target_lost: bool
    trajectory: tuple[TrajectoryRow, ...]

    def summary(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario_name,
            "ticks": self.ticks,
            "band_fraction": self.band_fraction,
            "rms_dist_error": self.rms_dist_error,
            "collisions": self.collisions,
            "target_lost": self.target_lost,
        }


def sense(
    robot: Pose,
    target: tuple[float, float],
    obstacles: Sequence[Circle],
    sensor_max: float,
    own_speed: float = 0.0,
) -> SensorFrame:
    """Geometric sensor model: target polar coordinates + sector min-ranges.

    Sectors relative to heading: front [-pi/6, pi/6], left (pi/6, pi/2],
    right [-pi/2, -pi/6). Obstacles behind the robot are invisible. Sector
    ranges are center distance minus radius, clamped into [0, sensor_max];
    an empty sector reads sensor_max.
    """
    dx, dy = target[0] - robot.x, target[1] - robot.y
    dist = math.hypot(dx, dy)
    bearing = normalize_angle(math.atan2(dy, dx) - robot.theta)

    front = left = right = sensor_max
    sixth = math.pi / 6.0
    half = math.pi / 2.0
    for obs in obstacles:
        ox, oy = obs.x - robot.x, obs.y - robot.y
        rel = normalize_angle(math.atan2(oy, ox) - robot.theta)
        rng = min(max(math.hypot(ox, oy) - obs.radius, 0.0), sensor_max)
        if -sixth <= rel <= sixth:
            front = min(front, rng)
        elif sixth < rel <= half:
            left = min(left, rng)
        elif -half <= rel < -sixth:
            right = min(right, rng)
    return SensorFrame(
        dist_to_target=dist,
        bearing_to_target=bearing,
        obst_front=front,
        obst_left=left,
        obst_right=right,
        own_speed=own_speed,
    )


def step_robot(pose: Pose, cmd: DriveCommand, limits: RobotLimits, dt: float) -> Pose:
    """One explicit-Euler step under the robot's velocity limits."""
    v = min(max(cmd.v, -limits.v_max), limits.v_max)
    w = min(max(cmd.w, -limits.w_max), limits.w_max)
    return Pose(
        x=pose.x + v * math.cos(pose.theta) * dt,
        y=pose.y + v * math.sin(pose.theta) * dt,
        theta=normalize_angle(pose.theta + w * dt),
    )


@dataclass
class _TargetWalker:
    """Mutable cursor advancing a point along the waypoint path in real time."""

    path: tuple[Waypoint, ...]
    seg: int = 0
    x: float = field(init=False)
    y: float = field(init=False)

    def __post_init__(self) -> None:
        self.x, self.y = self.path[0].x, self.path[0].y

    def advance(self, dt: float) -> None:
        budget = dt
        while budget > 0 and self.seg < len(self.path) - 1:
            speed = self.path[self.seg].speed
            if speed <= 0:
                return
            nxt = self.path[self.seg + 1]
            gap = math.hypot(nxt.x - self.x, nxt.y - self.y)
            hop = speed * budget
            if hop < gap:
                self.x += (nxt.x - self.x) * hop / gap
                self.y += (nxt.y - self.y) * hop / gap
                return
            self.x, self.y = nxt.x, nxt.y
            budget -= gap / speed
            self.seg += 1


def _noisy(frame: SensorFrame, rng: random.Random, std: float, sensor_max: float) -> SensorFrame:
    def rngval(x: float, hi: float | None) -> float:
        x += rng.gauss(0.0, std)
        x = max(x, 0.0)
        return min(x, hi) if hi is not None else x

    return replace(
        frame,
        dist_to_target=rngval(frame.dist_to_target, None),
        obst_front=rngval(frame.obst_front, sensor_max),
        obst_left=rngval(frame.obst_left, sensor_max),
        obst_right=rngval(frame.obst_right, sensor_max),
    )


def run_scenario(policy: Policy, scenario: Scenario, seed: int = 0) -> ScenarioResult:
    """Close the loop for the scenario's full duration and score the run.

    Tick order: sense at the current state, evaluate the policy, step the
    robot, advance the target, record. Metrics cover the recorded ticks;
    band fraction and RMS distance error skip a grace period of the first
    10% of ticks during which the robot is legitimately out of band.
    """
    scenario.validate()
    rng = random.Random(seed)
    limits = scenario.robot
    pose = scenario.robot_start
    walker = _TargetWalker(scenario.target_path)
    ticks = scenario.ticks
    grace = int(0.10 * ticks)
    own_speed = 0.0

    def dist_to_target() -> float:
        return math.hypot(walker.x - pose.x, walker.y - pose.y)

    rows = [TrajectoryRow(0.0, pose.x, pose.y, pose.theta, walker.x, walker.y, dist_to_target())]
    in_band = 0
    included = 0
    sq_err = 0.0
    collisions = 0
    lost = False

    for k in range(1, ticks + 1):
        frame = sense(pose, (walker.x, walker.y), scenario.obstacles, scenario.sensor_max, own_speed)
        if scenario.sensor_noise_std > 0:
            frame = _noisy(frame, rng, scenario.sensor_noise_std, scenario.sensor_max)
        cmd = evaluate(policy, frame)
        own_speed = min(max(cmd.v, -limits.v_max), limits.v_max)
        pose = step_robot(pose, cmd, limits, scenario.dt)
        walker.advance(scenario.dt)

        dist = dist_to_target()
        rows.append(TrajectoryRow(k * scenario.dt, pose.x, pose.y, pose.theta, walker.x, walker.y, dist))

        clearance = min(
            (math.hypot(c.x - pose.x, c.y - pose.y) - c.radius for c in scenario.obstacles),
            default=math.inf,
        )
        if clearance < limits.radius:
            collisions += 1
        if dist > scenario.lose_dist:
            lost = True
        if k > grace:
            included += 1
            err = dist - scenario.desired_follow_dist
            sq_err += err * err
            if abs(err) <= scenario.band_tolerance:
                in_band += 1

    return ScenarioResult(
        scenario_name=scenario.name,
        ticks=ticks,
        band_fraction=in_band / included,
        rms_dist_error=math.sqrt(sq_err / included),
        collisions=collisions,
        target_lost=lost,
        trajectory=tuple(rows),
    )


# --- scenario suite ---------------------------------------------------------


def builtin_suite(
    dt: float = 0.05,
    duration_s: float = 60.0,
    desired_follow_dist: float = 1.5,
    band_tolerance: float = 0.5,
    lose_dist: float = 8.0,
    sensor_max: float = 5.0,
    robot: RobotLimits = RobotLimits(radius=0.25, v_max=1.0, w_max=2.5),
) -> list[Scenario]:
    """Four standard follow scenarios; every threshold is overridable."""
    common = dict(
        duration_s=duration_s,
        dt=dt,
        desired_follow_dist=desired_follow_dist,
        band_tolerance=band_tolerance,
        lose_dist=lose_dist,
        sensor_max=sensor_max,
        robot=robot,
    )
    return [
        Scenario(
            name="straight_walk",
            robot_start=Pose(0.0, 0.0, 0.0),
            target_path=(Waypoint(3.0, 0.0, 0.4), Waypoint(10.0, 0.0, 0.0)),
            obstacles=(),
            **common,
        ),
        Scenario(
            name="l_walk",
            robot_start=Pose(0.0, 0.0, 0.0),
            target_path=(
                Waypoint(3.0, 0.0, 0.4),
                Waypoint(8.0, 0.0, 0.4),
                Waypoint(8.0, 5.0, 0.0),
            ),
            obstacles=(),
            **common,
        ),
        Scenario(
            name="corridor",
            robot_start=Pose(0.0, 0.0, 0.0),
            target_path=(Waypoint(3.0, 0.0, 0.4), Waypoint(12.0, 0.0, 0.0)),
            obstacles=(Circle(5.0, 0.25, 0.3), Circle(8.0, -0.25, 0.3)),
            **common,
        ),
        Scenario(
            name="speed_burst",
            robot_start=Pose(0.0, 0.0, 0.0),
            target_path=(
                Waypoint(3.0, 0.0, 0.3),
                Waypoint(6.0, 0.0, 0.8),
                Waypoint(9.0, 0.0, 0.3),
                Waypoint(12.0, 0.0, 0.0),
            ),
            obstacles=(),
            **common,
        ),
    ]


def load_scenarios(path: str) -> list[Scenario]:
    """Read one or many scenarios from a YAML file.

    Accepts a single scenario document, a list of scenario documents, or a
    mapping with a ``scenarios`` list.
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if isinstance(data, Mapping) and "scenarios" in data:
        data = data["scenarios"]
    docs: Iterable[Mapping[str, Any]]
    if isinstance(data, Mapping):
        docs = [data]
    elif isinstance(data, list):
        docs = data
    else:
        raise InvalidSpec([f"{path}: expected a scenario document or list"])
    scenarios = [Scenario.from_dict(d) for d in docs]
    for s in scenarios:
        s.validate()
    return scenarios


def save_scenarios(path: str, scenarios: Sequence[Scenario]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump({"scenarios": [s.to_dict() for s in scenarios]}, fh, sort_keys=False)


def export_trajectory(result: ScenarioResult, path: str) -> None:
    """Write the trajectory as a CSV table: t, x, y, theta, tx, ty, dist."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "y", "theta", "tx", "ty", "dist"])
        for row in result.trajectory:
            writer.writerow([row.t, row.x, row.y, row.theta, row.tx, row.ty, row.dist])
