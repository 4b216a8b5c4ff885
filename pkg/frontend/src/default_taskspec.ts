/** Prefill for the create-session form: the bundled target-following task. */

export const DEFAULT_TASKSPEC = {
  robot_params: {
    max_linear_speed_mps: 1.0,
    max_angular_speed_radps: 2.5,
    robot_radius_m: 0.25,
    sensor_range_m: 5.0,
  },
  requirements: [
    "Follow a walking person at a steady distance of about 1.5 meters.",
    "Avoid static obstacles along the corridor without losing the person.",
    "Maintain smooth speed so the person is never lost or crowded.",
  ],
  constraints: [
    "Planar motion only; no reverse driving expected in normal operation.",
    "Stop safely whenever no behavior rule applies.",
  ],
};
