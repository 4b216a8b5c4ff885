/** Wire types mirroring the session service's JSON responses. */

export interface TranscriptMessage {
  session_id: string;
  seq: number;
  from: string;
  to: string;
  kind: string;
  payload: Record<string, unknown>;
  timestamp: number;
}

export interface TranscriptChunk {
  messages: TranscriptMessage[];
  phase: string;
}

export interface ScenarioMetrics {
  scenario: string;
  ticks: number;
  band_fraction: number;
  rms_dist_error: number;
  collisions: number;
  target_lost: boolean;
}

export interface SessionView {
  session_id: string;
  phase: string;
  mode: string;
  counters: {
    tuning_rounds_used: number;
    escalations_used: number;
    transcript_len: number;
  };
  last_messages: TranscriptMessage[];
  policy: string | null;
  metrics: {
    passed: boolean;
    objective: number;
    scenarios: ScenarioMetrics[];
  } | null;
}

export interface Pose {
  x: number;
  y: number;
  theta: number;
}

export interface Obstacle {
  x: number;
  y: number;
  radius: number;
}

export interface ScenarioInfo {
  name: string;
  duration_s: number;
  dt: number;
  robot_start: Pose;
  target_path: { x: number; y: number; speed: number }[];
  obstacles: Obstacle[];
  desired_follow_dist: number;
  band_tolerance: number;
  lose_dist: number;
  sensor_max: number;
  robot: { radius: number; v_max: number; w_max: number };
  sensor_noise_std: number;
}

export interface TrajectoryTable {
  scenario: ScenarioInfo;
  columns: string[];
  rows: number[][];
  metrics: Record<string, number | boolean>;
}

export type Verdict = "Approve" | "Adjust" | "Reject";

export const FEEDBACK_CATEGORIES = [
  "TooClose",
  "TooFar",
  "HitObstacle",
  "TooSlow",
  "TooJerky",
] as const;

export type FeedbackCategory = (typeof FEEDBACK_CATEGORIES)[number];

export interface FeedbackPayload {
  verdict: Verdict;
  categories: FeedbackCategory[];
  notes: string;
}

export const TERMINAL_PHASES = ["Accepted", "Failed"] as const;

export function isTerminal(phase: string): boolean {
  return (TERMINAL_PHASES as readonly string[]).includes(phase);
}
