/** Client-side trajectory playback: scrub math plus canvas rendering. */

import type { TrajectoryTable } from "./types.js";

export interface Frame {
  t: number;
  x: number;
  y: number;
  theta: number;
  tx: number;
  ty: number;
  dist: number;
}

export interface ViewTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

function toFrame(row: number[]): Frame {
  const [t, x, y, theta, tx, ty, dist] = row;
  return { t, x, y, theta, tx, ty, dist };
}

/** Immutable wrapper over one trajectory table with scrub/lookup helpers. */
export class Playback {
  readonly frames: Frame[];

  constructor(readonly table: TrajectoryTable) {
    this.frames = table.rows.map(toFrame);
  }

  get empty(): boolean {
    return this.frames.length === 0;
  }

  get duration(): number {
    return this.empty ? 0 : this.frames[this.frames.length - 1].t;
  }

  /** Index of the frame at or just before time `t`, clamped to the table. */
  indexAt(t: number): number {
    if (this.empty) {
      return -1;
    }
    if (t <= this.frames[0].t) {
      return 0;
    }
    let lo = 0;
    let hi = this.frames.length - 1;
    while (lo < hi) {
      const mid = (lo + hi + 1) >> 1;
      if (this.frames[mid].t <= t) {
        lo = mid;
      } else {
        hi = mid - 1;
      }
    }
    return lo;
  }

  frameAt(t: number): Frame {
    const index = this.indexAt(t);
    if (index < 0) {
      throw new Error("empty trajectory");
    }
    return this.frames[index];
  }

  /** Whether a frame sits inside the desired-distance band. */
  inBand(frame: Frame): boolean {
    const { desired_follow_dist, band_tolerance } = this.table.scenario;
    return Math.abs(frame.dist - desired_follow_dist) <= band_tolerance;
  }

  /** Times at which the robot body overlaps an obstacle disc. */
  collisionTimes(): number[] {
    const { obstacles, robot } = this.table.scenario;
    const times: number[] = [];
    for (const frame of this.frames) {
      const hit = obstacles.some(
        (o) => Math.hypot(frame.x - o.x, frame.y - o.y) < o.radius + robot.radius,
      );
      if (hit) {
        times.push(frame.t);
      }
    }
    return times;
  }

  /** World-space bounding box covering the whole run, obstacles included. */
  bounds(): { minX: number; maxX: number; minY: number; maxY: number } {
    let minX = Infinity;
    let maxX = -Infinity;
    let minY = Infinity;
    let maxY = -Infinity;
    const grow = (x: number, y: number, pad: number) => {
      minX = Math.min(minX, x - pad);
      maxX = Math.max(maxX, x + pad);
      minY = Math.min(minY, y - pad);
      maxY = Math.max(maxY, y + pad);
    };
    for (const frame of this.frames) {
      grow(frame.x, frame.y, 0);
      grow(frame.tx, frame.ty, this.table.scenario.band_tolerance);
    }
    for (const o of this.table.scenario.obstacles) {
      grow(o.x, o.y, o.radius);
    }
    if (!Number.isFinite(minX)) {
      return { minX: -1, maxX: 1, minY: -1, maxY: 1 };
    }
    return { minX, maxX, minY, maxY };
  }

  /** Uniform-scale fit of the world bounds into a width x height canvas. */
  fitTransform(width: number, height: number, margin = 24): ViewTransform {
    const { minX, maxX, minY, maxY } = this.bounds();
    const spanX = Math.max(maxX - minX, 1e-9);
    const spanY = Math.max(maxY - minY, 1e-9);
    const scale = Math.min(
      (width - 2 * margin) / spanX,
      (height - 2 * margin) / spanY,
    );
    return {
      scale,
      offsetX: margin - minX * scale + (width - 2 * margin - spanX * scale) / 2,
      // Canvas y grows downward; flip so world +y points up.
      offsetY: height - margin + minY * scale - (height - 2 * margin - spanY * scale) / 2,
    };
  }
}

export function toCanvas(view: ViewTransform, x: number, y: number): [number, number] {
  return [x * view.scale + view.offsetX, view.offsetY - y * view.scale];
}

interface Ctx2D {
  canvas: { width: number; height: number };
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  textAlign: CanvasTextAlign;
  globalAlpha: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
}

const COLORS = {
  backdrop: "#10141c",
  trail: "#3d4b63",
  robot: "#4cc9f0",
  target: "#f4a261",
  obstacle: "#6c757d",
  band: "rgba(82, 183, 136, 0.18)",
  bandEdge: "rgba(82, 183, 136, 0.55)",
  outOfBand: "#e76f51",
  collision: "#e63946",
  text: "#9aa5b5",
};

function circle(ctx: Ctx2D, x: number, y: number, r: number): void {
  ctx.beginPath();
  ctx.arc(x, y, Math.max(r, 1), 0, Math.PI * 2);
}

/** Paint the world view for time `t`: band ring, obstacles, trail, target, robot. */
export function drawFrame(ctx: Ctx2D, playback: Playback, t: number): void {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = COLORS.backdrop;
  ctx.fillRect(0, 0, width, height);
  if (playback.empty) {
    drawEmptyState(ctx);
    return;
  }
  const view = playback.fitTransform(width, height);
  const scenario = playback.table.scenario;
  const frame = playback.frameAt(t);
  const index = playback.indexAt(t);

  // Desired-distance band: ring centred on the target, edges at desired +/- tol.
  const [tx, ty] = toCanvas(view, frame.tx, frame.ty);
  const inner = (scenario.desired_follow_dist - scenario.band_tolerance) * view.scale;
  const outer = (scenario.desired_follow_dist + scenario.band_tolerance) * view.scale;
  ctx.strokeStyle = COLORS.bandEdge;
  ctx.lineWidth = 1;
  circle(ctx, tx, ty, outer);
  ctx.stroke();
  circle(ctx, tx, ty, Math.max(inner, 1));
  ctx.stroke();
  ctx.strokeStyle = COLORS.band;
  ctx.lineWidth = Math.max(outer - inner - 2, 1);
  circle(ctx, tx, ty, (inner + outer) / 2);
  ctx.stroke();
  ctx.lineWidth = 1;

  ctx.fillStyle = COLORS.obstacle;
  for (const o of scenario.obstacles) {
    const [ox, oy] = toCanvas(view, o.x, o.y);
    circle(ctx, ox, oy, o.radius * view.scale);
    ctx.fill();
  }

  ctx.strokeStyle = COLORS.trail;
  ctx.lineWidth = 1;
  ctx.beginPath();
  for (let i = 0; i <= index; i += 1) {
    const [px, py] = toCanvas(view, playback.frames[i].x, playback.frames[i].y);
    if (i === 0) {
      ctx.moveTo(px, py);
    } else {
      ctx.lineTo(px, py);
    }
  }
  ctx.stroke();

  ctx.fillStyle = COLORS.target;
  circle(ctx, tx, ty, 5);
  ctx.fill();

  const [rx, ry] = toCanvas(view, frame.x, frame.y);
  ctx.fillStyle = playback.inBand(frame) ? COLORS.robot : COLORS.outOfBand;
  circle(ctx, rx, ry, Math.max(scenario.robot.radius * view.scale, 4));
  ctx.fill();
  // Heading tick.
  ctx.strokeStyle = ctx.fillStyle;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(rx, ry);
  ctx.lineTo(rx + Math.cos(frame.theta) * 12, ry - Math.sin(frame.theta) * 12);
  ctx.stroke();

  ctx.fillStyle = COLORS.text;
  ctx.font = "12px sans-serif";
  ctx.textAlign = "left";
  ctx.fillText(
    `t=${frame.t.toFixed(2)}s  dist=${frame.dist.toFixed(2)}m`,
    8,
    height - 8,
  );
}

/** Distance-vs-time strip with the band shaded, excursions and collisions marked. */
export function drawStrip(ctx: Ctx2D, playback: Playback, t: number): void {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = COLORS.backdrop;
  ctx.fillRect(0, 0, width, height);
  if (playback.empty) {
    return;
  }
  const scenario = playback.table.scenario;
  const duration = Math.max(playback.duration, 1e-9);
  const maxDist = Math.max(
    scenario.desired_follow_dist + scenario.band_tolerance,
    ...playback.frames.map((f) => f.dist),
  );
  const xOf = (time: number) => (time / duration) * width;
  const yOf = (dist: number) => height - (dist / (maxDist * 1.05)) * height;

  const bandTop = yOf(scenario.desired_follow_dist + scenario.band_tolerance);
  const bandBottom = yOf(scenario.desired_follow_dist - scenario.band_tolerance);
  ctx.fillStyle = COLORS.band;
  ctx.fillRect(0, bandTop, width, bandBottom - bandTop);

  // Trace drawn per-segment so excursions outside the band stand out.
  ctx.lineWidth = 1.5;
  for (let i = 1; i < playback.frames.length; i += 1) {
    const prev = playback.frames[i - 1];
    const here = playback.frames[i];
    ctx.strokeStyle = playback.inBand(here) ? COLORS.robot : COLORS.outOfBand;
    ctx.beginPath();
    ctx.moveTo(xOf(prev.t), yOf(prev.dist));
    ctx.lineTo(xOf(here.t), yOf(here.dist));
    ctx.stroke();
  }

  ctx.fillStyle = COLORS.collision;
  for (const time of playback.collisionTimes()) {
    ctx.fillRect(xOf(time) - 1, 0, 2, 6);
  }

  ctx.strokeStyle = COLORS.text;
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(xOf(t), 0);
  ctx.lineTo(xOf(t), height);
  ctx.stroke();
}

export function drawEmptyState(ctx: Ctx2D): void {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = COLORS.text;
  ctx.font = "14px sans-serif";
  ctx.textAlign = "center";
  ctx.fillText("No trajectory yet — run a scenario once a policy exists.", width / 2, height / 2);
}
