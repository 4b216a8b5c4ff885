/** Wires the operator console together against a live session service. */

import { ApiClient, ApiError } from "./api.js";
import { DEFAULT_TASKSPEC } from "./default_taskspec.js";
import { FeedbackForm } from "./feedback.js";
import { FeedLoop, TranscriptFeed } from "./feed.js";
import type { FeedStatus } from "./feed.js";
import { Playback, drawFrame, drawStrip } from "./playback.js";
import { EventQueue } from "./queue.js";
import { TimelineView } from "./timeline.js";
import { isTerminal } from "./types.js";
import type { SessionView } from "./types.js";

const api = new ApiClient("");
const queue = new EventQueue();

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) {
    throw new Error(`missing element #${id}`);
  }
  return found as T;
}

const STATUS_LABELS: Record<FeedStatus, string> = {
  connecting: "connecting…",
  live: "live",
  reconnecting: "reconnecting…",
  done: "finished",
  stopped: "paused",
};

interface OpenSession {
  id: string;
  mode: string;
  loop: FeedLoop;
  feed: TranscriptFeed;
}

let open: OpenSession | null = null;
let playback: Playback | null = null;
let playTimer: number | null = null;

// ---------------------------------------------------------------- sessions

async function refreshSessionList(): Promise<void> {
  const listEl = el<HTMLUListElement>("session-list");
  let sessions: SessionView[];
  try {
    sessions = await api.listSessions();
  } catch {
    return;
  }
  listEl.replaceChildren();
  for (const view of sessions) {
    const item = document.createElement("li");
    const button = document.createElement("button");
    button.type = "button";
    button.className = "session-link";
    button.textContent = `${view.session_id} · ${view.phase} · ${view.mode}`;
    button.addEventListener("click", () => {
      void queue.push(() => openSession(view.session_id, view.mode));
    });
    item.append(button);
    listEl.append(item);
  }
}

async function createSession(): Promise<void> {
  const errorEl = el("create-error");
  errorEl.textContent = "";
  let taskspec: Record<string, unknown>;
  try {
    taskspec = JSON.parse(el<HTMLTextAreaElement>("taskspec").value);
  } catch (error) {
    errorEl.textContent = `Task spec is not valid JSON: ${String(error)}`;
    return;
  }
  const mode = el<HTMLSelectElement>("mode").value as "auto" | "manual";
  const seed = Number(el<HTMLInputElement>("seed").value) || 0;
  try {
    const sessionId = await api.createSession({ taskspec, mode, seed });
    await refreshSessionList();
    await openSession(sessionId, mode);
  } catch (error) {
    if (error instanceof ApiError) {
      const detail = Array.isArray(error.detail)
        ? error.detail.join("; ")
        : String(error.detail);
      errorEl.textContent = `Rejected: ${detail}`;
    } else {
      errorEl.textContent = "Could not reach the service.";
    }
  }
}

// ------------------------------------------------------------ session view

function setPhaseBadge(phase: string): void {
  const badge = el("phase-badge");
  badge.textContent = phase;
  badge.className = `phase phase-${phase.toLowerCase()}`;
}

function setStatus(status: FeedStatus): void {
  const banner = el("status-banner");
  banner.textContent = STATUS_LABELS[status];
  banner.className = `status status-${status}`;
}

async function refreshDetails(sessionId: string): Promise<void> {
  let view: SessionView;
  try {
    view = await api.view(sessionId);
  } catch {
    return;
  }
  el<HTMLPreElement>("policy").textContent = view.policy ?? "(no policy yet)";
  renderMetrics(view);
  renderScenarioButtons(view);
}

function renderMetrics(view: SessionView): void {
  const table = el<HTMLTableElement>("metrics");
  table.replaceChildren();
  if (!view.metrics) {
    return;
  }
  const head = table.insertRow();
  for (const label of ["scenario", "band", "rms", "collisions", "lost"]) {
    const cell = document.createElement("th");
    cell.textContent = label;
    head.append(cell);
  }
  for (const s of view.metrics.scenarios) {
    const row = table.insertRow();
    row.insertCell().textContent = s.scenario;
    row.insertCell().textContent = s.band_fraction.toFixed(3);
    row.insertCell().textContent = s.rms_dist_error.toFixed(3);
    row.insertCell().textContent = String(s.collisions);
    row.insertCell().textContent = s.target_lost ? "yes" : "no";
  }
  const summary = table.insertRow();
  const cell = summary.insertCell();
  cell.colSpan = 5;
  cell.textContent = `objective ${view.metrics.objective.toFixed(4)} · ${view.metrics.passed ? "passing" : "failing"}`;
}

function renderScenarioButtons(view: SessionView): void {
  const bar = el("scenario-buttons");
  bar.replaceChildren();
  if (!view.metrics) {
    bar.textContent = "Scenario playback appears after the first test report.";
    return;
  }
  for (const s of view.metrics.scenarios) {
    const button = document.createElement("button");
    button.type = "button";
    button.textContent = s.scenario;
    button.addEventListener("click", () => {
      void queue.push(() => loadTrajectory(view.session_id, s.scenario));
    });
    bar.append(button);
  }
}

// ---------------------------------------------------------------- playback

function stopPlaying(): void {
  if (playTimer !== null) {
    window.clearInterval(playTimer);
    playTimer = null;
    el("play-btn").textContent = "▶";
  }
}

function drawAt(t: number): void {
  if (!playback) {
    return;
  }
  const world = el<HTMLCanvasElement>("world").getContext("2d");
  const strip = el<HTMLCanvasElement>("strip").getContext("2d");
  if (!world || !strip) {
    return;
  }
  drawFrame(world, playback, t);
  drawStrip(strip, playback, t);
  const frame = playback.empty ? null : playback.frameAt(t);
  el("time-label").textContent = frame ? `${frame.t.toFixed(2)}s` : "—";
}

async function loadTrajectory(sessionId: string, scenario: string): Promise<void> {
  stopPlaying();
  try {
    playback = new Playback(await api.trajectory(sessionId, scenario));
  } catch (error) {
    playback = null;
    el("time-label").textContent =
      error instanceof ApiError ? String(error.detail) : "trajectory unavailable";
    return;
  }
  const scrubber = el<HTMLInputElement>("scrubber");
  scrubber.min = "0";
  scrubber.max = String(playback.duration);
  scrubber.step = String(playback.table.scenario.dt);
  scrubber.value = "0";
  drawAt(0);
}

function togglePlay(): void {
  if (!playback || playback.empty) {
    return;
  }
  if (playTimer !== null) {
    stopPlaying();
    return;
  }
  el("play-btn").textContent = "⏸";
  const scrubber = el<HTMLInputElement>("scrubber");
  playTimer = window.setInterval(() => {
    if (!playback) {
      stopPlaying();
      return;
    }
    // 50 ms wall-clock per 4x realtime step keeps long runs watchable.
    const next = Number(scrubber.value) + playback.table.scenario.dt * 4;
    if (next >= playback.duration) {
      scrubber.value = String(playback.duration);
      drawAt(playback.duration);
      stopPlaying();
      return;
    }
    scrubber.value = String(next);
    drawAt(next);
  }, 50);
}

// ------------------------------------------------------------- open a session

async function openSession(sessionId: string, mode: string): Promise<void> {
  open?.loop.stop();
  stopPlaying();
  playback = null;

  el("session-view").hidden = false;
  el("session-id").textContent = sessionId;
  el<HTMLPreElement>("policy").textContent = "(no policy yet)";
  el<HTMLTableElement>("metrics").replaceChildren();
  el("scenario-buttons").replaceChildren();
  el("time-label").textContent = "—";

  const timeline = new TimelineView(el("timeline"));
  timeline.clear();

  const form = new FeedbackForm(document, (payload) => api.feedback(sessionId, payload));
  el("feedback-slot").replaceChildren(form.root);

  const advanceButton = el<HTMLButtonElement>("advance-btn");
  advanceButton.hidden = mode !== "manual";
  advanceButton.onclick = () => {
    void queue.push(async () => {
      try {
        await api.advance(sessionId);
      } catch {
        // A 409 just means the session is parked or finished; the feed shows it.
      }
    });
  };

  const feed = new TranscriptFeed();
  const loop = new FeedLoop(api, sessionId, feed, {
    onMessages: (messages) => {
      void queue.push(() => {
        timeline.append(messages);
        // Reports and terminal messages change what the detail panes show.
        if (messages.some((m) => ["test_report", "acceptance", "policy_draft"].includes(m.kind))) {
          return refreshDetails(sessionId);
        }
        return undefined;
      });
    },
    onPhase: (phase) => {
      void queue.push(() => {
        setPhaseBadge(phase);
        form.setPhase(phase);
        advanceButton.disabled = isTerminal(phase);
        if (isTerminal(phase)) {
          void refreshSessionList();
        }
      });
    },
    onStatus: (status) => {
      void queue.push(() => setStatus(status));
    },
  });

  open = { id: sessionId, mode, loop, feed };
  void loop.run();
  await refreshDetails(sessionId);
}

// ------------------------------------------------------------------- boot

function boot(): void {
  el<HTMLTextAreaElement>("taskspec").value = JSON.stringify(DEFAULT_TASKSPEC, null, 2);
  el("create-btn").addEventListener("click", () => {
    void queue.push(createSession);
  });
  el("refresh-btn").addEventListener("click", () => {
    void queue.push(refreshSessionList);
  });
  el("play-btn").addEventListener("click", togglePlay);
  el<HTMLInputElement>("scrubber").addEventListener("input", (event) => {
    stopPlaying();
    drawAt(Number((event.target as HTMLInputElement).value));
  });
  void api
    .health()
    .then(() => {
      el("health-dot").classList.add("ok");
    })
    .catch(() => {
      el("health-dot").classList.add("bad");
    });
  void refreshSessionList();
}

boot();
