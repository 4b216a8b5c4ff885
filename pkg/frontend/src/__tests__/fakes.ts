/** Test doubles: a fake service that replays recorded session fixtures. */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { FetchLike } from "../api.js";
import type { TranscriptMessage } from "../types.js";

export interface FixtureStep {
  action: string;
  messages: TranscriptMessage[];
  phase: string;
  body?: Record<string, unknown>;
}

export interface SessionFixture {
  description: string;
  session_id: string;
  final_phase: string;
  message_count: number;
  steps: FixtureStep[];
}

export function loadFixture(name: string): SessionFixture {
  const here = dirname(fileURLToPath(import.meta.url));
  return JSON.parse(readFileSync(join(here, "fixtures", name), "utf-8")) as SessionFixture;
}

export function loadJson<T>(name: string): T {
  const here = dirname(fileURLToPath(import.meta.url));
  return JSON.parse(readFileSync(join(here, "fixtures", name), "utf-8")) as T;
}

export function allMessages(fixture: SessionFixture): TranscriptMessage[] {
  return fixture.steps.flatMap((step) => step.messages);
}

/** Poll until `condition` holds; fails loudly instead of hanging a test. */
export async function until(condition: () => boolean, what = "condition"): Promise<void> {
  for (let i = 0; i < 4000; i += 1) {
    if (condition()) {
      return;
    }
    await new Promise((resolve) => setTimeout(resolve, 1));
  }
  throw new Error(`timed out waiting for ${what}`);
}

interface Waiter {
  resolve: () => void;
  reject: (error: Error) => void;
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

/**
 * Serves a recorded session over the real wire protocol, one step at a time.
 *
 * `release()` makes the next recorded step visible, waking parked long-polls.
 * `dropConnections(n)` kills the in-flight poll and fails the next n fetches,
 * simulating a network outage.  After an outage the server deliberately
 * replays the last few already-delivered messages on the next poll, so a
 * client is only correct if it deduplicates by seq.
 */
export class ScriptedServer {
  private readonly visible: TranscriptMessage[] = [];
  private phase: string;
  private cursor = 0;
  private waiters: Waiter[] = [];
  private failBudget = 0;
  private sloppyResend = 0;
  readonly feedbackBodies: Record<string, unknown>[] = [];
  readonly requests: string[] = [];

  constructor(
    private readonly fixture: SessionFixture,
    private readonly resendWindow = 3,
    /** How long an empty long-poll holds before returning, like wait_s. */
    private readonly pollCapMs = 15,
  ) {
    this.phase = fixture.steps[0]?.phase ?? "Intake";
  }

  get released(): number {
    return this.cursor;
  }

  get exhausted(): boolean {
    return this.cursor >= this.fixture.steps.length;
  }

  release(): FixtureStep | null {
    const step = this.fixture.steps[this.cursor];
    if (!step) {
      return null;
    }
    this.cursor += 1;
    this.visible.push(...step.messages);
    this.phase = step.phase;
    for (const waiter of this.waiters.splice(0)) {
      waiter.resolve();
    }
    return step;
  }

  releaseAll(): void {
    while (this.release() !== null) {
      // drain
    }
  }

  dropConnections(count = 1): void {
    this.failBudget += count;
    this.sloppyResend = this.resendWindow;
    for (const waiter of this.waiters.splice(0)) {
      waiter.reject(new TypeError("network connection lost"));
    }
  }

  /** Unpark any waiting poll without new content (used in teardown). */
  wakeAll(): void {
    for (const waiter of this.waiters.splice(0)) {
      waiter.resolve();
    }
  }

  readonly fetch: FetchLike = async (input, init) => {
    const url = new URL(input, "http://console.test");
    const method = init?.method ?? "GET";
    this.requests.push(`${method} ${url.pathname}${url.search}`);
    if (this.failBudget > 0) {
      this.failBudget -= 1;
      throw new TypeError("network connection lost");
    }
    if (url.pathname.endsWith("/transcript")) {
      return this.transcript(url);
    }
    if (url.pathname.endsWith("/feedback") && method === "POST") {
      this.feedbackBodies.push(JSON.parse(String(init?.body)) as Record<string, unknown>);
      return new Response(null, { status: 204 });
    }
    if (url.pathname.endsWith("/advance") && method === "POST") {
      return new Response(null, { status: 204 });
    }
    throw new TypeError(`unhandled route: ${method} ${url.pathname}`);
  };

  private async transcript(url: URL): Promise<Response> {
    const since = Number(url.searchParams.get("since_seq") ?? "-1");
    const waitS = Number(url.searchParams.get("wait_s") ?? "0");
    let from = since;
    if (this.sloppyResend > 0) {
      // Imitate a server resuming from an older checkpoint after the outage.
      from = Math.max(-1, since - this.sloppyResend);
      this.sloppyResend = 0;
    }
    let fresh = this.visible.filter((m) => m.seq > from);
    if (fresh.length === 0 && waitS > 0 && !this.exhausted) {
      // Hold the poll until new content lands or the hold time expires, the
      // same contract as the real endpoint's wait_s.  A phase-only change is
      // therefore observable on the next expiry even with no new messages.
      const parked = new Promise<void>((resolve, reject) => {
        this.waiters.push({ resolve, reject: reject as (error: Error) => void });
      });
      const expiry = new Promise<void>((resolve) => setTimeout(resolve, this.pollCapMs));
      await Promise.race([parked, expiry]);
      fresh = this.visible.filter((m) => m.seq > from);
    }
    return jsonResponse({ messages: fresh, phase: this.phase });
  }
}
