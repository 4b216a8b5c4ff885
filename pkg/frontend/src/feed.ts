/** Long-poll transcript feed with exactly-once delivery and reconnect. */

import type { ApiClient } from "./api.js";
import { isTerminal } from "./types.js";
import type { TranscriptChunk, TranscriptMessage } from "./types.js";

export type FeedStatus = "connecting" | "live" | "reconnecting" | "done" | "stopped";

export interface FeedHandlers {
  /** New messages, already deduplicated and in seq order. */
  onMessages(messages: TranscriptMessage[]): void;
  /** Current orchestration phase, reported after every successful poll. */
  onPhase(phase: string): void;
  /** Connection lifecycle updates. */
  onStatus(status: FeedStatus): void;
}

/**
 * Accumulates transcript messages, guaranteeing each seq is accepted once
 * and in order regardless of chunk overlap or within-chunk ordering.
 */
export class TranscriptFeed {
  readonly messages: TranscriptMessage[] = [];
  phase = "";
  lastSeq = -1;

  /** Fold a server chunk in; returns only the newly accepted messages. */
  ingest(chunk: TranscriptChunk): TranscriptMessage[] {
    const sorted = [...chunk.messages].sort((a, b) => a.seq - b.seq);
    const accepted: TranscriptMessage[] = [];
    for (const message of sorted) {
      if (message.seq <= this.lastSeq) {
        continue; // replayed by the server after a reconnect
      }
      this.messages.push(message);
      this.lastSeq = message.seq;
      accepted.push(message);
    }
    this.phase = chunk.phase;
    return accepted;
  }

  get done(): boolean {
    return isTerminal(this.phase);
  }
}

export interface FeedLoopOptions {
  /** Long-poll hold time sent to the server, in seconds. */
  waitS?: number;
  /** Delay before retrying after a dropped connection, in ms. */
  retryMs?: number;
  /** Injectable for tests; defaults to setTimeout. */
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/**
 * Drives one TranscriptFeed against the service: long-polls from the last
 * acknowledged seq, retries on connection loss, and stops once the session
 * reaches a terminal phase (after a final catch-up poll so no tail message
 * published concurrently with the phase change is missed).
 */
export class FeedLoop {
  private stopped = false;
  private readonly waitS: number;
  private readonly retryMs: number;
  private readonly sleep: (ms: number) => Promise<void>;

  constructor(
    private readonly client: ApiClient,
    private readonly sessionId: string,
    private readonly feed: TranscriptFeed,
    private readonly handlers: FeedHandlers,
    options: FeedLoopOptions = {},
  ) {
    this.waitS = options.waitS ?? 20;
    this.retryMs = options.retryMs ?? 750;
    this.sleep = options.sleep ?? defaultSleep;
  }

  stop(): void {
    this.stopped = true;
  }

  async run(): Promise<void> {
    this.handlers.onStatus("connecting");
    while (!this.stopped) {
      let chunk: TranscriptChunk;
      try {
        chunk = await this.client.transcript(this.sessionId, this.feed.lastSeq, this.waitS);
      } catch (error) {
        if (this.stopped) {
          break;
        }
        this.handlers.onStatus("reconnecting");
        await this.sleep(this.retryMs);
        continue;
      }
      this.deliver(chunk);
      this.handlers.onStatus("live");
      if (this.feed.done) {
        await this.drainTail();
        this.handlers.onStatus("done");
        return;
      }
    }
    this.handlers.onStatus("stopped");
  }

  private deliver(chunk: TranscriptChunk): void {
    const accepted = this.feed.ingest(chunk);
    if (accepted.length > 0) {
      this.handlers.onMessages(accepted);
    }
    this.handlers.onPhase(this.feed.phase);
  }

  private async drainTail(): Promise<void> {
    // The phase flag can land a beat before the closing message is visible.
    try {
      this.deliver(await this.client.transcript(this.sessionId, this.feed.lastSeq, 0));
    } catch {
      // Already have a terminal phase; a failed drain loses nothing durable.
    }
  }
}
