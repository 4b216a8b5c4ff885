/** Thin typed client for the session service HTTP API. */

import type {
  FeedbackPayload,
  SessionView,
  TrajectoryTable,
  TranscriptChunk,
} from "./types.js";

/** Non-2xx reply, with the parsed `detail` body when the server sent one. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(`HTTP ${status}: ${typeof detail === "string" ? detail : JSON.stringify(detail)}`);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface CreateSessionRequest {
  taskspec: Record<string, unknown>;
  config?: Record<string, unknown>;
  seed?: number;
  mode?: "auto" | "manual";
}

export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly base: string = "",
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const response = await this.fetchFn(this.base + path, init);
    if (response.status === 204) {
      return null;
    }
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      body = null;
    }
    if (!response.ok) {
      const detail =
        body !== null && typeof body === "object" && "detail" in body
          ? (body as { detail: unknown }).detail
          : body;
      throw new ApiError(response.status, detail);
    }
    return body;
  }

  private post(path: string, body: unknown): Promise<unknown> {
    return this.request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async health(): Promise<{ status: string }> {
    return (await this.request("/healthz")) as { status: string };
  }

  async createSession(req: CreateSessionRequest): Promise<string> {
    const body = (await this.post("/sessions", req)) as { session_id: string };
    return body.session_id;
  }

  async listSessions(): Promise<SessionView[]> {
    return (await this.request("/sessions")) as SessionView[];
  }

  async view(sessionId: string): Promise<SessionView> {
    return (await this.request(`/sessions/${sessionId}`)) as SessionView;
  }

  async transcript(sessionId: string, sinceSeq: number, waitS: number): Promise<TranscriptChunk> {
    const query = `since_seq=${sinceSeq}&wait_s=${waitS}`;
    return (await this.request(
      `/sessions/${sessionId}/transcript?${query}`,
    )) as TranscriptChunk;
  }

  async feedback(sessionId: string, payload: FeedbackPayload): Promise<void> {
    await this.post(`/sessions/${sessionId}/feedback`, payload);
  }

  async advance(sessionId: string): Promise<void> {
    await this.post(`/sessions/${sessionId}/advance`, {});
  }

  async trajectory(sessionId: string, scenario: string): Promise<TrajectoryTable> {
    return (await this.request(
      `/sessions/${sessionId}/trajectory/${scenario}`,
    )) as TrajectoryTable;
  }
}
