/** Append-only message timeline: one expandable entry per transcript message. */

import type { TranscriptMessage } from "./types.js";

function asList(value: unknown): unknown[] {
  return Array.isArray(value) ? value : [];
}

/** One-line human summary of a message payload, keyed by kind. */
export function describeMessage(message: TranscriptMessage): string {
  const p = message.payload;
  switch (message.kind) {
    case "requirements": {
      const n = asList(p.requirements).length;
      return `${n} requirement${n === 1 ? "" : "s"}`;
    }
    case "plan":
    case "subtask": {
      const ids = asList(p.subtasks)
        .map((s) => String((s as { id?: unknown }).id ?? "?"))
        .join(", ");
      return ids || "(empty)";
    }
    case "parse_report": {
      const diagnostics = asList(p.diagnostics).map(String);
      return `${p.subject}: ${p.ok ? "ok" : diagnostics.join("; ")}`;
    }
    case "policy_draft":
      return `${String(p.source ?? "").split("\n").length} lines`;
    case "test_report":
      return `${p.passed ? "PASS" : "FAIL"}, objective ${Number(p.objective).toFixed(4)}`;
    case "tuning_report":
      return `round ${p.round}: ${p.notes}`;
    case "user_feedback": {
      const categories = asList(p.categories).map(String);
      return String(p.verdict) + (categories.length ? ` (${categories.join(", ")})` : "");
    }
    case "escalation":
    case "failure":
      return String(p.reason ?? "");
    case "acceptance":
      return "policy accepted";
    default:
      return "";
  }
}

/** Build a single timeline <li>; the payload body toggles on header click. */
export function renderEntry(doc: Document, message: TranscriptMessage): HTMLElement {
  const entry = doc.createElement("li");
  entry.className = `entry kind-${message.kind}`;
  entry.dataset.seq = String(message.seq);

  const header = doc.createElement("button");
  header.type = "button";
  header.className = "entry-header";

  const seq = doc.createElement("span");
  seq.className = "seq";
  seq.textContent = `#${message.seq}`;

  const route = doc.createElement("span");
  route.className = "route";
  route.textContent = `${message.from} → ${message.to}`;

  const kind = doc.createElement("span");
  kind.className = "kind";
  kind.textContent = message.kind;

  const summary = doc.createElement("span");
  summary.className = "summary";
  summary.textContent = describeMessage(message);

  header.append(seq, route, kind, summary);

  const payload = doc.createElement("pre");
  payload.className = "payload";
  payload.hidden = true;
  payload.textContent = JSON.stringify(message.payload, null, 2);

  header.addEventListener("click", () => {
    payload.hidden = !payload.hidden;
  });
  entry.append(header, payload);
  return entry;
}

/**
 * Owns the <ol> of entries. Appends are idempotent by seq and keep the list
 * sorted even if callers hand messages over out of order.
 */
export class TimelineView {
  private readonly seen = new Set<number>();

  constructor(private readonly list: HTMLElement) {}

  append(messages: TranscriptMessage[]): void {
    let appended = 0;
    for (const message of [...messages].sort((a, b) => a.seq - b.seq)) {
      if (this.seen.has(message.seq)) continue;
      this.seen.add(message.seq);
      this.list.append(renderEntry(this.list.ownerDocument, message));
      appended += 1;
    }
    if (appended > 0) {
      this.list.scrollTop = this.list.scrollHeight;
    }
  }

  get count(): number {
    return this.seen.size;
  }

  clear(): void {
    this.seen.clear();
    this.list.replaceChildren();
  }

  /** Seqs currently rendered, in DOM order. */
  renderedSeqs(): number[] {
    return [...this.list.children].map((child) =>
      Number((child as HTMLElement).dataset.seq),
    );
  }
}
