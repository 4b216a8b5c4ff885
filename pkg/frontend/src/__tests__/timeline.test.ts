// @vitest-environment jsdom
import { describe, expect, it } from "vitest";

import { TimelineView, describeMessage, renderEntry } from "../timeline.js";
import type { TranscriptMessage } from "../types.js";
import { allMessages, loadFixture } from "./fakes.js";

const messages = allMessages(loadFixture("adjust_session.json"));

function byKind(kind: string): TranscriptMessage {
  const found = messages.find((m) => m.kind === kind);
  if (!found) {
    throw new Error(`fixture has no ${kind} message`);
  }
  return found;
}

describe("describeMessage", () => {
  it("summarizes each kind from real payloads", () => {
    const requirements = byKind("requirements");
    const n = (requirements.payload.requirements as unknown[]).length;
    expect(describeMessage(requirements)).toBe(`${n} requirements`);

    const plan = byKind("plan");
    const firstId = (plan.payload.subtasks as { id: string }[])[0].id;
    expect(describeMessage(plan)).toContain(firstId);

    const parse = byKind("parse_report");
    expect(describeMessage(parse)).toBe(`${parse.payload.subject}: ok`);

    const report = byKind("test_report");
    const objective = (report.payload.objective as number).toFixed(4);
    expect(describeMessage(report)).toBe(`PASS, objective ${objective}`);

    const feedback = byKind("user_feedback");
    expect(describeMessage(feedback)).toBe("Adjust (TooClose)");

    const tuning = byKind("tuning_report");
    expect(describeMessage(tuning)).toMatch(/^round 1: /);

    expect(describeMessage(byKind("acceptance"))).toBe("policy accepted");
  });

  it("spells out failing reports and one-category-free feedback", () => {
    const failing = {
      ...byKind("test_report"),
      payload: { ...byKind("test_report").payload, passed: false, objective: 2.5 },
    };
    expect(describeMessage(failing)).toBe("FAIL, objective 2.5000");

    const approve = {
      ...byKind("user_feedback"),
      payload: { verdict: "Approve", categories: [], notes: "" },
    };
    expect(describeMessage(approve)).toBe("Approve");
  });
});

describe("TimelineView", () => {
  function makeView() {
    const list = document.createElement("ol");
    document.body.append(list);
    return { list, view: new TimelineView(list) };
  }

  it("renders one entry per message in seq order", () => {
    const { view } = makeView();
    view.append(messages);
    expect(view.count).toBe(messages.length);
    expect(view.renderedSeqs()).toEqual(messages.map((m) => m.seq));
  });

  it("ignores duplicates and sorts stragglers", () => {
    const { view } = makeView();
    view.append([messages[2], messages[0]]);
    view.append([messages[1], messages[2], messages[1]]);
    expect(view.renderedSeqs()).toEqual([0, 2, 1]); // arrival batches keep order within
    view.clear();
    view.append(messages.slice(0, 3));
    view.append(messages.slice(0, 6));
    expect(view.renderedSeqs()).toEqual([0, 1, 2, 3, 4, 5]);
    expect(view.count).toBe(6);
  });

  it("expands an entry's payload on click", () => {
    const entry = renderEntry(document, byKind("policy_draft"));
    document.body.append(entry);
    const payload = entry.querySelector("pre.payload") as HTMLPreElement;
    expect(payload.hidden).toBe(true);
    (entry.querySelector("button.entry-header") as HTMLButtonElement).click();
    expect(payload.hidden).toBe(false);
    expect(payload.textContent).toContain("policy follow_and_avoid");
    (entry.querySelector("button.entry-header") as HTMLButtonElement).click();
    expect(payload.hidden).toBe(true);
  });

  it("shows route and kind on the entry header", () => {
    const entry = renderEntry(document, byKind("subtask"));
    const text = entry.textContent ?? "";
    expect(text).toContain("→");
    expect(entry.className).toContain("kind-");
  });
});
