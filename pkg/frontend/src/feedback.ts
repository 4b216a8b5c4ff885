/** Operator feedback form: verdict, categories, notes, gated by phase. */

import { ApiError } from "./api.js";
import { FEEDBACK_CATEGORIES } from "./types.js";
import type { FeedbackCategory, FeedbackPayload, Verdict } from "./types.js";

const VERDICTS: Verdict[] = ["Approve", "Adjust", "Reject"];

export class FeedbackForm {
  readonly root: HTMLElement;
  private readonly verdictSelect: HTMLSelectElement;
  private readonly categoryBoxes = new Map<FeedbackCategory, HTMLInputElement>();
  private readonly notesArea: HTMLTextAreaElement;
  private readonly submitButton: HTMLButtonElement;
  private readonly banner: HTMLElement;
  private readonly hint: HTMLElement;
  private phase = "";
  private submitting = false;

  constructor(
    doc: Document,
    private readonly onSubmit: (payload: FeedbackPayload) => Promise<void>,
  ) {
    this.root = doc.createElement("form");
    this.root.className = "feedback-form";

    this.banner = doc.createElement("div");
    this.banner.className = "banner";
    this.banner.hidden = true;

    const verdictLabel = doc.createElement("label");
    verdictLabel.textContent = "Verdict ";
    this.verdictSelect = doc.createElement("select");
    this.verdictSelect.name = "verdict";
    for (const verdict of VERDICTS) {
      const option = doc.createElement("option");
      option.value = verdict;
      option.textContent = verdict;
      this.verdictSelect.append(option);
    }
    verdictLabel.append(this.verdictSelect);

    const categoryGroup = doc.createElement("fieldset");
    categoryGroup.className = "categories";
    const legend = doc.createElement("legend");
    legend.textContent = "Adjust categories";
    categoryGroup.append(legend);
    for (const category of FEEDBACK_CATEGORIES) {
      const label = doc.createElement("label");
      const box = doc.createElement("input");
      box.type = "checkbox";
      box.value = category;
      label.append(box, doc.createTextNode(` ${category}`));
      categoryGroup.append(label);
      this.categoryBoxes.set(category, box);
    }

    this.notesArea = doc.createElement("textarea");
    this.notesArea.name = "notes";
    this.notesArea.placeholder = "Notes for the crew (optional)";
    this.notesArea.rows = 2;

    this.submitButton = doc.createElement("button");
    this.submitButton.type = "submit";
    this.submitButton.textContent = "Send feedback";

    this.hint = doc.createElement("p");
    this.hint.className = "hint";

    this.root.append(this.banner, verdictLabel, categoryGroup, this.notesArea, this.submitButton, this.hint);
    this.root.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submit();
    });
    this.setPhase("");
  }

  /** Enable the form only while the session awaits operator review. */
  setPhase(phase: string): void {
    this.phase = phase;
    const open = phase === "UserReview";
    for (const element of [this.verdictSelect, this.notesArea, this.submitButton]) {
      element.disabled = !open;
    }
    for (const box of this.categoryBoxes.values()) {
      box.disabled = !open;
    }
    this.hint.textContent = open
      ? "The crew is waiting on your verdict."
      : phase
        ? `Feedback opens at review time (now: ${phase}).`
        : "";
    if (open) {
      this.clearBanner();
    }
  }

  value(): FeedbackPayload {
    const categories = [...this.categoryBoxes.entries()]
      .filter(([, box]) => box.checked)
      .map(([category]) => category);
    return {
      verdict: this.verdictSelect.value as Verdict,
      categories,
      notes: this.notesArea.value,
    };
  }

  /** Set the current form values (used by tests and keyboard shortcuts). */
  setValue(payload: Partial<FeedbackPayload>): void {
    if (payload.verdict) {
      this.verdictSelect.value = payload.verdict;
    }
    if (payload.categories) {
      for (const [category, box] of this.categoryBoxes) {
        box.checked = payload.categories.includes(category);
      }
    }
    if (payload.notes !== undefined) {
      this.notesArea.value = payload.notes;
    }
  }

  get bannerText(): string {
    return this.banner.hidden ? "" : this.banner.textContent ?? "";
  }

  private showBanner(text: string): void {
    this.banner.textContent = text;
    this.banner.hidden = false;
  }

  private clearBanner(): void {
    this.banner.hidden = true;
    this.banner.textContent = "";
  }

  async submit(): Promise<void> {
    if (this.submitting || this.submitButton.disabled) {
      return;
    }
    const payload = this.value();
    if (payload.verdict === "Adjust" && payload.categories.length === 0) {
      this.showBanner("Pick at least one category so the tuner knows what to change.");
      return;
    }
    this.submitting = true;
    this.submitButton.disabled = true;
    try {
      await this.onSubmit(payload);
      this.clearBanner();
      // Leave controls disabled; the next phase report re-opens if needed.
      this.hint.textContent = "Feedback sent — the crew is on it.";
      for (const element of [this.verdictSelect, this.notesArea]) {
        element.disabled = true;
      }
      for (const box of this.categoryBoxes.values()) {
        box.disabled = true;
      }
    } catch (error) {
      // Keep every field as typed so the operator can retry.
      this.submitButton.disabled = false;
      if (error instanceof ApiError && error.status === 409) {
        this.showBanner(`Not accepted right now: ${String(error.detail)}`);
      } else if (error instanceof ApiError) {
        this.showBanner(`Server rejected the feedback: ${String(error.detail)}`);
      } else {
        this.showBanner("Connection hiccup; your feedback was not sent. Try again.");
      }
    } finally {
      this.submitting = false;
    }
  }
}
