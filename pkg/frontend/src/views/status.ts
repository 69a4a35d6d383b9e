// State chip strip and error banner. Chips mirror the server states
// one-to-one; the current state is highlighted, terminal states colored.

import { SESSION_STATES, SessionView } from "../types.js";

export function renderStateChips(view: SessionView): HTMLElement {
  const strip = document.createElement("div");
  strip.className = "state-chips";
  strip.dataset.testid = "state-chips";
  for (const state of SESSION_STATES) {
    if (state === "failed" && view.state !== "failed") continue;
    const chip = document.createElement("span");
    chip.className = "chip";
    chip.textContent = state.replace(/_/g, " ");
    chip.dataset.state = state;
    if (state === view.state) {
      chip.classList.add("chip-current");
      chip.dataset.testid = "current-state";
    }
    if (view.state === "failed" && state === "failed") chip.classList.add("chip-failed");
    if (view.state === "completed" && state === "completed") chip.classList.add("chip-done");
    strip.appendChild(chip);
  }
  return strip;
}

export function renderBanner(message: string): HTMLElement {
  const banner = document.createElement("div");
  banner.className = "banner";
  banner.dataset.testid = "banner";
  banner.textContent = message;
  return banner;
}

export function failureMessage(view: SessionView): string | null {
  if (view.state !== "failed") return null;
  const failure = [...view.event_log].reverse().find((e) => e.kind === "step_failed");
  const error = failure?.payload?.["error"];
  return typeof error === "string" ? error : "the pipeline step failed";
}
