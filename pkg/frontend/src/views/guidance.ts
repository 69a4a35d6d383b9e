// Guidance review panel: the LLM's text verbatim in an editable textarea,
// the generated and reference images side by side, a character counter
// mirroring the server's caps (the server stays authoritative), and the
// strategy override dropdown while the session is still at routed.

import { ApiClient } from "../api.js";
import { GUIDANCE_MAX_CHARS, SessionView, Strategy } from "../types.js";

export interface GuidanceHandlers {
  onApply(text: string): void;
  onOverrideStrategy(strategy: Strategy): void;
  onGenerateGuidance(): void;
}

function pairPanes(view: SessionView, client: ApiClient): HTMLElement {
  const pair = document.createElement("div");
  pair.className = "pane-row";
  const panes: Array<[string, string | undefined]> = [
    ["generated", view.initial_image?.content_hash],
    [
      "reference",
      view.selected_index !== null
        ? view.candidates[view.selected_index]?.artifact?.content_hash
        : undefined,
    ],
  ];
  for (const [label, hash] of panes) {
    const pane = document.createElement("figure");
    pane.className = "pane";
    if (hash) {
      const img = document.createElement("img");
      img.src = client.blobUrl(hash);
      img.alt = label;
      pane.appendChild(img);
    }
    const caption = document.createElement("figcaption");
    caption.textContent = label;
    pane.appendChild(caption);
    pair.appendChild(pane);
  }
  return pair;
}

export function renderRoutedPanel(
  view: SessionView,
  handlers: GuidanceHandlers,
): HTMLElement {
  const section = document.createElement("section");
  section.dataset.testid = "routed-panel";

  const summary = document.createElement("p");
  summary.textContent =
    `Classified as ${view.taxonomy ?? "unknown"} (${view.scope ?? "unknown"}); ` +
    `strategy ${view.strategy}${view.strategy_overridden ? " (overridden)" : ""}.`;
  section.appendChild(summary);

  const dropdown = document.createElement("select");
  dropdown.dataset.testid = "strategy-override";
  for (const value of ["instruction_edit", "image_prompt_edit"] as Strategy[]) {
    const option = document.createElement("option");
    option.value = value;
    option.textContent = value.replace(/_/g, " ");
    option.selected = view.strategy === value;
    dropdown.appendChild(option);
  }
  dropdown.addEventListener("change", () =>
    handlers.onOverrideStrategy(dropdown.value as Strategy),
  );
  const label = document.createElement("label");
  label.textContent = "strategy: ";
  label.appendChild(dropdown);
  section.appendChild(label);

  const button = document.createElement("button");
  button.dataset.testid = "primary-cta";
  button.textContent = "Generate guidance";
  button.addEventListener("click", () => handlers.onGenerateGuidance());
  section.appendChild(button);
  return section;
}

export function renderGuidancePanel(
  view: SessionView,
  client: ApiClient,
  handlers: GuidanceHandlers,
): HTMLElement {
  const section = document.createElement("section");
  section.dataset.testid = "guidance-panel";
  section.appendChild(pairPanes(view, client));

  const guidance = view.guidance;
  const cap = guidance ? GUIDANCE_MAX_CHARS[guidance.kind] : 300;

  const textarea = document.createElement("textarea");
  textarea.dataset.testid = "guidance-text";
  textarea.value = guidance?.text ?? "";
  textarea.rows = 4;
  section.appendChild(textarea);

  const counter = document.createElement("span");
  counter.dataset.testid = "guidance-counter";
  const note = document.createElement("span");
  note.dataset.testid = "guidance-note";
  note.className = "guidance-note";

  const refresh = () => {
    counter.textContent = `${textarea.value.length}/${cap}`;
    counter.classList.toggle("over-cap", textarea.value.length > cap);
  };
  refresh();
  textarea.addEventListener("input", refresh);

  const apply = document.createElement("button");
  apply.dataset.testid = "primary-cta";
  apply.textContent = "Apply edit";
  apply.addEventListener("click", () => {
    const text = textarea.value;
    if (!text.trim()) {
      note.textContent = "guidance text cannot be empty";
      return;
    }
    if (text.length > cap) {
      note.textContent = `guidance text exceeds ${cap} characters`;
      return;
    }
    note.textContent = "";
    handlers.onApply(text);
  });

  section.appendChild(counter);
  section.appendChild(apply);
  section.appendChild(note);
  return section;
}
