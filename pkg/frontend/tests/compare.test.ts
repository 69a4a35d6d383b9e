// Before/after comparison and provenance panel.

import { beforeEach, describe, expect, it } from "vitest";

import { renderCompare } from "../src/views/compare.js";
import { StubClient, artifact, candidate, guidance, makeView } from "./helpers.js";

const INITIAL_HASH = "a".repeat(64);
const EDITED_HASH = "b".repeat(64);

describe("compare view", () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = "<main id='app'></main>";
    root = document.getElementById("app")!;
  });

  it("renders three panes and instruction provenance for a completed session", () => {
    const reference = candidate(0);
    const view = makeView("completed", {
      initial_image: artifact("generated", INITIAL_HASH),
      candidates: [reference],
      selected_index: 0,
      strategy: "instruction_edit",
      guidance: guidance("The statue needs to be colored copper brown.", "edit_instruction"),
      edited_image: artifact("edited", EDITED_HASH, [INITIAL_HASH]),
    });
    root.appendChild(renderCompare(view, new StubClient().asClient()));
    for (const pane of ["initial", "reference", "edited"]) {
      const img = root.querySelector(`[data-testid='pane-${pane}'] img`);
      expect(img, pane).not.toBeNull();
    }
    const provenance = root.querySelector("[data-testid='provenance']")!.textContent!;
    expect(provenance).toContain("instruction_edit");
    expect(provenance).toContain(INITIAL_HASH);
    expect(provenance).toContain(EDITED_HASH);
    expect(provenance).toContain("The statue needs to be colored copper brown.");
  });

  it("lists the reference hash among edit parents for image-prompt sessions", () => {
    const reference = candidate(0);
    const referenceHash = reference.artifact!.content_hash;
    const view = makeView("completed", {
      initial_image: artifact("generated", INITIAL_HASH),
      candidates: [reference],
      selected_index: 0,
      strategy: "image_prompt_edit",
      guidance: guidance("A woman in a red blazer at a lectern.", "factual_prompt"),
      edited_image: artifact("edited", EDITED_HASH, [INITIAL_HASH, referenceHash]),
    });
    root.appendChild(renderCompare(view, new StubClient().asClient()));
    const parents = root.querySelector("[data-testid='provenance']")!.textContent!;
    expect(parents).toContain(referenceHash);
  });

  it("degrades a missing blob to a placeholder with the hash and a retry link", () => {
    const view = makeView("completed", {
      initial_image: artifact("generated", INITIAL_HASH),
      candidates: [candidate(0)],
      selected_index: 0,
      strategy: "instruction_edit",
      guidance: guidance("x is to be recolored.", "edit_instruction"),
      edited_image: artifact("edited", EDITED_HASH, [INITIAL_HASH]),
    });
    root.appendChild(renderCompare(view, new StubClient().asClient()));
    const img = root.querySelector("[data-testid='pane-edited'] img")!;
    img.dispatchEvent(new Event("error"));
    const placeholder = root.querySelector("[data-testid='placeholder-edited']")!;
    expect(placeholder.textContent).toContain(EDITED_HASH.slice(0, 12));
    expect(placeholder.querySelector("a")!.getAttribute("href")).toContain(EDITED_HASH);
  });
});
