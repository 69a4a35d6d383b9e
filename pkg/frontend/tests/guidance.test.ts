// Guidance review flow against a stubbed server.

import { beforeEach, describe, expect, it } from "vitest";

import { App } from "../src/app.js";
import { artifact, candidate, guidance, makeView, StubClient, waitFor } from "./helpers.js";

const INITIAL_HASH = "a".repeat(64);

function guidanceReadyView() {
  return makeView("guidance_ready", {
    initial_image: artifact("generated", INITIAL_HASH),
    candidates: [candidate(0)],
    selected_index: 0,
    taxonomy: "factual_inconsistency",
    scope: "property_level",
    strategy: "instruction_edit",
    guidance: guidance("The statue needs to be colored copper brown.", "edit_instruction"),
  });
}

describe("guidance review", () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = "<main id='app'></main>";
    root = document.getElementById("app")!;
  });

  function mountApp(stub: StubClient) {
    const app = new App(root, stub.asClient(), 5);
    app.view = stub.views[0];
    app.render();
    return app;
  }

  it("accepting unchanged guidance applies without a PUT", async () => {
    const view = guidanceReadyView();
    const stub = new StubClient(view);
    mountApp(stub);
    (root.querySelector("[data-testid='primary-cta']") as HTMLElement).click();
    await waitFor(() => stub.calls.some((c) => c.method === "runStep"));
    const methods = stub.calls.map((c) => c.method);
    expect(methods).not.toContain("putGuidance");
    expect(stub.calls.find((c) => c.method === "runStep")!.args[1]).toBe("apply_edit");
  });

  it("edited guidance does a PUT before applying, and the log shows both", async () => {
    const view = guidanceReadyView();
    const stub = new StubClient(view);
    mountApp(stub);
    const textarea = root.querySelector("[data-testid='guidance-text']") as HTMLTextAreaElement;
    textarea.value = "Repaint the statue in copper brown.";
    textarea.dispatchEvent(new Event("input"));
    (root.querySelector("[data-testid='primary-cta']") as HTMLElement).click();
    await waitFor(() => stub.calls.some((c) => c.method === "runStep"));
    const methods = stub.calls.map((c) => c.method);
    expect(methods.indexOf("putGuidance")).toBeGreaterThanOrEqual(0);
    expect(methods.indexOf("putGuidance")).toBeLessThan(methods.indexOf("runStep"));
    expect(stub.calls.find((c) => c.method === "putGuidance")!.args[1]).toBe(
      "Repaint the statue in copper brown.",
    );
  });

  it("blocks empty guidance client-side", () => {
    const view = guidanceReadyView();
    const stub = new StubClient(view);
    mountApp(stub);
    const textarea = root.querySelector("[data-testid='guidance-text']") as HTMLTextAreaElement;
    textarea.value = "   ";
    textarea.dispatchEvent(new Event("input"));
    (root.querySelector("[data-testid='primary-cta']") as HTMLElement).click();
    expect(stub.calls).toHaveLength(0);
    expect(root.querySelector("[data-testid='guidance-note']")!.textContent).toContain(
      "cannot be empty",
    );
  });

  it("shows the length counter against the instruction cap", () => {
    const view = guidanceReadyView();
    mountApp(new StubClient(view));
    const counter = root.querySelector("[data-testid='guidance-counter']")!;
    expect(counter.textContent).toBe(
      `${"The statue needs to be colored copper brown.".length}/300`,
    );
  });

  it("offers the strategy override dropdown at routed", async () => {
    const view = makeView("routed", {
      initial_image: artifact("generated", INITIAL_HASH),
      candidates: [candidate(0)],
      selected_index: 0,
      taxonomy: "factual_inconsistency",
      scope: "property_level",
      strategy: "instruction_edit",
    });
    const stub = new StubClient(view);
    const app = mountApp(stub);
    const dropdown = root.querySelector("[data-testid='strategy-override']") as HTMLSelectElement;
    dropdown.value = "image_prompt_edit";
    dropdown.dispatchEvent(new Event("change"));
    await waitFor(() => stub.calls.some((c) => c.method === "route"));
    expect(stub.calls.at(-1)).toEqual({
      method: "route",
      args: [view.session_id, "image_prompt_edit"],
    });
    expect(app.view).not.toBeNull();
  });
});
