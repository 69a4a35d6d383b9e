// End-to-end: a real pipeline service in mock profile, driven entirely
// through DOM clicks, from prompt to the completed compare view.

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { App } from "../src/app.js";
import { waitFor } from "./helpers.js";

const PORT = 18000 + Math.floor(Math.random() * 2000);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;

async function healthy(): Promise<boolean> {
  try {
    const response = await fetch(`${BASE}/healthz`);
    return response.ok;
  } catch {
    return false;
  }
}

beforeAll(async () => {
  // the bundle is served by the pipeline service itself (under /ui/), so
  // the page origin is the API origin; mirror that here
  (window as unknown as { happyDOM: { setURL(url: string): void } }).happyDOM.setURL(BASE);
  const dataDir = mkdtempSync(join(tmpdir(), "factpipe-e2e-"));
  server = spawn(
    "python3",
    [
      "-m",
      "factpipe.cli",
      "serve",
      "--profile",
      "mock",
      "--host",
      "127.0.0.1",
      "--port",
      String(PORT),
      "--data-dir",
      dataDir,
    ],
    { stdio: ["ignore", "pipe", "pipe"], cwd: join(__dirname, "..", "..") },
  );
  const deadline = Date.now() + 20_000;
  while (Date.now() < deadline) {
    if (await healthy()) return;
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error("pipeline service did not come up");
}, 30_000);

afterAll(() => {
  server?.kill("SIGTERM");
});

describe("full session through clicks", () => {
  it("completes the reference scenario end to end", async () => {
    document.body.innerHTML = "<main id='app'></main>";
    const root = document.getElementById("app")!;
    const app = new App(root, new ApiClient(BASE), 100);
    app.mount();

    const input = root.querySelector("[data-testid='prompt-input']") as HTMLInputElement;
    input.value = "The Statue of Liberty in 1890";
    const form = root.querySelector("[data-testid='prompt-form']") as HTMLFormElement;
    form.dispatchEvent(new Event("submit", { cancelable: true }));

    const currentState = () =>
      root.querySelector("[data-testid='current-state']")?.getAttribute("data-state");
    const clickCta = () =>
      (root.querySelector("button[data-testid='primary-cta']") as HTMLElement).click();

    await waitFor(() => currentState() === "created", 10_000);
    clickCta(); // generate initial image
    await waitFor(() => currentState() === "initial_generated", 15_000);
    clickCta(); // retrieve candidates
    await waitFor(() => currentState() === "candidates_retrieved", 15_000);

    const card = root.querySelector("[data-testid='candidate-1']") as HTMLElement;
    expect(card.classList.contains("candidate-selectable")).toBe(true);
    card.click();
    await waitFor(() => currentState() === "candidate_selected", 10_000);

    clickCta(); // classify and route
    await waitFor(() => currentState() === "routed", 10_000);
    expect(root.textContent).toContain("factual_inconsistency");

    clickCta(); // generate guidance
    await waitFor(() => currentState() === "guidance_ready", 15_000);
    const textarea = root.querySelector("[data-testid='guidance-text']") as HTMLTextAreaElement;
    expect(textarea.value).toBe("The statue needs to be colored copper brown.");

    clickCta(); // apply edit
    await waitFor(() => currentState() === "edited", 15_000);
    clickCta(); // complete
    await waitFor(() => currentState() === "completed", 15_000);

    expect(root.querySelector("[data-testid='session-done']")).not.toBeNull();
    for (const pane of ["initial", "reference", "edited"]) {
      expect(root.querySelector(`[data-testid='pane-${pane}'] img`), pane).not.toBeNull();
    }
    const provenance = root.querySelector("[data-testid='provenance']")!.textContent!;
    expect(provenance).toContain("instruction_edit");
  }, 90_000);
});
