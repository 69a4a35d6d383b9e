// Selection grid behavior against a stubbed server.

import { beforeEach, describe, expect, it } from "vitest";

import { App } from "../src/app.js";
import { ApiError } from "../src/api.js";
import { renderGrid } from "../src/views/grid.js";
import { StubClient, candidate, makeView, waitFor } from "./helpers.js";

describe("candidate grid", () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = "<main id='app'></main>";
    root = document.getElementById("app")!;
  });

  it("selects a candidate by click", () => {
    const view = makeView("candidates_retrieved", {
      candidates: Array.from({ length: 10 }, (_, i) => candidate(i)),
    });
    const selected: number[] = [];
    const grid = renderGrid(view, new StubClient().asClient(), {
      onSelect: (index) => selected.push(index),
    });
    root.appendChild(grid);
    (root.querySelector("[data-testid='candidate-3']") as HTMLElement).click();
    expect(selected).toEqual([3]);
  });

  it("disables non-ingested candidates with the recorded reason", () => {
    const view = makeView("candidates_retrieved", {
      candidates: [
        candidate(0),
        candidate(1, {
          ingest_status: "duplicate",
          artifact: null,
          status_detail: "duplicate of rank 0",
        }),
        candidate(2, {
          ingest_status: "fetch_failed",
          artifact: null,
          status_detail: "404 for https://images.example.org/x/ref2.png",
        }),
      ],
    });
    const selected: number[] = [];
    const grid = renderGrid(view, new StubClient().asClient(), {
      onSelect: (index) => selected.push(index),
    });
    root.appendChild(grid);
    const dup = root.querySelector("[data-testid='candidate-1']") as HTMLElement;
    expect(dup.classList.contains("candidate-disabled")).toBe(true);
    expect(dup.title).toBe("duplicate of rank 0");
    dup.click();
    (root.querySelector("[data-testid='candidate-2']") as HTMLElement).click();
    expect(selected).toEqual([]);
  });

  it("shows exactly one primary call-to-action", () => {
    const view = makeView("candidates_retrieved", { candidates: [candidate(0)] });
    const grid = renderGrid(view, new StubClient().asClient(), { onSelect: () => {} });
    root.appendChild(grid);
    expect(root.querySelectorAll("[data-testid='primary-cta']")).toHaveLength(1);
  });

  it("keeps the grid interactive after a 409 from a concurrent step", async () => {
    const view = makeView("candidates_retrieved", {
      candidates: [candidate(0), candidate(1)],
    });
    const stub = new StubClient(view);
    const app = new App(root, stub.asClient(), 10);
    app.view = view;
    app.render();
    stub.failWith = new ApiError("conflict", "a step is already running", 409);
    await app.handleSelect(1);
    await waitFor(() => root.querySelector("[data-testid='banner']") !== null);
    expect(root.querySelector("[data-testid='banner']")!.textContent).toContain("conflict");
    expect(root.querySelector("[data-testid='candidate-grid']")).not.toBeNull();
    stub.failWith = null;
    (root.querySelector("[data-testid='candidate-1']") as HTMLElement).click();
    await waitFor(() => stub.calls.some((c) => c.method === "select"));
    expect(stub.calls.at(-1)).toEqual({
      method: "select",
      args: [view.session_id, 1],
    });
  });
});
