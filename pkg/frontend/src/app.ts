// Session controller: renders everything from server projections, posts
// exactly one mutation per user action, and polls while a step is in
// flight. No optimistic state: every render starts from a fresh view.

import { ApiClient, ApiError, StepCommand } from "./api.js";
import { SessionView, Strategy } from "./types.js";
import { renderCompare } from "./views/compare.js";
import { renderGrid } from "./views/grid.js";
import { renderGuidancePanel, renderRoutedPanel } from "./views/guidance.js";
import { failureMessage, renderBanner, renderStateChips } from "./views/status.js";

const STEP_FOR_STATE: Partial<Record<SessionView["state"], StepCommand>> = {
  created: "generate_initial",
  initial_generated: "retrieve",
  edited: "complete",
};

const CTA_LABELS: Partial<Record<SessionView["state"], string>> = {
  created: "Generate initial image",
  initial_generated: "Retrieve reference candidates",
  edited: "Complete session",
};

export class App {
  view: SessionView | null = null;
  private bannerText = "";
  private polling = false;

  constructor(
    private root: HTMLElement,
    private client: ApiClient,
    private pollMs = 1000,
  ) {}

  mount(): void {
    this.root.replaceChildren(this.renderPromptForm());
  }

  private renderPromptForm(): HTMLElement {
    const form = document.createElement("form");
    form.dataset.testid = "prompt-form";
    const input = document.createElement("input");
    input.dataset.testid = "prompt-input";
    input.placeholder = "e.g. The Statue of Liberty in 1890";
    const submit = document.createElement("button");
    submit.type = "submit";
    submit.dataset.testid = "primary-cta";
    submit.textContent = "Start session";
    form.appendChild(input);
    form.appendChild(submit);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      if (input.value.trim()) void this.createSession(input.value.trim());
    });
    return form;
  }

  async createSession(text: string): Promise<void> {
    await this.guard(async () => {
      this.view = await this.client.createSession(text, { retrieval_count_n: 6 });
      this.render();
    });
  }

  async refresh(): Promise<void> {
    if (!this.view) return;
    this.view = await this.client.getSession(this.view.session_id);
    this.render();
  }

  /** Submit an async step, then poll at the configured cadence until it lands. */
  private async runStepAndPoll(command: StepCommand): Promise<void> {
    if (!this.view) return;
    const sessionId = this.view.session_id;
    await this.client.runStep(sessionId, command);
    this.polling = true;
    this.render();
    try {
      for (;;) {
        await new Promise((resolve) => setTimeout(resolve, this.pollMs));
        const view = await this.client.getSession(sessionId);
        if (!view.step_in_flight) {
          this.view = view;
          break;
        }
      }
    } finally {
      this.polling = false;
    }
    this.render();
  }

  private async guard(action: () => Promise<void>): Promise<void> {
    try {
      this.bannerText = "";
      await action();
    } catch (error) {
      this.bannerText = error instanceof ApiError ? `${error.code}: ${error.message}` : String(error);
      this.render();
    }
  }

  handlePrimary(): Promise<void> {
    const state = this.view?.state;
    const command = state !== undefined ? STEP_FOR_STATE[state] : undefined;
    if (!command) return Promise.resolve();
    return this.guard(() => this.runStepAndPoll(command));
  }

  handleSelect(index: number): Promise<void> {
    return this.guard(async () => {
      if (!this.view) return;
      this.view = await this.client.select(this.view.session_id, index);
      this.render();
    });
  }

  handleRoute(): Promise<void> {
    return this.guard(async () => {
      if (!this.view) return;
      this.view = await this.client.route(this.view.session_id);
      this.render();
    });
  }

  handleOverrideStrategy(strategy: Strategy): Promise<void> {
    return this.guard(async () => {
      if (!this.view || this.view.strategy === strategy) return;
      this.view = await this.client.route(this.view.session_id, strategy);
      this.render();
    });
  }

  handleGenerateGuidance(): Promise<void> {
    return this.guard(() => this.runStepAndPoll("generate_guidance"));
  }

  handleApplyGuidance(text: string): Promise<void> {
    return this.guard(async () => {
      if (!this.view) return;
      if (text !== this.view.guidance?.text) {
        this.view = await this.client.putGuidance(this.view.session_id, text);
        this.render();
      }
      await this.runStepAndPoll("apply_edit");
    });
  }

  render(): void {
    const view = this.view;
    if (!view) return;
    const page = document.createElement("div");
    page.className = "session";

    const heading = document.createElement("h2");
    heading.textContent = view.prompt.text;
    page.appendChild(heading);
    page.appendChild(renderStateChips(view));
    if (this.bannerText) page.appendChild(renderBanner(this.bannerText));
    const failed = failureMessage(view);
    if (failed) page.appendChild(renderBanner(`session failed: ${failed}`));

    if (this.polling || view.step_in_flight) {
      const busy = document.createElement("p");
      busy.dataset.testid = "busy";
      busy.textContent = "working…";
      page.appendChild(busy);
    } else {
      this.renderBody(view, page);
    }
    this.root.replaceChildren(page);
  }

  private renderBody(view: SessionView, page: HTMLElement): void {
    const label = CTA_LABELS[view.state];
    if (label) {
      const button = document.createElement("button");
      button.dataset.testid = "primary-cta";
      button.textContent = label;
      button.addEventListener("click", () => void this.handlePrimary());
      page.appendChild(button);
    }

    if (view.state === "candidates_retrieved") {
      page.appendChild(
        renderGrid(view, this.client, { onSelect: (index) => void this.handleSelect(index) }),
      );
    }
    if (view.state === "candidate_selected") {
      const button = document.createElement("button");
      button.dataset.testid = "primary-cta";
      button.textContent = "Classify and route";
      button.addEventListener("click", () => void this.handleRoute());
      page.appendChild(button);
    }
    if (view.state === "routed") {
      page.appendChild(
        renderRoutedPanel(view, {
          onApply: () => undefined,
          onOverrideStrategy: (s) => void this.handleOverrideStrategy(s),
          onGenerateGuidance: () => void this.handleGenerateGuidance(),
        }),
      );
    }
    if (view.state === "guidance_ready") {
      page.appendChild(
        renderGuidancePanel(view, this.client, {
          onApply: (text) => void this.handleApplyGuidance(text),
          onOverrideStrategy: () => undefined,
          onGenerateGuidance: () => undefined,
        }),
      );
    }
    if (view.state === "edited" || view.state === "completed") {
      page.appendChild(renderCompare(view, this.client));
    }
    if (view.state === "completed") {
      const done = document.createElement("p");
      done.dataset.testid = "session-done";
      done.textContent = "Session completed.";
      page.appendChild(done);
    }
  }
}
