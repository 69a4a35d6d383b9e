// Shared fixtures: session view factories and a recording stub client.

import { ApiClient, StepCommand } from "../src/api.js";
import {
  ArtifactView,
  CandidateView,
  GuidanceView,
  SessionState,
  SessionView,
  Strategy,
} from "../src/types.js";

export function artifact(
  role: ArtifactView["source_role"],
  hash: string,
  parents: string[] = [],
): ArtifactView {
  return {
    content_hash: hash,
    byte_length: 1000,
    media_type: "png",
    width: 256,
    height: 256,
    source_role: role,
    origin: role === "retrieved" ? "https://images.example.org/x/ref0.png" : null,
    parent_hashes: parents,
  };
}

export function candidate(
  rank: number,
  overrides: Partial<CandidateView> = {},
): CandidateView {
  const hash = `${rank}`.repeat(64).slice(0, 64);
  return {
    rank,
    origin_url: `https://images.example.org/x/ref${rank}.png`,
    thumbnail_url: null,
    title: `reference ${rank}`,
    artifact: artifact("retrieved", hash),
    ingest_status: "ingested",
    status_detail: null,
    ...overrides,
  };
}

export function guidance(text: string, kind: GuidanceView["kind"]): GuidanceView {
  return {
    kind,
    text,
    metaprompt_hash: "c".repeat(64),
    raw_response: text,
    llm_backend_id: "mock-multimodal_llm",
  };
}

export function makeView(
  state: SessionState,
  overrides: Partial<SessionView> = {},
): SessionView {
  return {
    session_id: "11111111-1111-1111-1111-111111111111",
    prompt: {
      text: "The Statue of Liberty in 1890",
      subject_hint: null,
      temporal_qualifier: null,
      taxonomy_hint: null,
    },
    state,
    retrieval_count_n: 6,
    initial_image: null,
    candidates: [],
    selected_index: null,
    taxonomy: null,
    scope: null,
    strategy: null,
    strategy_overridden: false,
    guidance: null,
    edited_image: null,
    created_at: "2026-08-10T00:00:00+00:00",
    updated_at: "2026-08-10T00:00:00+00:00",
    event_log: [],
    step_in_flight: false,
    ...overrides,
  };
}

export interface Call {
  method: string;
  args: unknown[];
}

/** Stub standing in for ApiClient; records calls and plays back scripted views. */
export class StubClient {
  calls: Call[] = [];
  views: SessionView[] = [];
  failWith: Error | null = null;

  constructor(initial?: SessionView) {
    if (initial) this.views.push(initial);
  }

  private next(method: string, args: unknown[]): Promise<SessionView> {
    this.calls.push({ method, args });
    if (this.failWith) return Promise.reject(this.failWith);
    const view = this.views.length > 1 ? this.views.shift()! : this.views[0];
    return Promise.resolve(view);
  }

  createSession(text: string): Promise<SessionView> {
    return this.next("createSession", [text]);
  }

  getSession(id: string): Promise<SessionView> {
    return this.next("getSession", [id]);
  }

  async runStep(id: string, command: StepCommand): Promise<{ accepted: boolean }> {
    this.calls.push({ method: "runStep", args: [id, command] });
    if (this.failWith) throw this.failWith;
    return { accepted: true };
  }

  select(id: string, index: number): Promise<SessionView> {
    return this.next("select", [id, index]);
  }

  route(id: string, strategyOverride?: Strategy): Promise<SessionView> {
    return this.next("route", [id, strategyOverride]);
  }

  putGuidance(id: string, text: string): Promise<SessionView> {
    return this.next("putGuidance", [id, text]);
  }

  blobUrl(hash: string): string {
    return `/v1/blobs/${hash}`;
  }

  asClient(): ApiClient {
    return this as unknown as ApiClient;
  }
}

export function waitFor(
  predicate: () => boolean,
  timeoutMs = 5000,
  intervalMs = 20,
): Promise<void> {
  const started = Date.now();
  return new Promise((resolve, reject) => {
    const tick = () => {
      if (predicate()) return resolve();
      if (Date.now() - started > timeoutMs) return reject(new Error("waitFor timed out"));
      setTimeout(tick, intervalMs);
    };
    tick();
  });
}
