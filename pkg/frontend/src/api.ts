// Typed client over the /v1 HTTP API. All mutations go through here;
// errors carry the server's closed-set code so views can react per code.

import { SessionView, Strategy } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface SessionConfig {
  retrieval_count_n?: number;
  auto_select?: boolean;
  strategy_override?: string | null;
  seed?: number | null;
}

export type StepCommand =
  | "generate_initial"
  | "retrieve"
  | "classify_route"
  | "generate_guidance"
  | "apply_edit"
  | "complete";

export class ApiClient {
  private fetchFn: FetchLike;

  constructor(
    public readonly baseUrl: string = "",
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((url, init) => globalThis.fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let code = "backend_failure";
      let message = `HTTP ${response.status}`;
      try {
        const payload = (await response.json()) as {
          error?: { code?: string; message?: string };
          detail?: unknown;
        };
        if (payload.error) {
          code = payload.error.code ?? code;
          message = payload.error.message ?? message;
        } else if (payload.detail) {
          message = JSON.stringify(payload.detail);
        }
      } catch {
        // body was not JSON; keep the status message
      }
      throw new ApiError(code, message, response.status);
    }
    return (await response.json()) as T;
  }

  createSession(text: string, config?: SessionConfig): Promise<SessionView> {
    return this.request("POST", "/v1/sessions", { prompt: { text }, config });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/v1/sessions/${sessionId}`);
  }

  runStep(sessionId: string, command: StepCommand): Promise<{ accepted: boolean }> {
    return this.request("POST", `/v1/sessions/${sessionId}/steps`, { command });
  }

  select(sessionId: string, index: number): Promise<SessionView> {
    return this.request("POST", `/v1/sessions/${sessionId}/select`, { index });
  }

  route(sessionId: string, strategyOverride?: Strategy): Promise<SessionView> {
    return this.request("POST", `/v1/sessions/${sessionId}/route`, {
      strategy_override: strategyOverride ?? null,
    });
  }

  putGuidance(sessionId: string, text: string): Promise<SessionView> {
    return this.request("PUT", `/v1/sessions/${sessionId}/guidance`, { text });
  }

  blobUrl(contentHash: string): string {
    return `${this.baseUrl}/v1/blobs/${contentHash}`;
  }
}
