// Typed client for the session-service HTTP API.  One method, one request;
// all orchestration stays on the server.

import type { SessionEvent, SessionView } from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchFn = typeof fetch;

export class ApiClient {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchFn: FetchFn = (...args) => fetch(...args),
  ) {}

  async createSession(problem: string): Promise<SessionView> {
    return this.request("POST", "/sessions", { problem });
  }

  async getSession(id: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${id}`);
  }

  async postMessage(id: string, text: string): Promise<SessionView> {
    return this.request("POST", `/sessions/${id}/messages`, { text });
  }

  async getEvents(id: string, since = 0, waitMs = 0): Promise<SessionEvent[]> {
    const query = waitMs > 0 ? `?since=${since}&wait_ms=${waitMs}` : `?since=${since}`;
    const body = await this.request<{ events: SessionEvent[] }>(
      "GET",
      `/sessions/${id}/events${query}`,
    );
    return body.events;
  }

  streamUrl(id: string, since = 0): string {
    return `${this.baseUrl}/sessions/${id}/events/stream?since=${since}`;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    let parsed: unknown;
    try {
      parsed = text === "" ? null : JSON.parse(text);
    } catch {
      throw new ApiError(response.status, "bad_response", `unparseable body: ${text.slice(0, 80)}`);
    }
    if (!response.ok) {
      const err = parsed as { error?: string; code?: string } | null;
      throw new ApiError(
        response.status,
        err?.code ?? "http_error",
        err?.error ?? `HTTP ${response.status}`,
      );
    }
    return parsed as T;
  }
}
