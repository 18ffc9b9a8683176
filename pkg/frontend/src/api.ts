// Gateway client. Every network call the overlay makes goes through this
// class, and the constructor refuses anything but a loopback base URL:
// the overlay never talks to an upstream provider itself.

import type {
  ChatRequest,
  ChatResponse,
  DetectResponse,
  FileRedactResponse,
  GatewayError,
  ManualSpan,
  RedactResponse,
  RehydrateResponse,
  SessionInfo,
} from "./types.js";

const LOOPBACK_HOSTS = new Set(["127.0.0.1", "localhost", "[::1]", "::1"]);

export class GatewayRequestError extends Error {
  readonly code: string;
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, body: GatewayError) {
    super(body.message);
    this.code = body.code;
    this.status = status;
    this.detail = body.detail;
  }
}

export class GatewayClient {
  readonly baseUrl: string;
  private readonly fetchImpl: typeof fetch;

  constructor(baseUrl: string, fetchImpl?: typeof fetch) {
    const parsed = new URL(baseUrl);
    if (!LOOPBACK_HOSTS.has(parsed.hostname)) {
      throw new Error(`gateway must be loopback, got ${parsed.hostname}`);
    }
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? fetch;
  }

  private async request<T>(path: string, init: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const body = await response.json();
    if (!response.ok) {
      throw new GatewayRequestError(response.status, body as GatewayError);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  detect(text: string, sessionId?: string | null): Promise<DetectResponse> {
    return this.post("/v1/detect", { text, session_id: sessionId ?? null });
  }

  redact(
    text: string,
    manualSpans: ManualSpan[] = [],
    sessionId?: string | null,
  ): Promise<RedactResponse> {
    return this.post("/v1/redact", {
      text,
      manual_spans: manualSpans,
      session_id: sessionId ?? null,
    });
  }

  rehydrate(text: string, sessionId: string): Promise<RehydrateResponse> {
    return this.post("/v1/rehydrate", { text, session_id: sessionId });
  }

  chat(request: ChatRequest): Promise<ChatResponse> {
    return this.post("/v1/chat", { stream: false, ...request });
  }

  redactFile(
    file: File,
    sessionId?: string | null,
    manualRegions: ManualSpan[] = [],
  ): Promise<FileRedactResponse> {
    const form = new FormData();
    form.append("file", file, file.name);
    if (sessionId) form.append("session_id", sessionId);
    if (manualRegions.length > 0) {
      form.append("manual_regions", JSON.stringify(manualRegions));
    }
    return this.request("/v1/files/redact", { method: "POST", body: form });
  }

  session(sessionId: string): Promise<SessionInfo> {
    return this.request(`/v1/sessions/${encodeURIComponent(sessionId)}`, { method: "GET" });
  }

  purge(sessionId: string): Promise<{ purged: string }> {
    return this.request(`/v1/sessions/${encodeURIComponent(sessionId)}`, { method: "DELETE" });
  }
}
