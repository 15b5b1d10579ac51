// Typed client for the gateway HTTP API. The bearer token lives in memory
// only; nothing is persisted client-side.

import type {
  ChatResponse,
  HardwareProfileForm,
  ModelSpec,
  SelectionMode,
  SelectionResult,
  SessionHistory,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let code = "INTERNAL";
  let message = `HTTP ${resp.status}`;
  try {
    const body = await resp.json();
    if (body && typeof body.code === "string") code = body.code;
    if (body && typeof body.message === "string") message = body.message;
  } catch {
    // non-JSON error body; keep the defaults
  }
  return new ApiError(resp.status, code, message);
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private token: string = "",
  ) {}

  setToken(token: string): void {
    this.token = token;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {
      Authorization: `Bearer ${this.token}`,
    };
    if (body !== undefined) headers["Content-Type"] = "application/json";
    const resp = await fetch(`${this.baseUrl}/api/v1${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  /** Token probe: listing models succeeds only with a valid token. */
  async login(token: string): Promise<ModelSpec[]> {
    this.token = token;
    return this.request<ModelSpec[]>("GET", "/models");
  }

  createSession(): Promise<{ session_id: string }> {
    return this.request("POST", "/sessions");
  }

  chat(sessionId: string, query: string): Promise<ChatResponse> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/chat`, { query });
  }

  getSession(sessionId: string): Promise<SessionHistory> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}`);
  }

  selectModel(profile: HardwareProfileForm, mode: SelectionMode): Promise<SelectionResult> {
    const gb = 1_000_000_000;
    return this.request("POST", "/select-model", {
      profile: {
        name: profile.name,
        device_class: profile.device_class,
        vram_bytes: Math.round(profile.vram_gb * gb),
        ram_bytes: Math.round(profile.ram_gb * gb),
      },
      mode,
    });
  }

  health(): Promise<{ status: string; index_loaded: boolean; backend: string }> {
    return fetch(`${this.baseUrl}/health`).then((r) => r.json());
  }
}
