// UI contract tests against a stubbed gateway: every request the client
// makes is matched against the documented /api/v1 surface, and the
// rendered HTML is checked for the chips/badges the operations promise.

import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { ChatStore, SelectionStore } from "../src/state.js";
import {
  escapeHtml,
  renderError,
  renderSelectionTable,
  renderTranscript,
  renderViolationBadges,
} from "../src/render.js";
import type { ChatResponse, ModelSpec, SelectionResult } from "../src/types.js";

const TOKEN = "good-token";

const CATALOG: ModelSpec[] = [
  { name: "LLaMa2-7B-Q8", params_count: 7e9, quant: "q8", accuracy_score: 51.9, notes: "" },
  { name: "LLaMa2-7B-Q4", params_count: 7e9, quant: "q4", accuracy_score: 49.9, notes: "" },
  { name: "OPT-125M-Q8", params_count: 125e6, quant: "q8", accuracy_score: 27.6, notes: "" },
];

const CHAT_REPLY: ChatResponse = {
  response: "CTX[cardiology#00000,nutrition#00000] Q[does aspirin protect the heart]",
  citations: [
    { chunk_id: "cardiology#00000", doc_id: "cardiology", score: 0.378 },
    { chunk_id: "nutrition#00000", doc_id: "nutrition", score: 0.19 },
  ],
  latency_ms: 3.2,
};

const JETSON_SELECTION: SelectionResult = {
  chosen: CATALOG[0],
  ranked: [
    { spec: CATALOG[0], est_bytes: 8.4e9, latency_proxy: 5.6e10, feasible: true, violations: [] },
    {
      spec: CATALOG[1],
      est_bytes: 4.2e9,
      latency_proxy: 2.8e10,
      feasible: false,
      violations: ["Q4_UNSUPPORTED"],
    },
  ],
};

// The documented API surface; anything else is a contract violation.
const DOCUMENTED = [
  /^\/api\/v1\/sessions$/,
  /^\/api\/v1\/sessions\/[^/]+\/chat$/,
  /^\/api\/v1\/sessions\/[^/]+$/,
  /^\/api\/v1\/models$/,
  /^\/api\/v1\/select-model$/,
  /^\/api\/v1\/ingest$/,
  /^\/api\/v1\/index\/rebuild$/,
  /^\/health$/,
  /^\/api\/v1\/health$/,
];

interface RecordedCall {
  method: string;
  path: string;
  auth: string | null;
  body: unknown;
}

class StubGateway {
  calls: RecordedCall[] = [];
  chatReply: ChatResponse = CHAT_REPLY;
  chatStatus = 200;
  selection: SelectionResult = JETSON_SELECTION;
  private pendingResolvers: Array<() => void> = [];
  holdChat = false;

  releaseChat(): void {
    for (const resolve of this.pendingResolvers) resolve();
    this.pendingResolvers = [];
  }

  install(): void {
    globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
      const url = new URL(String(input), "http://stub");
      const method = init?.method ?? "GET";
      const headers = new Headers(init?.headers);
      const call: RecordedCall = {
        method,
        path: url.pathname,
        auth: headers.get("authorization"),
        body: init?.body ? JSON.parse(String(init.body)) : undefined,
      };
      this.calls.push(call);
      if (!DOCUMENTED.some((re) => re.test(url.pathname))) {
        throw new Error(`undocumented endpoint hit: ${url.pathname}`);
      }
      const authorized = call.auth === `Bearer ${TOKEN}`;
      const json = (status: number, body: unknown) =>
        new Response(JSON.stringify(body), {
          status,
          headers: { "Content-Type": "application/json" },
        });

      if (url.pathname === "/health") return json(200, { status: "ok", index_loaded: true, backend: "mock" });
      if (!authorized) return json(401, { code: "UNAUTHORIZED", message: "missing bearer token" });
      if (url.pathname === "/api/v1/models") return json(200, CATALOG);
      if (url.pathname === "/api/v1/sessions" && method === "POST") return json(200, { session_id: "s-1" });
      if (/\/chat$/.test(url.pathname)) {
        if (this.holdChat) {
          await new Promise<void>((resolve) => this.pendingResolvers.push(resolve));
        }
        if (this.chatStatus !== 200) {
          return json(this.chatStatus, { code: "BACKEND_FAILURE", message: "backend exploded" });
        }
        return json(200, this.chatReply);
      }
      if (url.pathname === "/api/v1/select-model") return json(200, this.selection);
      return json(404, { code: "NOT_FOUND", message: "nope" });
    }) as typeof fetch;
  }
}

let gateway: StubGateway;
let api: ApiClient;

beforeEach(() => {
  gateway = new StubGateway();
  gateway.install();
  api = new ApiClient("http://stub");
});

afterEach(() => {
  // every call the client made must be part of the documented surface
  for (const call of gateway.calls) {
    expect(DOCUMENTED.some((re) => re.test(call.path)), `undocumented: ${call.path}`).toBe(true);
  }
});

describe("login", () => {
  it("valid token populates the models panel and opens a session", async () => {
    const store = new ChatStore(api);
    expect(await store.login(TOKEN)).toBe(true);
    expect(store.models.map((m) => m.name)).toContain("LLaMa2-7B-Q8");
    expect(store.sessionId).toBe("s-1");
    expect(store.error).toBeNull();
  });

  it("invalid token shows an error banner and creates no session", async () => {
    const store = new ChatStore(api);
    expect(await store.login("wrong")).toBe(false);
    expect(store.error).toBe("invalid token");
    expect(store.sessionId).toBeNull();
    expect(gateway.calls.filter((c) => c.path === "/api/v1/sessions")).toHaveLength(0);
    expect(renderError(store.error, false)).toContain("invalid token");
  });

  it("empty token fails client-side without any request", async () => {
    const store = new ChatStore(api);
    expect(await store.login("   ")).toBe(false);
    expect(gateway.calls).toHaveLength(0);
    expect(store.error).toMatch(/empty/);
  });
});

describe("chat", () => {
  async function loggedIn(): Promise<ChatStore> {
    const store = new ChatStore(api);
    await store.login(TOKEN);
    return store;
  }

  it("one round trip renders exactly two citation chips", async () => {
    const store = await loggedIn();
    expect(await store.send("does aspirin protect the heart")).toBe(true);
    expect(store.turns).toHaveLength(1);
    const html = renderTranscript(store.turns, null);
    expect(html.match(/class="citation-chip"/g)).toHaveLength(2);
    expect(html).toContain("cardiology");
    expect(html).toContain("3.2 ms");
  });

  it("assistant bubble carries the response verbatim, nothing fabricated", async () => {
    const store = await loggedIn();
    await store.send("q");
    expect(store.turns[0].response).toBe(CHAT_REPLY.response);
    expect(store.turns[0].citations).toEqual(CHAT_REPLY.citations);
    const html = renderTranscript(store.turns, null);
    expect(html).toContain(escapeHtml(CHAT_REPLY.response));
  });

  it("suppresses a second send while one is in flight", async () => {
    const store = await loggedIn();
    gateway.holdChat = true;
    const first = store.send("first");
    expect(store.pending).toBe(true);
    expect(await store.send("second")).toBe(false);
    gateway.releaseChat();
    expect(await first).toBe(true);
    const chatCalls = gateway.calls.filter((c) => /\/chat$/.test(c.path));
    expect(chatCalls).toHaveLength(1);
    expect(store.turns).toHaveLength(1);
  });

  it("backend failure keeps the transcript unchanged and offers retry", async () => {
    const store = await loggedIn();
    gateway.chatStatus = 502;
    expect(await store.send("q")).toBe(false);
    expect(store.turns).toHaveLength(0);
    expect(store.error).toContain("BACKEND_FAILURE");
    const banner = renderError(store.error, store.failedQuery !== null);
    expect(banner).toContain("retry-button");

    gateway.chatStatus = 200;
    expect(await store.retry()).toBe(true);
    expect(store.turns).toHaveLength(1);
  });

  it("pending query renders as an optimistic bubble", async () => {
    const store = await loggedIn();
    gateway.holdChat = true;
    const inflight = store.send("waiting...");
    const html = renderTranscript(store.turns, store.pendingQuery);
    expect(html).toContain("waiting...");
    expect(html).toContain("typing");
    gateway.releaseChat();
    await inflight;
  });
});

describe("model selection panel", () => {
  beforeEach(() => {
    api.setToken(TOKEN); // the panel only exists in the authenticated state
  });

  it("renders the Jetson Q4 violation badge", async () => {
    const store = new SelectionStore(api);
    store.profile = { name: "jetson", device_class: "jetson", vram_gb: 8, ram_gb: 8 };
    expect(await store.submit()).toBe(true);
    const html = renderSelectionTable(store.result);
    expect(html).toContain(`class="badge violation"`);
    expect(html).toContain("Q4 unsupported");
    expect(html).toContain(`class="badge ok"`);
    expect(html).toContain("chosen: <strong>LLaMa2-7B-Q8</strong>");
  });

  it("mode toggle re-ranks with identical profile fields", async () => {
    const store = new SelectionStore(api);
    store.profile = { name: "gpu", device_class: "consumer_gpu", vram_gb: 16, ram_gb: 32 };
    await store.submit();
    gateway.selection = {
      chosen: CATALOG[2],
      ranked: [
        { spec: CATALOG[2], est_bytes: 1.5e8, latency_proxy: 1e9, feasible: true, violations: [] },
      ],
    };
    await store.setMode("realtime");
    const selectCalls = gateway.calls.filter((c) => c.path === "/api/v1/select-model");
    expect(selectCalls).toHaveLength(2);
    const [first, second] = selectCalls.map((c) => c.body as { profile: unknown; mode: string });
    expect(second.profile).toEqual(first.profile);
    expect(first.mode).toBe("accuracy");
    expect(second.mode).toBe("realtime");
    expect(renderSelectionTable(store.result)).toContain("OPT-125M-Q8");
  });

  it("client-side validation blocks bad profiles without a request", async () => {
    const store = new SelectionStore(api);
    store.profile = { name: "", device_class: "cpu_only", vram_gb: -1, ram_gb: 4 };
    expect(await store.submit()).toBe(false);
    expect(store.fieldErrors.name).toBeDefined();
    expect(store.fieldErrors.vram_gb).toBeDefined();
    expect(gateway.calls).toHaveLength(0);
  });

  it("empty catalog renders the empty state", () => {
    const html = renderSelectionTable({ chosen: null, ranked: [] });
    expect(html).toContain("empty-state");
  });

  it("unknown violation codes fall back to the raw code", () => {
    const html = renderViolationBadges({
      spec: CATALOG[0],
      est_bytes: 1,
      latency_proxy: 1,
      feasible: false,
      violations: ["SOMETHING_NEW"],
    });
    expect(html).toContain("SOMETHING_NEW");
  });
});

describe("api client", () => {
  it("raises typed errors with gateway codes", async () => {
    const client = new ApiClient("http://stub", "bad");
    try {
      await client.createSession();
      expect.unreachable("should have thrown");
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).status).toBe(401);
      expect((err as ApiError).code).toBe("UNAUTHORIZED");
    }
  });

  it("escapes HTML in untrusted text", () => {
    expect(escapeHtml(`<img src=x onerror="pwn()">`)).not.toContain("<img");
  });
});
