// Client-side session state. Turns only ever come from gateway responses;
// a failed send leaves the transcript untouched and offers a retry.

import { ApiClient, ApiError } from "./api.js";
import type {
  HardwareProfileForm,
  ModelSpec,
  SelectionMode,
  SelectionResult,
  TurnRecord,
} from "./types.js";

export interface UiTurn extends TurnRecord {
  latency_ms: number;
}

export class ChatStore {
  authenticated = false;
  models: ModelSpec[] = [];
  sessionId: string | null = null;
  turns: UiTurn[] = [];
  pending = false;
  pendingQuery: string | null = null;
  failedQuery: string | null = null;
  error: string | null = null;

  constructor(private api: ApiClient) {}

  /** Validate the token with a models probe and open a chat session. */
  async login(token: string): Promise<boolean> {
    if (!token.trim()) {
      this.error = "token must not be empty";
      return false;
    }
    try {
      this.models = await this.api.login(token);
    } catch (err) {
      this.error = err instanceof ApiError && err.status === 401 ? "invalid token" : String(err);
      return false;
    }
    this.authenticated = true;
    this.error = null;
    const created = await this.api.createSession();
    this.sessionId = created.session_id;
    return true;
  }

  /** One in-flight request per session; concurrent sends are ignored. */
  async send(text: string): Promise<boolean> {
    if (!this.sessionId || this.pending || !text.trim()) return false;
    this.pending = true;
    this.pendingQuery = text;
    this.failedQuery = null;
    this.error = null;
    try {
      const reply = await this.api.chat(this.sessionId, text);
      this.turns.push({
        user_query: text,
        response: reply.response,
        citations: reply.citations,
        timestamp: Date.now() / 1000,
        latency_ms: reply.latency_ms,
      });
      return true;
    } catch (err) {
      this.failedQuery = text;
      this.error = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
      return false;
    } finally {
      this.pending = false;
      this.pendingQuery = null;
    }
  }

  retry(): Promise<boolean> {
    if (!this.failedQuery) return Promise.resolve(false);
    const query = this.failedQuery;
    this.failedQuery = null;
    return this.send(query);
  }
}

export class SelectionStore {
  profile: HardwareProfileForm = {
    name: "my-device",
    device_class: "consumer_gpu",
    vram_gb: 16,
    ram_gb: 32,
  };
  mode: SelectionMode = "accuracy";
  result: SelectionResult | null = null;
  fieldErrors: Partial<Record<keyof HardwareProfileForm, string>> = {};
  error: string | null = null;

  constructor(private api: ApiClient) {}

  validate(): boolean {
    this.fieldErrors = {};
    if (!this.profile.name.trim()) this.fieldErrors.name = "name is required";
    if (this.profile.vram_gb < 0) this.fieldErrors.vram_gb = "must be >= 0";
    if (this.profile.ram_gb < 0) this.fieldErrors.ram_gb = "must be >= 0";
    return Object.keys(this.fieldErrors).length === 0;
  }

  async submit(): Promise<boolean> {
    if (!this.validate()) return false;
    try {
      this.result = await this.api.selectModel(this.profile, this.mode);
      this.error = null;
      return true;
    } catch (err) {
      this.error = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
      return false;
    }
  }

  /** Mode toggle re-ranks with the profile fields left exactly as they are. */
  async setMode(mode: SelectionMode): Promise<boolean> {
    this.mode = mode;
    return this.submit();
  }
}
