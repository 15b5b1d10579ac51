// JSON shapes of the gateway API (all endpoints under /api/v1, bearer auth).

export interface Citation {
  chunk_id: string;
  doc_id: string;
  score: number;
}

export interface ChatResponse {
  response: string;
  citations: Citation[];
  latency_ms: number;
}

export interface TurnRecord {
  user_query: string;
  response: string;
  citations: Citation[];
  timestamp: number;
}

export interface SessionHistory {
  session_id: string;
  created_at: number;
  turns: TurnRecord[];
}

export interface ModelSpec {
  name: string;
  params_count: number;
  quant: string;
  accuracy_score: number;
  notes: string;
}

export interface RankedEntry {
  spec: ModelSpec;
  est_bytes: number;
  latency_proxy: number;
  feasible: boolean;
  violations: string[];
}

export interface SelectionResult {
  chosen: ModelSpec | null;
  ranked: RankedEntry[];
}

export interface HardwareProfileForm {
  name: string;
  device_class: "jetson" | "consumer_gpu" | "cpu_only";
  vram_gb: number;
  ram_gb: number;
}

export type SelectionMode = "realtime" | "accuracy";

export interface ApiErrorBody {
  code: string;
  message: string;
}
