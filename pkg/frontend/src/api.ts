/** Typed client for the diffusionx session API. */

export interface LatencyBreakdown {
  predict_s: number;
  generate_s: number;
  transmit_s: number;
  total_s: number;
}

export interface PromptResponse {
  session_id: string;
  round_index: number;
  phase: string;
  image: string;
  image_url: string;
  predicted_strength: number | null;
  steps: number;
  latency: LatencyBreakdown;
}

export interface FinalizeResponse {
  session_id: string;
  phase: string;
  image: string;
  image_url: string;
  strength_used: number;
  steps: number;
  latency: LatencyBreakdown;
}

export interface RoundRecord {
  round_index: number;
  prompt: string;
  predicted_strength: number | null;
  steps_executed: number;
  latency: LatencyBreakdown;
  tier: "edge" | "cloud";
  image_digest: string | null;
}

export interface SessionSnapshot {
  session_id: string;
  phase: string;
  round_index: number;
  current_prompt: string;
  current_image: string | null;
  history: RoundRecord[];
}

export interface MetricsRow {
  scenario: string;
  trans_latency_s: number;
  total_latency_s: number;
  delta_pct: number | null;
}

export interface MetricsReport {
  baseline: string | null;
  rows: MetricsRow[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    detail: string,
  ) {
    super(detail);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(`${base}${path}`, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const detail =
      typeof body === "object" && body !== null && "detail" in body
        ? String((body as { detail: unknown }).detail)
        : `HTTP ${response.status}`;
    throw new ApiError(response.status, detail);
  }
  return body as T;
}

export class ApiClient {
  constructor(public readonly base: string = "") {}

  createSession(): Promise<{ session_id: string; phase: string }> {
    return request(this.base, "/sessions", { method: "POST" });
  }

  submitPrompt(sessionId: string, prompt: string): Promise<PromptResponse> {
    return request(this.base, `/sessions/${sessionId}/prompt`, {
      method: "POST",
      body: JSON.stringify({ prompt }),
    });
  }

  finalize(sessionId: string): Promise<FinalizeResponse> {
    return request(this.base, `/sessions/${sessionId}/finalize`, { method: "POST" });
  }

  getSession(sessionId: string): Promise<SessionSnapshot> {
    return request(this.base, `/sessions/${sessionId}`);
  }

  getMetrics(): Promise<MetricsReport> {
    return request(this.base, "/metrics");
  }

  imageUrl(path: string): string {
    return `${this.base}${path}`;
  }
}
