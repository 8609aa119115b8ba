// Typed client for the QA service HTTP API.

export interface EvidenceClue {
  id: string;
  modality: "text" | "table" | "image";
  score: number;
  text: string;
}

export interface AskResponse {
  answer: {
    text: string;
    provenance: string[];
    generator_kind: string;
  };
  clues: EvidenceClue[];
  contextual_question: {
    text: string;
    turn_count: number;
  };
  timings: Record<string, number>;
}

export interface SessionTranscript {
  session_id: string;
  turns: { question: string; answer: string }[];
}

export class ApiError extends Error {
  stage: string;
  status: number;

  constructor(stage: string, message: string, status: number) {
    super(message);
    this.stage = stage;
    this.status = status;
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (err) {
    throw new ApiError("network", `cannot reach ${url}: ${err}`, 0);
  }
  let body: unknown = null;
  try {
    body = await response.json();
  } catch {
    // non-JSON error bodies fall through to the status check below
  }
  if (!response.ok) {
    const error = (body as { error?: { stage?: string; message?: string } })?.error;
    throw new ApiError(
      error?.stage ?? "server",
      error?.message ?? `HTTP ${response.status}`,
      response.status,
    );
  }
  return body as T;
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  health(): Promise<{ status: string; clues: number }> {
    return request(this.url("/healthz"));
  }

  async createSession(): Promise<string> {
    const body = await request<{ session_id: string }>(this.url("/v1/sessions"), {
      method: "POST",
    });
    return body.session_id;
  }

  getSession(sessionId: string): Promise<SessionTranscript> {
    return request(this.url(`/v1/sessions/${sessionId}`));
  }

  ask(sessionId: string, question: string): Promise<AskResponse> {
    return request(this.url(`/v1/sessions/${sessionId}/ask`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ question }),
    });
  }
}
