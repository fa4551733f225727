// Thin client for the chat service HTTP API. Every method maps to exactly
// one request; errors carry the server's error code when one is present.

export interface BotAction {
  kind: string;
  text: string | null;
  photo_id: string | null;
}

export interface TranscriptEntry {
  role: "user" | "bot";
  kind: string;
  payload: unknown;
  turn: number;
  timestamp: number;
}

export interface SessionHandle {
  session_id: string;
  seed: number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function asJson(response: Response): Promise<any> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    throw new ApiError(
      response.status,
      body.code ?? "http-error",
      body.message ?? `request failed with status ${response.status}`,
    );
  }
  return body;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private post(path: string, init: RequestInit): Promise<Response> {
    return this.fetchFn(this.baseUrl + path, { method: "POST", ...init });
  }

  async createSession(photoIds: string[], seed?: number): Promise<SessionHandle> {
    const body: Record<string, unknown> = { photos: photoIds };
    if (seed !== undefined) body.seed = seed;
    const response = await this.post("/sessions", {
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return asJson(response);
  }

  async uploadPhoto(
    sessionId: string,
    data: ArrayBuffer | Uint8Array,
    photoId?: string,
  ): Promise<string> {
    const query = photoId ? `?photo_id=${encodeURIComponent(photoId)}` : "";
    const response = await this.post(`/sessions/${sessionId}/photos${query}`, {
      headers: { "content-type": "application/octet-stream" },
      body: data as BodyInit,
    });
    const body = await asJson(response);
    return body.photo_id;
  }

  async sendEvent(
    sessionId: string,
    kind: "command" | "user_text",
    payload: string,
  ): Promise<BotAction[]> {
    const response = await this.post(`/sessions/${sessionId}/events`, {
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ kind, payload }),
    });
    const body = await asJson(response);
    return body.actions;
  }

  async getTranscript(sessionId: string): Promise<TranscriptEntry[]> {
    const response = await this.fetchFn(
      `${this.baseUrl}/sessions/${sessionId}/transcript`,
    );
    const body = await asJson(response);
    return body.entries;
  }
}
