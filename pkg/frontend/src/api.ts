// Typed client for the trailbot JSON API. All UI traffic goes through here.

export type RouteKind = "recommendation" | "structured" | "review_rag" | "out_of_scope";

export interface SourceRef {
  review_id: string;
  snippet: string;
}

export interface Timings {
  route_ms: number;
  retrieve_ms: number;
  llm_ms: number;
  total_ms: number;
}

export interface ChatResponse {
  session_id: string;
  answer: string;
  route: RouteKind;
  route_confidence: number;
  sources: SourceRef[];
  timings: Timings;
  k_used: number | null;
  trail_id: string | null;
  clarification: boolean;
  candidates: string[];
}

export interface Trail {
  id: string;
  name: string;
  town: string;
  length_miles: number;
  difficulty: "easy" | "moderate" | "difficult";
  activities: string[];
  pets_allowed: "yes" | "no" | "unknown";
  wheelchair_accessible: "yes" | "no" | "unknown";
  description: string;
}

export interface Review {
  id: string;
  trail_id: string;
  source: string;
  text: string;
  fetched_at: string | null;
}

export interface ApiErrorBody {
  error: string;
  backend?: string;
  position?: number;
}

/** Non-2xx response carrying the server's error payload. */
export class ApiError extends Error {
  readonly status: number;
  readonly body: ApiErrorBody;

  constructor(status: number, body: ApiErrorBody) {
    super(body.error || `HTTP ${status}`);
    this.status = status;
    this.body = body;
  }

  get isBackendDown(): boolean {
    return this.status === 503;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function requestJson<T>(
  fetchFn: FetchLike,
  url: string,
  init?: RequestInit,
): Promise<T> {
  const response = await fetchFn(url, init);
  const text = await response.text();
  let data: unknown = null;
  try {
    data = text ? JSON.parse(text) : null;
  } catch {
    data = { error: text || `HTTP ${response.status}` };
  }
  if (!response.ok) {
    const body = (data ?? { error: `HTTP ${response.status}` }) as ApiErrorBody;
    if (typeof body.error !== "string") {
      throw new ApiError(response.status, { error: `HTTP ${response.status}` });
    }
    throw new ApiError(response.status, body);
  }
  return data as T;
}

export class TrailbotClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  /** POST /api/chat. Never auto-retried: the UI offers manual retry instead. */
  chat(message: string, sessionId: string | null): Promise<ChatResponse> {
    const payload: Record<string, string> = { message };
    if (sessionId) payload.session_id = sessionId;
    return requestJson<ChatResponse>(this.fetchFn, `${this.base}/api/chat`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  trails(filter = "", limit?: number): Promise<Trail[]> {
    const params = new URLSearchParams();
    if (filter) params.set("filter", filter);
    if (limit !== undefined) params.set("limit", String(limit));
    const query = params.toString();
    return requestJson<Trail[]>(
      this.fetchFn,
      `${this.base}/api/trails${query ? `?${query}` : ""}`,
    );
  }

  trailReviews(trailId: string): Promise<Review[]> {
    return requestJson<Review[]>(
      this.fetchFn,
      `${this.base}/api/trails/${encodeURIComponent(trailId)}/reviews`,
    );
  }

  async health(): Promise<boolean> {
    try {
      const body = await requestJson<{ status: string }>(
        this.fetchFn,
        `${this.base}/api/health`,
      );
      return body.status === "ok";
    } catch {
      return false;
    }
  }
}
