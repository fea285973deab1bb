/** Typed client for the citation service HTTP API.
 *
 * The fetch implementation is injectable so tests can script the
 * transport; everything else is plain request/response shapes matching
 * the service's JSON schema (version pinned in SCHEMA_VERSION).
 */

export const SCHEMA_VERSION = 1;

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface ScoredItem {
  text: string;
  score: number;
}

export interface IntentSuggestion {
  label: string;
  probabilities: Record<string, number>;
}

export interface SuggestRequest {
  v: number;
  context_text?: string | null;
  instance_id?: string | null;
  cited_paper_id?: string | null;
}

export interface SuggestResponse {
  v: number;
  intent: IntentSuggestion;
  keywords: ScoredItem[];
  sentences: ScoredItem[];
}

export interface AttributesPayload {
  intent: string | null;
  keywords: string[];
  sentences: string[];
}

export interface DecodeParams {
  beam_width?: number;
  max_tokens?: number;
}

export interface GenerateRequest {
  v: number;
  context_text?: string | null;
  cited_paper_id?: string | null;
  attributes: AttributesPayload;
  decode: DecodeParams;
  compare_unconditional: boolean;
}

export interface GenerateResponse {
  v: number;
  request_id: string;
  conditional_sentence: string;
  unconditional_sentence: string | null;
  presentation_order: string[] | null;
}

/** Positional card preferences; the server maps them back to systems. */
export type Preference = "system_a" | "system_b" | "neutral";

export interface FeedbackRequest {
  v: number;
  request_id: string;
  preferences: Record<string, Preference>;
  attributes_snapshot: AttributesPayload | null;
}

export interface FeedbackAck {
  v: number;
  request_id: string;
  recorded: boolean;
}

export interface HealthResponse {
  status: string;
  v: number;
  models: Record<string, boolean>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      let detail = response.statusText || `HTTP ${response.status}`;
      try {
        const parsed: unknown = await response.json();
        if (
          parsed &&
          typeof parsed === "object" &&
          typeof (parsed as { detail?: unknown }).detail === "string"
        ) {
          detail = (parsed as { detail: string }).detail;
        }
      } catch {
        // keep the status text when the error body is not JSON
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  health(): Promise<HealthResponse> {
    return this.request("GET", "/health");
  }

  suggest(req: SuggestRequest): Promise<SuggestResponse> {
    return this.request("POST", "/suggest", req);
  }

  generate(req: GenerateRequest): Promise<GenerateResponse> {
    return this.request("POST", "/generate", req);
  }

  feedback(req: FeedbackRequest): Promise<FeedbackAck> {
    return this.request("POST", "/feedback", req);
  }
}
