/** Typed client for the session service HTTP API. */

export interface ItemView {
  item_id: string;
  prompt: string;
  categories: number;
  labels: string[] | null;
  position: number;
  max_items: number;
  progress: number;
  language: string;
}

export interface DemographicFieldView {
  name: string;
  kind: "text" | "integer";
  required: boolean;
}

export type Step =
  | { kind: "item"; item: ItemView }
  | { kind: "demographics"; fields: DemographicFieldView[] }
  | { kind: "result"; url: string };

export interface ProgressSnapshot {
  items_completed: number;
  progress: number;
  completed: boolean;
  next: Step;
  se?: number;
}

export interface ResultDoc {
  session_id: string;
  disposition: string;
  stop_reason: string | null;
  n_items: number;
  classification: string | null;
  records: { item_id: string; value: number }[];
}

export interface SessionCreated {
  session_id: string;
  token: string;
  step: Step;
}

/** Error body shape: {"detail": {"code": "...", ...extras}}. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: Record<string, unknown>,
  ) {
    super(`${status} ${code}`);
  }

  /** The item the server considers outstanding, when a conflict reports one. */
  get outstanding(): ItemView | null {
    return (this.detail["outstanding"] as ItemView | undefined) ?? null;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    const payload = text ? JSON.parse(text) : {};
    if (!response.ok) {
      const detail = (payload?.detail ?? {}) as Record<string, unknown>;
      throw new ApiError(response.status, String(detail["code"] ?? "error"), detail);
    }
    return payload as T;
  }

  createSession(studyId: string, demographics?: Record<string, string>): Promise<SessionCreated> {
    const body = demographics ? { demographics } : {};
    return this.request("POST", `/studies/${studyId}/sessions`, body);
  }

  getNext(sessionId: string): Promise<Step> {
    return this.request("GET", `/sessions/${sessionId}/next`);
  }

  postResponse(sessionId: string, itemId: string, value: number): Promise<ProgressSnapshot> {
    return this.request("POST", `/sessions/${sessionId}/responses`, {
      item_id: itemId,
      value,
    });
  }

  postDemographics(sessionId: string, payload: Record<string, string>): Promise<ProgressSnapshot> {
    return this.request("POST", `/sessions/${sessionId}/responses`, { demographics: payload });
  }

  getResult(sessionId: string): Promise<ResultDoc> {
    return this.request("GET", `/sessions/${sessionId}/result`);
  }
}
