/** Thin typed wrapper over the HTTP API. Every call passes the caller's
 * input through untouched; interpretation of values is the server's job. */

import type {
  AnnotationResponse,
  RecordDocument,
  SchemaBundle,
  SessionInfo,
  SetFieldResponse,
  TriggerResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(typeof detail === "string" ? detail : JSON.stringify(detail));
    this.name = "ApiError";
  }
}

async function parse(response: Response): Promise<unknown> {
  const text = await response.text();
  let body: unknown = text;
  try {
    body = text ? JSON.parse(text) : null;
  } catch {
    // non-JSON body stays a string
  }
  if (!response.ok) {
    const detail =
      body !== null && typeof body === "object" && "detail" in (body as Record<string, unknown>)
        ? (body as Record<string, unknown>)["detail"]
        : body;
    throw new ApiError(response.status, detail);
  }
  return body;
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async call(method: string, path: string, body?: unknown): Promise<unknown> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { "content-type": "application/json" };
    }
    return parse(await this.fetchFn(this.baseUrl + path, init));
  }

  getSchema(identity: string): Promise<SchemaBundle> {
    return this.call("GET", `/protocols/${identity}/schema`) as Promise<SchemaBundle>;
  }

  openSession(protocol: string, userId: string): Promise<SessionInfo> {
    return this.call("POST", "/sessions", {
      protocol,
      user_id: userId,
    }) as Promise<SessionInfo>;
  }

  setField(sessionId: string, fieldId: string, value: unknown): Promise<SetFieldResponse> {
    return this.call("PATCH", `/sessions/${sessionId}/fields`, {
      field_id: fieldId,
      value,
    }) as Promise<SetFieldResponse>;
  }

  triggerAssigner(sessionId: string, assignerId: string): Promise<TriggerResponse> {
    return this.call(
      "POST",
      `/sessions/${sessionId}/assigners/${assignerId}/trigger`,
    ) as Promise<TriggerResponse>;
  }

  annotate(
    sessionId: string,
    kind: "step" | "check",
    id: string,
    patch: { annotation?: string; checked?: boolean | null },
  ): Promise<AnnotationResponse> {
    return this.call("PATCH", `/sessions/${sessionId}/annotations`, {
      kind,
      id,
      ...patch,
    }) as Promise<AnnotationResponse>;
  }

  submit(sessionId: string, body: Record<string, unknown> = {}): Promise<RecordDocument> {
    return this.call("POST", `/sessions/${sessionId}/submit`, body) as Promise<RecordDocument>;
  }

  reportUrl(recordId: string, format: "html" | "markdown" = "html"): string {
    return `${this.baseUrl}/records/${recordId}/report?format=${format}`;
  }
}
