// Thin fetch client over the service endpoints. Only the endpoints the two
// screens need; errors carry the server's machine code so views can branch
// on consent denials (403) and conflicts (409).

import type {
  GroundedResponse,
  PendingArtifact,
  QueryRequest,
  Verdict,
} from "./types.js";

export interface ApiConfig {
  baseUrl: string;
  token: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function request<T>(
  config: ApiConfig,
  method: string,
  path: string,
  body?: unknown,
): Promise<T> {
  const response = await fetch(config.baseUrl + path, {
    method,
    headers: {
      Authorization: `Bearer ${config.token}`,
      "Content-Type": "application/json",
    },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  if (!response.ok) {
    let code = `HTTP${response.status}`;
    let message = response.statusText;
    try {
      const parsed = (await response.json()) as { code?: string; message?: string };
      if (parsed.code) code = parsed.code;
      if (parsed.message) message = parsed.message;
    } catch {
      // non-JSON error body; keep the status fallback
    }
    throw new ApiError(response.status, code, message);
  }
  return (await response.json()) as T;
}

export function postQuery(
  config: ApiConfig,
  query: QueryRequest,
): Promise<GroundedResponse> {
  return request(config, "POST", "/query", query);
}

export function postFeedback(
  config: ApiConfig,
  queryId: string,
  resolved: boolean,
): Promise<unknown> {
  return request(config, "POST", `/feedback/${queryId}`, { resolved });
}

export async function fetchQueue(
  config: ApiConfig,
  expertId: string,
): Promise<PendingArtifact[]> {
  const body = await request<{ queue: PendingArtifact[] }>(
    config,
    "GET",
    `/validation/queue?expert=${encodeURIComponent(expertId)}`,
  );
  return body.queue;
}

export function postDecision(
  config: ApiConfig,
  artifactId: string,
  verdict: Verdict,
  editedStatement?: string,
): Promise<unknown> {
  return request(config, "POST", `/artifacts/${artifactId}/decision`, {
    verdict,
    edited_statement: editedStatement ?? null,
  });
}
