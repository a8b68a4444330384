import type {
  EditProgressEvent,
  EditResultPayload,
  Envelope,
  GeneratePayload,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Error raised for any structured {code, message} the service returns. */
export class ServiceError extends Error {
  readonly code: string;
  readonly requestId: string;

  constructor(code: string, message: string, requestId = "") {
    super(message);
    this.name = "ServiceError";
    this.code = code;
    this.requestId = requestId;
  }
}

export interface GenerateBody {
  source?: unknown;
  n: number;
  band?: number;
  seed?: number;
  request_id?: string;
}

export interface EditBody {
  source: unknown;
  mode?: "ek" | "ep";
  target_keypoints?: number[][];
  target_parsec?: Record<string, number>;
  max_iter?: number;
  tol?: number;
  progressive?: boolean;
  request_id?: string;
}

interface StreamEvent {
  event: "progress" | "result" | "error";
  request_id: string;
  payload?: EditResultPayload;
  error?: { code: string; message: string };
  iteration?: number;
  objective?: number;
  sigma_bar?: number;
  airfoil?: { points: [number, number][] };
}

/**
 * Yield one parsed JSON object per newline-delimited line of the response
 * body, regardless of how the transport chunks it.
 */
export async function* ndjsonEvents(
  response: Response,
): AsyncGenerator<unknown> {
  const body = response.body;
  if (body === null) {
    for (const line of (await response.text()).split("\n")) {
      if (line.trim() !== "") yield JSON.parse(line);
    }
    return;
  }
  const reader = body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  for (;;) {
    const { done, value } = await reader.read();
    buffer += done ? decoder.decode() : decoder.decode(value, { stream: true });
    let nl: number;
    while ((nl = buffer.indexOf("\n")) >= 0) {
      const line = buffer.slice(0, nl);
      buffer = buffer.slice(nl + 1);
      if (line.trim() !== "") yield JSON.parse(line);
    }
    if (done) break;
  }
  if (buffer.trim() !== "") yield JSON.parse(buffer);
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async request<P>(
    path: string,
    init: RequestInit,
    signal?: AbortSignal,
  ): Promise<P> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      ...init,
      signal,
    });
    const envelope = (await response.json()) as Envelope<P>;
    if (envelope.error !== undefined) {
      throw new ServiceError(
        envelope.error.code,
        envelope.error.message,
        envelope.request_id,
      );
    }
    if (envelope.payload === undefined) {
      throw new ServiceError("protocol", "response carried neither payload nor error");
    }
    return envelope.payload;
  }

  private post<P>(path: string, body: unknown, signal?: AbortSignal): Promise<P> {
    return this.request<P>(
      path,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      },
      signal,
    );
  }

  generate(body: GenerateBody, signal?: AbortSignal): Promise<GeneratePayload> {
    return this.post("/v1/generate", body, signal);
  }

  edit(body: EditBody, signal?: AbortSignal): Promise<EditResultPayload> {
    return this.post("/v1/edit", { ...body, progressive: false }, signal);
  }

  /**
   * Progressive edit: onProgress fires once per streamed iteration event,
   * and the returned promise resolves with the final committed result.
   */
  async editProgressive(
    body: EditBody,
    onProgress: (event: EditProgressEvent) => void,
    signal?: AbortSignal,
  ): Promise<EditResultPayload> {
    const response = await this.fetchImpl(this.baseUrl + "/v1/edit", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ ...body, progressive: true }),
      signal,
    });
    if (!response.ok && response.headers.get("content-type")?.includes("json")) {
      const envelope = (await response.json()) as Envelope<never>;
      if (envelope.error !== undefined) {
        throw new ServiceError(
          envelope.error.code,
          envelope.error.message,
          envelope.request_id,
        );
      }
    }
    for await (const raw of ndjsonEvents(response)) {
      const event = raw as StreamEvent;
      if (event.event === "progress") {
        onProgress({
          iteration: event.iteration ?? 0,
          objective: event.objective ?? Number.NaN,
          sigma_bar: event.sigma_bar ?? Number.NaN,
          airfoil: event.airfoil ?? { points: [] },
        });
      } else if (event.event === "result") {
        if (event.payload === undefined) {
          throw new ServiceError("protocol", "result event without payload");
        }
        return event.payload;
      } else {
        const err = event.error ?? { code: "internal", message: "stream error" };
        throw new ServiceError(err.code, err.message, event.request_id);
      }
    }
    throw new ServiceError("protocol", "stream ended without a result event");
  }

  metrics(body: unknown, signal?: AbortSignal): Promise<Record<string, unknown>> {
    return this.post("/v1/metrics", body, signal);
  }

  airfoil(id: string, signal?: AbortSignal): Promise<Record<string, unknown>> {
    return this.request(
      `/v1/airfoil/${encodeURIComponent(id)}`,
      { method: "GET" },
      signal,
    );
  }

  manifest(
    opts: { offset?: number; limit?: number } = {},
    signal?: AbortSignal,
  ): Promise<Record<string, unknown>> {
    const params = new URLSearchParams();
    if (opts.offset !== undefined) params.set("offset", String(opts.offset));
    if (opts.limit !== undefined) params.set("limit", String(opts.limit));
    const qs = params.toString();
    return this.request(
      "/v1/manifest" + (qs === "" ? "" : "?" + qs),
      { method: "GET" },
      signal,
    );
  }
}
