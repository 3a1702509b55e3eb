// Thin fetch client for the expansion service. All state lives client-side;
// the server is stateless per request and reproducibility comes from seeds
// echoed back in responses.

import type {
  CompressResponse,
  ExpansionRequest,
  ExpansionResponse,
  MethodsPayload,
} from "./types.js";

export class ApiClientError extends Error {
  constructor(
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: typeof fetch = globalThis.fetch?.bind(globalThis),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") throw err;
      throw new ApiClientError("unreachable", `service unreachable: ${String(err)}`);
    }
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      const code = body?.code ?? `http-${response.status}`;
      throw new ApiClientError(code, body?.message ?? response.statusText);
    }
    return body as T;
  }

  getMethods(): Promise<MethodsPayload> {
    return this.request<MethodsPayload>("/api/methods");
  }

  expand(req: ExpansionRequest, signal?: AbortSignal): Promise<ExpansionResponse> {
    return this.request<ExpansionResponse>("/api/expand", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
      signal,
    });
  }

  compress(sentence: string, targetRate: number): Promise<CompressResponse> {
    return this.request<CompressResponse>("/api/compress", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ sentence, target_rate: targetRate }),
    });
  }
}
