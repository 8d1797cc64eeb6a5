import {
  FieldError,
  NetworkError,
  PackageInfo,
  RecommendRequest,
  RecommendResponse,
} from "./types";

/** Fetch-shaped transport so tests can intercept every request. */
export type Transport = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly transport: Transport = (url, init) => fetch(url, init),
  ) {}

  async recommend(
    request: RecommendRequest,
    signal?: AbortSignal,
  ): Promise<RecommendResponse> {
    let response: Response;
    try {
      response = await this.transport(`${this.baseUrl}/v1/recommend`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(request),
        signal,
      });
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") throw err;
      throw new NetworkError(String(err));
    }
    if (response.status === 400) {
      const payload = await response.json().catch(() => null);
      const detail = payload?.error ?? {};
      throw new FieldError(detail.message ?? "bad request", detail.field ?? null);
    }
    if (!response.ok) {
      throw new NetworkError(`service returned ${response.status}`);
    }
    return (await response.json()) as RecommendResponse;
  }

  async packages(): Promise<PackageInfo[]> {
    let response: Response;
    try {
      response = await this.transport(`${this.baseUrl}/v1/packages`);
    } catch (err) {
      throw new NetworkError(String(err));
    }
    if (!response.ok) throw new NetworkError(`service returned ${response.status}`);
    const payload = await response.json();
    return payload.packages as PackageInfo[];
  }
}
