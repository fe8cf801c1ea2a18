import type {
  AdvanceResult,
  AnnotationTask,
  ClustersView,
  LabelResult,
  Report,
  StateSummary,
  TaskStatus,
} from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.code = code;
    this.status = status;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client for the annotation service; fetch is injectable for tests. */
export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      const code = body && body.code ? String(body.code) : "http-error";
      const message =
        body && body.message ? String(body.message) : `HTTP ${response.status}`;
      throw new ApiError(code, message, response.status);
    }
    return body as T;
  }

  getState(): Promise<StateSummary> {
    return this.request<StateSummary>("/api/state");
  }

  getTasks(status?: TaskStatus): Promise<AnnotationTask[]> {
    const query = status ? `?status=${encodeURIComponent(status)}` : "";
    return this.request<AnnotationTask[]>(`/api/tasks${query}`);
  }

  submitLabel(sampleId: string, text: string): Promise<LabelResult> {
    return this.request<LabelResult>(
      `/api/tasks/${encodeURIComponent(sampleId)}/label`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ text }),
      },
    );
  }

  advance(allowSkip = false): Promise<AdvanceResult> {
    return this.request<AdvanceResult>("/api/iterations/advance", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ allow_skip: allowSkip }),
    });
  }

  getReport(): Promise<Report> {
    return this.request<Report>("/api/report");
  }

  getClusters(): Promise<ClustersView> {
    return this.request<ClustersView>("/api/clusters");
  }

  audioUrl(sampleId: string): string {
    return `${this.baseUrl}/api/audio/${encodeURIComponent(sampleId)}`;
  }
}
