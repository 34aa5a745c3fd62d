/** Thin fetch wrapper over the service endpoints.
 *
 * Every method returns the server document unchanged. Errors carry
 * the HTTP status plus whatever body the server sent, so panels can
 * render server-side reasons verbatim.
 */

import type {
  ConfigDoc,
  ConfigOut,
  FinalizeOut,
  InfoOut,
  LoudnessOut,
  ReportDoc,
  ReportRow,
  SessionOut,
  TapAck,
  TapEntry,
  TuningVerdict,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: unknown,
  ) {
    super(`service answered ${status}`);
  }

  /** Server-side reason, shown to the operator as-is. */
  get detail(): string {
    const body = this.body as { detail?: unknown } | null;
    return body && typeof body.detail === "string"
      ? body.detail
      : this.message;
  }
}

export class ApiClient {
  constructor(
    private readonly base: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  url(path: string): string {
    return this.base.replace(/\/$/, "") + path;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.url(path), init);
    const body = await response.json().catch(() => null);
    if (!response.ok) throw new ApiError(response.status, body);
    return body as T;
  }

  private post<T>(path: string, payload?: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload ?? {}),
    });
  }

  info(): Promise<InfoOut> {
    return this.request("/");
  }

  createSession(durationMs: number): Promise<SessionOut> {
    return this.post("/sessions", { duration_ms: durationMs });
  }

  appendTaps(sessionId: string, taps: TapEntry[]): Promise<TapAck> {
    return this.post(`/sessions/${sessionId}/taps`, { taps });
  }

  finalize(sessionId: string): Promise<FinalizeOut> {
    return this.post(`/sessions/${sessionId}/finalize`);
  }

  getConfig(): Promise<ConfigOut> {
    return this.request("/config");
  }

  /** Returns the verdict for both outcomes; 422 is an answer here,
   * not an error. Other statuses still throw. */
  async putConfig(proposal: ConfigDoc): Promise<TuningVerdict> {
    const response = await this.fetchImpl(this.url("/config"), {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(proposal),
    });
    const body = await response.json().catch(() => null);
    if (response.ok || response.status === 422) return body as TuningVerdict;
    throw new ApiError(response.status, body);
  }

  listReports(): Promise<{ reports: ReportRow[] }> {
    return this.request("/reports");
  }

  getReport(reportId: string): Promise<ReportDoc> {
    return this.request(`/reports/${reportId}`);
  }

  audioUrl(reportId: string): string {
    return this.url(`/reports/${reportId}/audio`);
  }

  getLoudness(reportId: string): Promise<LoudnessOut> {
    return this.request(`/reports/${reportId}/loudness`);
  }
}
