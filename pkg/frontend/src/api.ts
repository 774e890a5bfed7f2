// Client for the review service REST endpoints.

export type Verdict = "accept" | "reject" | "flag";
export type PreviewKind = "rgb" | "dem-hillshade" | "dem-colormap";

export interface SampleSummary {
  id: string;
  annotation: string | null;
  terrain: string | null;
  resolution_tier: number | null;
  review_state: string;
  split: string | null;
  alignment_score: number | null;
}

export interface ReviewStats {
  counts: {
    pending: number;
    accepted: number;
    rejected: number;
    flagged: number;
  };
  total: number;
  reviewed: number;
  rejection_rate: number;
}

export interface PairsPage {
  items: SampleSummary[];
  page: number;
  page_size: number;
  total: number;
}

/** Everything the UI needs from the server; tests swap in a fake. */
export interface ReviewApi {
  listPairs(state: string, page: number, pageSize: number): Promise<PairsPage>;
  postVerdict(sampleId: string, verdict: Verdict, reviewer: string, reason?: string): Promise<void>;
  getStats(): Promise<ReviewStats>;
  previewUrl(sampleId: string, kind: PreviewKind): string;
}

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
  }
}

export class HttpReviewApi implements ReviewApi {
  constructor(private readonly baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await fetch(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(`API unreachable: ${String(err)}`);
    }
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (body && typeof body.error === "string") detail = body.error;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(detail, resp.status);
    }
    return (await resp.json()) as T;
  }

  listPairs(state: string, page: number, pageSize: number): Promise<PairsPage> {
    const params = new URLSearchParams({
      state,
      page: String(page),
      page_size: String(pageSize),
    });
    return this.request<PairsPage>(`/api/pairs?${params}`);
  }

  async postVerdict(
    sampleId: string,
    verdict: Verdict,
    reviewer: string,
    reason?: string,
  ): Promise<void> {
    await this.request(`/api/pairs/${encodeURIComponent(sampleId)}/verdict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(reason ? { verdict, reviewer, reason } : { verdict, reviewer }),
    });
  }

  getStats(): Promise<ReviewStats> {
    return this.request<ReviewStats>("/api/stats");
  }

  previewUrl(sampleId: string, kind: PreviewKind): string {
    return `${this.baseUrl}/api/pairs/${encodeURIComponent(sampleId)}/preview?kind=${kind}`;
  }
}
