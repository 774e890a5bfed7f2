// In-memory stand-in for the review service, mirroring its documented
// semantics: pending queue sorted by alignment score then id, latest
// verdict wins, identical duplicate submissions are no-ops.

import { ApiError } from "../src/api.js";
import type {
  PairsPage,
  PreviewKind,
  ReviewApi,
  ReviewStats,
  SampleSummary,
  Verdict,
} from "../src/api.js";

interface LoggedVerdict {
  sampleId: string;
  verdict: Verdict;
  reviewer: string;
  reason?: string;
}

const STATE_OF: Record<Verdict, string> = {
  accept: "accepted",
  reject: "rejected",
  flag: "flagged",
};

export class FakeReviewApi implements ReviewApi {
  readonly log: LoggedVerdict[] = [];
  failNextPost = false;
  unreachable = false;
  private samples: Map<string, SampleSummary>;

  constructor(samples: SampleSummary[]) {
    this.samples = new Map(samples.map((s) => [s.id, { ...s }]));
  }

  static fixture(n: number): FakeReviewApi {
    const samples: SampleSummary[] = [];
    for (let i = 0; i < n; i++) {
      samples.push({
        id: `s${i}`,
        annotation: `tile ${i} with mountains and plains`,
        terrain: null,
        resolution_tier: 30,
        review_state: "pending",
        split: null,
        alignment_score: (i * 7 % n) / n,
      });
    }
    return new FakeReviewApi(samples);
  }

  private guard(): void {
    if (this.unreachable) throw new ApiError("connection refused");
  }

  async listPairs(state: string, page: number, pageSize: number): Promise<PairsPage> {
    this.guard();
    if (page < 1 || pageSize < 1 || pageSize > 200) throw new ApiError("bad page", 400);
    const items = [...this.samples.values()]
      .filter((s) => s.review_state === state)
      .sort((a, b) => {
        const sa = a.alignment_score ?? Infinity;
        const sb = b.alignment_score ?? Infinity;
        return sa === sb ? a.id.localeCompare(b.id) : sa - sb;
      });
    return {
      items: items.slice((page - 1) * pageSize, page * pageSize).map((s) => ({ ...s })),
      page,
      page_size: pageSize,
      total: items.length,
    };
  }

  async postVerdict(
    sampleId: string,
    verdict: Verdict,
    reviewer: string,
    reason?: string,
  ): Promise<void> {
    this.guard();
    if (this.failNextPost) {
      this.failNextPost = false;
      throw new ApiError("injected server error", 500);
    }
    const sample = this.samples.get(sampleId);
    if (!sample) throw new ApiError(`unknown sample ${sampleId}`, 404);
    const last = [...this.log].reverse().find((v) => v.sampleId === sampleId);
    if (
      last &&
      last.verdict === verdict &&
      last.reviewer === reviewer &&
      (last.reason ?? null) === (reason ?? null)
    ) {
      return; // idempotent duplicate: no new log entry
    }
    this.log.push({ sampleId, verdict, reviewer, reason });
    sample.review_state = STATE_OF[verdict];
  }

  async getStats(): Promise<ReviewStats> {
    this.guard();
    const counts = { pending: 0, accepted: 0, rejected: 0, flagged: 0 };
    for (const s of this.samples.values()) {
      counts[s.review_state as keyof typeof counts] += 1;
    }
    const reviewed = counts.accepted + counts.rejected + counts.flagged;
    return {
      counts,
      total: this.samples.size,
      reviewed,
      rejection_rate: reviewed ? counts.rejected / reviewed : 0,
    };
  }

  previewUrl(sampleId: string, kind: PreviewKind): string {
    return `/api/pairs/${sampleId}/preview?kind=${kind}`;
  }
}
