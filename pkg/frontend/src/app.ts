// Triage view: one pending pair at a time, keyboard verdicts (A/R/F),
// progress counters mirroring /api/stats. The server log is the only
// state; nothing persists client-side.

import type { ReviewApi, ReviewStats, SampleSummary, Verdict } from "./api.js";

const VERDICT_KEYS: Record<string, Verdict> = {
  a: "accept",
  r: "reject",
  f: "flag",
};

function esc(text: string): string {
  const div = document.createElement("div");
  div.textContent = text;
  return div.innerHTML;
}

export class ReviewApp {
  private current: SampleSummary | null = null;
  private stats: ReviewStats | null = null;
  private busy = false;
  private skip = 0; // arrow-key offset into the pending queue

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ReviewApi,
    private readonly reviewer: string = "reviewer",
  ) {}

  async start(): Promise<void> {
    document.addEventListener("keydown", this.onKeyDown);
    this.renderLoading();
    await this.loadNext();
  }

  stop(): void {
    document.removeEventListener("keydown", this.onKeyDown);
  }

  get currentSample(): SampleSummary | null {
    return this.current;
  }

  get isBusy(): boolean {
    return this.busy;
  }

  private onKeyDown = (ev: KeyboardEvent): void => {
    const target = ev.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) {
      return; // typing a reason must not fire shortcuts
    }
    const key = ev.key.toLowerCase();
    if (key in VERDICT_KEYS) {
      ev.preventDefault();
      void this.submitVerdict(VERDICT_KEYS[key]);
    } else if (ev.key === "ArrowRight") {
      ev.preventDefault();
      void this.skipBy(1);
    } else if (ev.key === "ArrowLeft") {
      ev.preventDefault();
      void this.skipBy(-1);
    }
  };

  private reasonText(): string | undefined {
    const input = this.root.querySelector<HTMLInputElement>("[data-testid=reason]");
    const value = input?.value.trim();
    return value ? value : undefined;
  }

  async skipBy(delta: number): Promise<void> {
    if (this.busy) return;
    this.skip = Math.max(0, this.skip + delta);
    await this.loadNext();
  }

  /** Fetch stats and the head of the pending queue (score ascending). */
  async loadNext(): Promise<void> {
    try {
      const stats = await this.api.getStats();
      this.stats = stats;
      if (stats.counts.pending === 0) {
        this.current = null;
        this.renderComplete();
        return;
      }
      if (this.skip >= stats.counts.pending) {
        this.skip = 0; // wrapped past the end of the queue
      }
      const page = await this.api.listPairs("pending", this.skip + 1, 1);
      const head = page.items[0];
      if (!head || head.review_state !== "pending") {
        // someone else reviewed it between fetches; rewind and retry once
        this.skip = 0;
        const retry = await this.api.listPairs("pending", 1, 1);
        this.current = retry.items[0] ?? null;
      } else {
        this.current = head;
      }
      if (this.current === null) {
        this.renderComplete();
      } else {
        this.renderSample();
      }
    } catch (err) {
      this.renderUnreachable(String(err));
    }
  }

  /**
   * Post a verdict for the current sample. The UI advances optimistically;
   * a failed POST rolls back to the same sample with an error banner.
   * Re-entry while a submission is in flight is ignored, so a duplicate
   * keypress cannot record a second verdict.
   */
  async submitVerdict(verdict: Verdict): Promise<void> {
    if (this.busy || this.current === null) return;
    const sample = this.current;
    const reason = this.reasonText();
    this.busy = true;
    this.renderAdvancing(sample, verdict);
    try {
      await this.api.postVerdict(sample.id, verdict, this.reviewer, reason);
      this.skip = 0;
      await this.loadNext();
    } catch (err) {
      this.current = sample; // rollback: verdict not recorded
      this.renderSample(`verdict not recorded: ${String(err)}`);
    } finally {
      this.busy = false;
    }
  }

  // --- rendering ---------------------------------------------------------

  private progressHtml(): string {
    if (!this.stats) return "";
    const c = this.stats.counts;
    const rate = (this.stats.rejection_rate * 100).toFixed(1);
    return `
      <div class="progress" data-testid="progress"
           data-pending="${c.pending}" data-accepted="${c.accepted}"
           data-rejected="${c.rejected}" data-flagged="${c.flagged}">
        <span>pending ${c.pending}</span>
        <span>accepted ${c.accepted}</span>
        <span>rejected ${c.rejected}</span>
        <span>flagged ${c.flagged}</span>
      </div>
      <div class="gauge" data-testid="rejection-gauge" data-rate="${this.stats.rejection_rate}">
        <div class="gauge-fill" style="width:${rate}%"></div>
        <span>rejection rate ${rate}%</span>
      </div>`;
  }

  private renderLoading(): void {
    this.root.innerHTML = `<div class="loading" data-testid="loading">loading queue...</div>`;
  }

  private renderSample(error?: string): void {
    const sample = this.current;
    if (!sample) return;
    const banner = error
      ? `<div class="banner error" data-testid="error-banner">${esc(error)}</div>`
      : "";
    this.root.innerHTML = `
      ${banner}
      ${this.progressHtml()}
      <div class="pair" data-testid="pair" data-sample-id="${esc(sample.id)}">
        <h2 data-testid="sample-id">${esc(sample.id)}</h2>
        <div class="previews">
          <figure>
            <img data-testid="rgb-preview" alt="rgb tile"
                 src="${this.api.previewUrl(sample.id, "rgb")}">
            <figcaption>RGB</figcaption>
          </figure>
          <figure>
            <img data-testid="hillshade-preview" alt="hillshaded elevation"
                 src="${this.api.previewUrl(sample.id, "dem-hillshade")}">
            <figcaption>Elevation (hillshade)</figcaption>
          </figure>
        </div>
        <p class="annotation" data-testid="annotation">${esc(sample.annotation ?? "")}</p>
        <p class="meta">
          terrain: ${esc(sample.terrain ?? "unclassified")} ·
          alignment score: ${sample.alignment_score?.toFixed(3) ?? "n/a"}
        </p>
        <label>reason <input data-testid="reason" type="text" placeholder="optional"></label>
        <p class="keys">A accept · R reject · F flag · arrows skip</p>
      </div>`;
  }

  private renderAdvancing(sample: SampleSummary, verdict: Verdict): void {
    this.root.innerHTML = `
      ${this.progressHtml()}
      <div class="advancing" data-testid="advancing">
        recorded <strong>${esc(verdict)}</strong> for ${esc(sample.id)}, loading next...
      </div>`;
  }

  private renderComplete(): void {
    this.root.innerHTML = `
      ${this.progressHtml()}
      <div class="complete" data-testid="completion">
        <h2>Queue complete</h2>
        <p>No pending pairs remain.</p>
      </div>`;
  }

  private renderUnreachable(message: string): void {
    this.root.innerHTML = `
      <div class="banner error" data-testid="retry-banner">
        <p>API unreachable: ${esc(message)}</p>
        <button data-testid="retry" type="button">retry</button>
      </div>`;
    this.root
      .querySelector("[data-testid=retry]")
      ?.addEventListener("click", () => void this.loadNext());
  }
}
