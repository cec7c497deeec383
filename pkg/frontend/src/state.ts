/**
 * Per-task UI state: drafts, slider, completion, active-time tracking.
 *
 * Drafts live in localStorage until the server accepts them, so a reload
 * loses nothing. The timer counts only visible time: hiding the tab pauses
 * it, which keeps coffee breaks out of the recorded durations.
 */

import type { DraftSpan } from "./spans.js";
import {
  applySelection,
  cycleSeverityAt,
  fromPayload,
  hasSpanAt,
  makeMissingSpan,
  sentinelRange,
  toPayload,
} from "./spans.js";
import type { ProtocolName, SpanPayload, SubmitRequest } from "./types.js";

export interface SegmentDraft {
  spans: DraftSpan[];
  score: number | null;
  sliderTouched: boolean;
  completed: boolean;
  activeMs: number;
}

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const emptyDraft = (): SegmentDraft => ({
  spans: [],
  score: null,
  sliderTouched: false,
  completed: false,
  activeMs: 0,
});

export class UIAnnotationState {
  private drafts = new Map<string, SegmentDraft>();
  private activeSegment: string | null = null;
  private visible = true;
  private lastTick: number | null = null;
  private pendingAnchor: { segId: string; offset: number } | null = null;

  constructor(
    private readonly protocol: ProtocolName,
    private readonly storageKey: string,
    private readonly storage: StorageLike | null = null,
    private readonly now: () => number = () => Date.now(),
  ) {
    this.restore();
  }

  get usesSpans(): boolean {
    return this.protocol !== "DA";
  }

  get usesScore(): boolean {
    return this.protocol !== "MQM";
  }

  draft(segId: string): SegmentDraft {
    let d = this.drafts.get(segId);
    if (!d) {
      d = emptyDraft();
      this.drafts.set(segId, d);
    }
    return d;
  }

  // --- gestures ---------------------------------------------------------------

  /** A drag selection; also cancels any pending click-click anchor. */
  select(segId: string, target: string, a: number, b: number): void {
    if (!this.usesSpans) return;
    this.pendingAnchor = null;
    const d = this.draft(segId);
    d.spans = applySelection(d.spans, target, a, b);
    this.persist();
  }

  /**
   * A bare click. Selections can also be made with two clicks: the first on
   * plain text arms an anchor, the next click in the same segment completes
   * the range. Clicks on highlights cycle severity; a sentinel click marks
   * missing content.
   */
  click(segId: string, target: string, offset: number): void {
    if (!this.usesSpans) return;
    const d = this.draft(segId);
    if (this.pendingAnchor && this.pendingAnchor.segId === segId) {
      const { offset: anchor } = this.pendingAnchor;
      this.pendingAnchor = null;
      d.spans = applySelection(d.spans, target, anchor, offset);
      this.persist();
      return;
    }
    this.pendingAnchor = null;
    if (hasSpanAt(d.spans, offset)) {
      d.spans = cycleSeverityAt(d.spans, offset);
      this.persist();
      return;
    }
    const [lo, hi] = sentinelRange(target);
    if (offset >= lo && offset < hi) {
      d.spans = [...d.spans, makeMissingSpan(target)];
      this.persist();
      return;
    }
    if (offset >= 0 && offset < target.length) {
      this.pendingAnchor = { segId, offset };
    }
  }

  setScore(segId: string, value: number): void {
    if (!this.usesScore) return;
    const d = this.draft(segId);
    d.score = value;
    d.sliderTouched = true;
    this.persist();
  }

  setSpanCategory(segId: string, index: number, category: string): void {
    const d = this.draft(segId);
    const span = d.spans[index];
    if (span) {
      d.spans = [...d.spans];
      d.spans[index] = { ...span, category };
      this.persist();
    }
  }

  reset(segId: string): void {
    if (this.pendingAnchor?.segId === segId) this.pendingAnchor = null;
    this.drafts.set(segId, emptyDraft());
    this.persist();
  }

  /** Server state restored when revisiting a completed segment. */
  load(segId: string, spans: SpanPayload[], score: number | null): void {
    const d = this.draft(segId);
    d.spans = fromPayload(spans);
    d.score = score;
    d.sliderTouched = score !== null;
    this.persist();
  }

  // --- completion rules ---------------------------------------------------------

  /** Submit is unlocked only when the protocol's requirements are met. */
  canSubmit(segId: string): boolean {
    const d = this.draft(segId);
    if (this.usesScore && !d.sliderTouched) return false;
    if (this.protocol === "MQM" && d.spans.some((s) => s.category === null)) return false;
    return true;
  }

  // --- timing ---------------------------------------------------------------------

  focusSegment(segId: string): void {
    this.tick();
    this.activeSegment = segId;
    this.lastTick = this.now();
  }

  visibilityChanged(visible: boolean): void {
    this.tick();
    this.visible = visible;
    this.lastTick = visible ? this.now() : null;
  }

  private tick(): void {
    if (this.activeSegment !== null && this.visible && this.lastTick !== null) {
      this.draft(this.activeSegment).activeMs += this.now() - this.lastTick;
      this.lastTick = this.now();
    }
  }

  // --- payload -----------------------------------------------------------------------

  buildSubmission(annotatorId: string, unitId: string, segId: string): SubmitRequest {
    this.tick();
    const d = this.draft(segId);
    const submittedAt = this.now() / 1000;
    const active = d.activeMs / 1000;
    return {
      annotator_id: annotatorId,
      unit_id: unitId,
      seg_id: segId,
      spans: toPayload(d.spans),
      score: this.usesScore ? d.score : null,
      started_at: submittedAt - active,
      submitted_at: submittedAt,
    };
  }

  markAccepted(segId: string): void {
    this.draft(segId).completed = true;
    this.persist();
  }

  // --- persistence -----------------------------------------------------------------------

  private persist(): void {
    if (!this.storage) return;
    const plain = Object.fromEntries(this.drafts);
    this.storage.setItem(this.storageKey, JSON.stringify(plain));
  }

  private restore(): void {
    if (!this.storage) return;
    const raw = this.storage.getItem(this.storageKey);
    if (!raw) return;
    try {
      const plain = JSON.parse(raw) as Record<string, SegmentDraft>;
      this.drafts = new Map(Object.entries(plain));
    } catch {
      this.storage.removeItem(this.storageKey);
    }
  }
}

/** Anchored labels shown along the score slider. */
export const SLIDER_ANCHORS: ReadonlyArray<readonly [number, string]> = [
  [0, "No meaning preserved"],
  [33, "Some meaning preserved"],
  [66, "Most meaning preserved and few grammar mistakes"],
  [100, "Perfect meaning and grammar"],
];
