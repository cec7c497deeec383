/**
 * Draft-span state machine over the annotated text of one segment.
 *
 * Offsets are character offsets (JS code-unit indices agree with the server
 * for BMP text; offsets are produced and consumed against the same string)
 * into the annotated text: the shown target plus a " [MISSING]" sentinel.
 * A click on the sentinel token marks missing content. Clicking a highlight
 * cycles it minor -> major -> removed. Overlapping spans are allowed; each
 * highlight is a separate error.
 */

import type { SeverityName, SpanPayload } from "./types.js";

export const MISSING_SENTINEL = "[MISSING]";

export interface DraftSpan {
  start: number;
  end: number;
  severity: SeverityName;
  category: string | null;
  missing: boolean;
}

export function annotatedText(target: string): string {
  return target + " " + MISSING_SENTINEL;
}

/** Character interval of the sentinel token within the annotated text. */
export function sentinelRange(target: string): [number, number] {
  const start = target.length + 1;
  return [start, start + MISSING_SENTINEL.length];
}

function overlapsSentinel(target: string, start: number, end: number): boolean {
  const [lo, hi] = sentinelRange(target);
  return Math.max(start, lo) < Math.min(end, hi) || (start === end && start >= lo && start <= hi);
}

/**
 * A completed selection gesture (drag, or click start & click end).
 * Returns the new span list; invalid selections leave it unchanged.
 * New spans always start at minor severity.
 */
export function applySelection(
  spans: readonly DraftSpan[],
  target: string,
  a: number,
  b: number,
): DraftSpan[] {
  let start = Math.min(a, b);
  let end = Math.max(a, b);
  const full = annotatedText(target).length;
  if (start < 0 || end > full) return [...spans];
  if (overlapsSentinel(target, start, end)) {
    // any selection touching the sentinel is a missing-content mark
    return [...spans, makeMissingSpan(target)];
  }
  if (start === end) return [...spans]; // zero-width selection on the text proper
  end = Math.min(end, target.length);
  return [...spans, { start, end, severity: "minor", category: null, missing: false }];
}

export function makeMissingSpan(target: string): DraftSpan {
  const [lo, hi] = sentinelRange(target);
  return { start: lo, end: hi, severity: "minor", category: null, missing: true };
}

function containsOffset(span: DraftSpan, offset: number): boolean {
  return span.start <= offset && offset < span.end;
}

/**
 * A click on existing highlights: the topmost (most recently added) span
 * under the offset cycles minor -> major -> removed.
 */
export function cycleSeverityAt(
  spans: readonly DraftSpan[],
  offset: number,
): DraftSpan[] {
  for (let i = spans.length - 1; i >= 0; i--) {
    const span = spans[i]!;
    if (!containsOffset(span, offset)) continue;
    const next = [...spans];
    if (span.severity === "minor") {
      next[i] = { ...span, severity: "major" };
    } else {
      next.splice(i, 1); // major -> removed
    }
    return next;
  }
  return [...spans];
}

/** True when the offset lands on any existing highlight. */
export function hasSpanAt(spans: readonly DraftSpan[], offset: number): boolean {
  return spans.some((s) => containsOffset(s, offset));
}

export function setCategory(
  spans: readonly DraftSpan[],
  index: number,
  category: string,
): DraftSpan[] {
  const next = [...spans];
  const span = next[index];
  if (span) next[index] = { ...span, category };
  return next;
}

/**
 * The exact payload sent to the API. Field order is fixed so that a span
 * rendered from server state and resubmitted unchanged is byte-identical.
 */
export function toPayload(spans: readonly DraftSpan[]): SpanPayload[] {
  return spans.map((s) => ({
    start: s.start,
    end: s.end,
    severity: s.severity,
    category: s.category,
    missing: s.missing,
  }));
}

export function fromPayload(spans: readonly SpanPayload[]): DraftSpan[] {
  return spans.map((s) => ({
    start: s.start,
    end: s.end,
    severity: s.severity,
    category: s.category ?? null,
    missing: s.missing,
  }));
}
