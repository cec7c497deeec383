/**
 * DOM shell: renders one unit (a whole document, so the annotator sees all
 * context) with source/target side by side, severity-shaded highlights, the
 * sentinel token, an anchored slider, and per-segment reset/completed
 * affordances. Every character is its own element, which makes selection
 * offsets exact; the backend tolerates rough highlights, the offsets stay
 * character-true anyway.
 */

import { annotatedText } from "./spans.js";
import type { UIAnnotationState } from "./state.js";
import { SLIDER_ANCHORS } from "./state.js";
import type { SegmentView, UnitItem } from "./types.js";

export interface SegmentCallbacks {
  onSelection(segId: string, target: string, a: number, b: number): void;
  onClick(segId: string, target: string, offset: number): void;
  onScore(segId: string, value: number): void;
  onReset(segId: string): void;
  onSubmit(segId: string): void;
  onPickCategory(segId: string, spanIndex: number): void;
}

const SEVERITY_CLASS = { minor: "hl-minor", major: "hl-major" } as const;

export function renderUnit(
  root: HTMLElement,
  unit: UnitItem,
  state: UIAnnotationState,
  callbacks: SegmentCallbacks,
): void {
  root.textContent = "";
  const heading = document.createElement("h2");
  heading.textContent = `Document ${unit.doc_id} — system ${unit.blind_system}`;
  root.appendChild(heading);
  for (const segment of unit.segments) {
    root.appendChild(renderSegment(segment, unit, state, callbacks));
  }
}

function renderSegment(
  segment: SegmentView,
  unit: UnitItem,
  state: UIAnnotationState,
  callbacks: SegmentCallbacks,
): HTMLElement {
  const row = document.createElement("section");
  row.className = "segment";
  row.dataset.segId = segment.seg_id;
  row.addEventListener("mouseenter", () => state.focusSegment(segment.seg_id));

  const source = document.createElement("div");
  source.className = "source";
  source.textContent = segment.source;
  row.appendChild(source);

  const target = document.createElement("div");
  target.className = "target";
  const shown = annotatedText(segment.target);
  const draft = state.draft(segment.seg_id);
  let anchor: number | null = null;
  for (let i = 0; i < shown.length; i++) {
    const ch = document.createElement("span");
    ch.textContent = shown[i]!;
    ch.dataset.offset = String(i);
    for (let s = draft.spans.length - 1; s >= 0; s--) {
      const span = draft.spans[s]!;
      if (span.start <= i && i < span.end) {
        ch.classList.add(SEVERITY_CLASS[span.severity]);
        break;
      }
    }
    if (i > segment.target.length) ch.classList.add("sentinel");
    ch.addEventListener("mousedown", () => {
      anchor = i;
    });
    ch.addEventListener("mouseup", () => {
      if (anchor === null || anchor === i) {
        callbacks.onClick(segment.seg_id, segment.target, i);
      } else {
        callbacks.onSelection(segment.seg_id, segment.target, anchor, i + 1);
      }
      anchor = null;
    });
    target.appendChild(ch);
  }
  row.appendChild(target);

  if (unit.protocol === "MQM") {
    const list = document.createElement("ul");
    list.className = "span-list";
    draft.spans.forEach((span, index) => {
      const item = document.createElement("li");
      item.textContent =
        `${span.severity} [${span.start}, ${span.end}) ` + (span.category ?? "(pick category)");
      if (span.category === null) item.classList.add("needs-category");
      item.addEventListener("click", () => callbacks.onPickCategory(segment.seg_id, index));
      list.appendChild(item);
    });
    row.appendChild(list);
  }

  if (unit.protocol !== "MQM") {
    row.appendChild(renderSlider(segment, state, callbacks));
  }

  const controls = document.createElement("div");
  controls.className = "controls";
  const reset = document.createElement("button");
  reset.textContent = "reset";
  reset.addEventListener("click", () => callbacks.onReset(segment.seg_id));
  controls.appendChild(reset);
  const submit = document.createElement("button");
  submit.textContent = draft.completed ? "completed" : "submit";
  submit.disabled = !state.canSubmit(segment.seg_id);
  submit.addEventListener("click", () => callbacks.onSubmit(segment.seg_id));
  controls.appendChild(submit);
  row.appendChild(controls);
  return row;
}

function renderSlider(
  segment: SegmentView,
  state: UIAnnotationState,
  callbacks: SegmentCallbacks,
): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "score-slider";
  const slider = document.createElement("input");
  slider.type = "range";
  slider.min = "0";
  slider.max = "100";
  const draft = state.draft(segment.seg_id);
  slider.value = draft.score === null ? "50" : String(draft.score);
  slider.addEventListener("input", () => {
    callbacks.onScore(segment.seg_id, Number(slider.value));
  });
  wrap.appendChild(slider);
  const labels = document.createElement("div");
  labels.className = "anchors";
  for (const [value, text] of SLIDER_ANCHORS) {
    const label = document.createElement("span");
    label.textContent = `${value}%: ${text}`;
    labels.appendChild(label);
  }
  wrap.appendChild(labels);
  return wrap;
}
