/**
 * Browser entry point: wires the API client, the tutorial gate, the draft
 * state and the renderer together. Configuration comes from query params:
 *   annotator.html?campaign=<id>&annotator=<token>&api=<base url>
 */

import { ApiClient, GateError, RejectedError } from "./api.js";
import { UIAnnotationState } from "./state.js";
import { TutorialFlow } from "./tutorial.js";
import { renderUnit } from "./render.js";
import type { NextItem, UnitItem } from "./types.js";

function config(): { api: string; campaign: string; annotator: string } {
  const params = new URLSearchParams(window.location.search);
  return {
    api: params.get("api") ?? "",
    campaign: params.get("campaign") ?? "default",
    annotator: params.get("annotator") ?? "anonymous",
  };
}

async function run(): Promise<void> {
  const { api, campaign, annotator } = config();
  const client = new ApiClient(api, campaign);
  const tutorial = new TutorialFlow(client, annotator);
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");

  const advance = async (): Promise<void> => {
    const item: NextItem = await client.next(annotator);
    if (item.kind === "done") {
      root.textContent = "All assigned work is complete. Thank you!";
      return;
    }
    if (item.kind === "tutorial") {
      renderTutorial(item.item.item_id, item.item.source, item.item.target);
      return;
    }
    renderTask(item);
  };

  const renderTutorial = (itemId: string, source: string, target: string): void => {
    // tutorial items reuse the unit renderer with a single pseudo-segment
    const state = new UIAnnotationState("ESA", `tutorial:${campaign}:${annotator}`,
      window.localStorage);
    const pseudo: UnitItem = {
      kind: "unit",
      unit_id: `tutorial:${itemId}`,
      doc_id: "tutorial",
      blind_system: "tutorial",
      protocol: "ESA",
      segments: [{ seg_id: itemId, source, target }],
    };
    const rerender = (): void =>
      renderUnit(root, pseudo, state, {
        onSelection: (seg, tgt, a, b) => { state.select(seg, tgt, a, b); rerender(); },
        onClick: (seg, tgt, offset) => { state.click(seg, tgt, offset); rerender(); },
        onScore: (seg, value) => { state.setScore(seg, value); rerender(); },
        onReset: (seg) => { state.reset(seg); rerender(); },
        onPickCategory: () => undefined,
        onSubmit: (seg) => {
          void tutorial
            .submitAnswer({ item_id: itemId, source, target, protocol: "ESA" },
              state.draft(seg).spans, state.draft(seg).score)
            .then((result) => {
              if (!result.passed) {
                alert("Not quite: " + tutorial.diagnosticsFor(itemId).join("; "));
                return advance();
              }
              return advance();
            });
        },
      });
    rerender();
  };

  const renderTask = (unit: UnitItem): void => {
    const state = new UIAnnotationState(unit.protocol,
      `drafts:${campaign}:${annotator}:${unit.unit_id}`, window.localStorage);
    document.addEventListener("visibilitychange", () =>
      state.visibilityChanged(document.visibilityState === "visible"));
    const targets = new Map(unit.segments.map((s) => [s.seg_id, s.target]));
    const rerender = (): void =>
      renderUnit(root, unit, state, {
        onSelection: (seg, tgt, a, b) => { state.select(seg, tgt, a, b); rerender(); },
        onClick: (seg, tgt, offset) => { state.click(seg, tgt, offset); rerender(); },
        onScore: (seg, value) => { state.setScore(seg, value); rerender(); },
        onReset: (seg) => { state.reset(seg); rerender(); },
        onPickCategory: (seg, index) => {
          const category = prompt("category/subcategory, e.g. fluency/grammar");
          if (category) { state.setSpanCategory(seg, index, category); rerender(); }
        },
        onSubmit: (seg) => {
          void client
            .submit(state.buildSubmission(annotator, unit.unit_id, seg))
            .then(() => {
              state.markAccepted(seg);
              const done = unit.segments.every((s) => state.draft(s.seg_id).completed);
              return done ? advance() : rerender();
            })
            .catch((err: unknown) => {
              if (err instanceof GateError) return advance();
              if (err instanceof RejectedError) alert(err.message);
              else alert(String(err));
              rerender();
            });
        },
      });
    void targets;
    rerender();
  };

  await advance();
}

void run();
