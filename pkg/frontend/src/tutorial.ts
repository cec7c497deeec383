/**
 * Tutorial gate: the first thing an annotator meets. Task units stay locked
 * until every tutorial item passes; failures surface per-item diagnostics
 * and the annotator retries. Progress is server-side state, so a reload
 * resumes where it left off (the server keeps serving unanswered items).
 */

import type { ApiClient } from "./api.js";
import type { DraftSpan } from "./spans.js";
import { toPayload } from "./spans.js";
import type { TutorialResult, TutorialView } from "./types.js";

export class TutorialFlow {
  private lastResult: TutorialResult | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly annotatorId: string,
  ) {}

  get passed(): boolean {
    return this.lastResult?.passed ?? false;
  }

  diagnosticsFor(itemId: string): string[] {
    return this.lastResult?.diagnostics[itemId] ?? [];
  }

  async submitAnswer(
    item: TutorialView,
    spans: readonly DraftSpan[],
    score: number | null,
  ): Promise<TutorialResult> {
    this.lastResult = await this.api.tutorial(this.annotatorId, [
      { item_id: item.item_id, spans: toPayload(spans), score },
    ]);
    return this.lastResult;
  }
}
