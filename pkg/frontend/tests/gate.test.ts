import { describe, expect, it } from "vitest";

import { ApiClient, GateError } from "../src/api.js";
import { TutorialFlow } from "../src/tutorial.js";
import type { NextItem, SpanPayload } from "../src/types.js";

/**
 * Mock campaign server mirroring the real API contract: task endpoints are
 * unreachable (403 tutorial_required) until the tutorial check passes; /next
 * serves tutorial items first, then units. Status codes and payload shapes
 * match the Python server.
 */
class MockServer {
  passed = new Set<string>();
  submissions: unknown[] = [];

  // the tutorial item: a major span over [16, 25) and a score in [30, 70]
  private checkAnswer(spans: SpanPayload[], score: number | null): string[] {
    const problems: string[] = [];
    const hit = spans.some(
      (s) => s.severity === "major" && !s.missing && Math.max(s.start, 16) < Math.min(s.end, 25),
    );
    if (!hit) problems.push("required major span [16, 25) not marked");
    if (score === null || score < 30 || score > 70) {
      problems.push(`score ${score} outside required interval [30, 70]`);
    }
    return problems;
  }

  fetch = async (url: string, init?: RequestInit): Promise<Response> => {
    const json = (status: number, body: unknown): Response =>
      new Response(JSON.stringify(body), {
        status,
        headers: { "content-type": "application/json" },
      });
    const parsed = new URL(url);
    if (parsed.pathname.endsWith("/next")) {
      const annotator = parsed.searchParams.get("annotator")!;
      if (!this.passed.has(annotator)) {
        return json(200, {
          kind: "tutorial",
          item: {
            item_id: "tut1",
            source: "Der Hund lief heute nach Hause.",
            target: "The dog ran home yesterday.",
            protocol: "ESA",
          },
        });
      }
      return json(200, {
        kind: "unit",
        unit_id: "u0001",
        doc_id: "d0",
        blind_system: "S02",
        protocol: "ESA",
        segments: [{ seg_id: "d0:0", source: "src", target: "tgt text" }],
      });
    }
    if (parsed.pathname.endsWith("/tutorial")) {
      const body = JSON.parse(String(init?.body)) as {
        annotator_id: string;
        answers: Array<{ item_id: string; spans: SpanPayload[]; score: number | null }>;
      };
      const diagnostics: Record<string, string[]> = {};
      for (const answer of body.answers) {
        const problems = this.checkAnswer(answer.spans, answer.score);
        if (problems.length) diagnostics[answer.item_id] = problems;
        else this.passed.add(body.annotator_id);
      }
      return json(200, { passed: this.passed.has(body.annotator_id), diagnostics });
    }
    if (parsed.pathname.endsWith("/submit")) {
      const body = JSON.parse(String(init?.body)) as { annotator_id: string };
      if (!this.passed.has(body.annotator_id)) {
        return json(403, { status: "rejected", error: "tutorial_required", violations: [] });
      }
      this.submissions.push(body);
      return json(200, { status: "accepted", revision: 1 });
    }
    return json(404, { error: "not_found", detail: url });
  };
}

const span = (start: number, end: number, severity: "minor" | "major"): SpanPayload => ({
  start,
  end,
  severity,
  category: null,
  missing: false,
});

describe("tutorial gate contract", () => {
  it("task endpoints stay unreachable until the tutorial passes", async () => {
    const server = new MockServer();
    const api = new ApiClient("http://mock", "web1", server.fetch);
    const flow = new TutorialFlow(api, "ann1");

    // before the gate: next serves the tutorial, submit is rejected with 403
    const first: NextItem = await api.next("ann1");
    expect(first.kind).toBe("tutorial");
    await expect(
      api.submit({
        annotator_id: "ann1",
        unit_id: "u0001",
        seg_id: "d0:0",
        spans: [],
        score: 50,
        started_at: 0,
        submitted_at: 9,
      }),
    ).rejects.toThrow(GateError);
    expect(server.submissions).toHaveLength(0);

    // failing answer: gate stays shut, diagnostics arrive
    const item = first.kind === "tutorial" ? first.item : null!;
    const fail = await flow.submitAnswer(item, [], 50);
    expect(fail.passed).toBe(false);
    expect(flow.diagnosticsFor("tut1").length).toBeGreaterThan(0);
    await expect(
      api.submit({
        annotator_id: "ann1",
        unit_id: "u0001",
        seg_id: "d0:0",
        spans: [],
        score: 50,
        started_at: 0,
        submitted_at: 9,
      }),
    ).rejects.toThrow(GateError);

    // passing answer unlocks: next serves a unit and submissions are accepted
    const pass = await flow.submitAnswer(
      item,
      [{ start: 14, end: 26, severity: "major", category: null, missing: false }],
      55,
    );
    expect(pass.passed).toBe(true);
    const after = await api.next("ann1");
    expect(after.kind).toBe("unit");
    const accepted = await api.submit({
      annotator_id: "ann1",
      unit_id: "u0001",
      seg_id: "d0:0",
      spans: [span(0, 3, "minor")],
      score: 80,
      started_at: 0,
      submitted_at: 21,
    });
    expect(accepted).toEqual({ status: "accepted", revision: 1 });
    expect(server.submissions).toHaveLength(1);
  });

  it("the gate is per annotator", async () => {
    const server = new MockServer();
    const api = new ApiClient("http://mock", "web1", server.fetch);
    const flow = new TutorialFlow(api, "ann1");
    const first = await api.next("ann1");
    const item = first.kind === "tutorial" ? first.item : null!;
    await flow.submitAnswer(
      item,
      [{ start: 16, end: 25, severity: "major", category: null, missing: false }],
      40,
    );
    expect((await api.next("ann1")).kind).toBe("unit");
    expect((await api.next("ann2")).kind).toBe("tutorial");
  });
});
