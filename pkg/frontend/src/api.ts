/** Typed client for the campaign API; all storage access goes through it. */

import type {
  NextItem,
  SubmitAccepted,
  SubmitRejection,
  SubmitRequest,
  TutorialAnswer,
  TutorialResult,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class GateError extends Error {
  constructor(message = "tutorial_required") {
    super(message);
    this.name = "GateError";
  }
}

export class RejectedError extends Error {
  readonly code: string;
  readonly violations: string[];

  constructor(rejection: SubmitRejection) {
    super(`${rejection.error}: ${rejection.violations.join("; ")}`);
    this.name = "RejectedError";
    this.code = rejection.error;
    this.violations = rejection.violations;
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly campaignId: string,
    private readonly fetchImpl: FetchLike = fetch.bind(globalThis),
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}/campaign/${encodeURIComponent(this.campaignId)}${path}`;
  }

  async next(annotatorId: string): Promise<NextItem> {
    const res = await this.fetchImpl(
      this.url(`/next?annotator=${encodeURIComponent(annotatorId)}`),
    );
    if (!res.ok) throw new Error(`next failed: ${res.status}`);
    return (await res.json()) as NextItem;
  }

  async submit(request: SubmitRequest): Promise<SubmitAccepted> {
    const res = await this.fetchImpl(this.url("/submit"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
    if (res.status === 403) throw new GateError();
    if (!res.ok) throw new RejectedError((await res.json()) as SubmitRejection);
    return (await res.json()) as SubmitAccepted;
  }

  async tutorial(annotatorId: string, answers: TutorialAnswer[]): Promise<TutorialResult> {
    const res = await this.fetchImpl(this.url("/tutorial"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ annotator_id: annotatorId, answers }),
    });
    if (!res.ok) throw new Error(`tutorial check failed: ${res.status}`);
    return (await res.json()) as TutorialResult;
  }
}
