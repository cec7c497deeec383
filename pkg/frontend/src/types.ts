/** Wire types for the campaign HTTP API. Field names match the server exactly. */

export type ProtocolName = "ESA" | "MQM" | "DA";

export type SeverityName = "minor" | "major";

export interface SpanPayload {
  start: number;
  end: number;
  severity: SeverityName;
  category: string | null;
  missing: boolean;
}

export interface SegmentView {
  seg_id: string;
  source: string;
  target: string;
}

export interface UnitItem {
  kind: "unit";
  unit_id: string;
  doc_id: string;
  blind_system: string;
  protocol: ProtocolName;
  segments: SegmentView[];
}

export interface TutorialView {
  item_id: string;
  source: string;
  target: string;
  protocol: ProtocolName;
}

export interface TutorialNext {
  kind: "tutorial";
  item: TutorialView;
}

export interface DoneItem {
  kind: "done";
}

export type NextItem = UnitItem | TutorialNext | DoneItem;

export interface SubmitRequest {
  annotator_id: string;
  unit_id: string;
  seg_id: string;
  spans: SpanPayload[];
  score: number | null;
  started_at: number;
  submitted_at: number;
}

export interface SubmitAccepted {
  status: "accepted";
  revision: number;
}

export interface SubmitRejection {
  status: "rejected";
  error: string;
  violations: string[];
}

export interface TutorialAnswer {
  item_id: string;
  spans: SpanPayload[];
  score: number | null;
}

export interface TutorialResult {
  passed: boolean;
  diagnostics: Record<string, string[]>;
}
