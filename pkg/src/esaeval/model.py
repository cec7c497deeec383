"""Canonical data model: documents, segments, system outputs, error spans, annotations.

All value types are frozen dataclasses and safe to share across analysis
workers. Span offsets are character offsets (Unicode scalar values, not
bytes) into the annotated target text, which is the shown translation with
the omission sentinel appended: ``target_text + " [MISSING]"``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

__all__ = [
    "MISSING_SENTINEL",
    "Protocol",
    "Severity",
    "Document",
    "SourceSegment",
    "SystemOutput",
    "ErrorSpan",
    "SegmentAnnotation",
    "IdentityMismatch",
    "annotated_text",
    "sentinel_range",
    "ranges_overlap",
    "severity_counts",
    "validate_annotation",
    "annotation_to_dict",
    "annotation_from_dict",
    "span_to_dict",
    "span_from_dict",
    "token_count",
]

MISSING_SENTINEL = "[MISSING]"


class Protocol(str, enum.Enum):
    """Annotation protocol. ESA = spans + direct score, MQM = categorized spans
    only, DA = direct score only."""

    ESA = "ESA"
    MQM = "MQM"
    DA = "DA"

    @property
    def uses_spans(self) -> bool:
        return self is not Protocol.DA

    @property
    def uses_score(self) -> bool:
        return self is not Protocol.MQM


class Severity(str, enum.Enum):
    MINOR = "minor"
    MAJOR = "major"


class IdentityMismatch(ValueError):
    """Annotation and system output disagree on (system_id, seg_id)."""


def token_count(text: str) -> int:
    """Number of whitespace-delimited tokens."""
    return len(text.split())


@dataclass(frozen=True)
class SourceSegment:
    seg_id: str
    source_text: str

    @property
    def token_count(self) -> int:
        return token_count(self.source_text)


@dataclass(frozen=True)
class Document:
    """An ordered list of source segments sharing one document id.

    Segment order is stable and 0-indexed; doc_id must be unique within a
    campaign or dataset.
    """

    doc_id: str
    segments: tuple[SourceSegment, ...]
    domain_tag: str = ""

    def __post_init__(self) -> None:
        seen = set()
        for seg in self.segments:
            if seg.seg_id in seen:
                raise ValueError(f"duplicate seg_id {seg.seg_id!r} in document {self.doc_id!r}")
            seen.add(seg.seg_id)

    @property
    def seg_ids(self) -> tuple[str, ...]:
        return tuple(s.seg_id for s in self.segments)

    def __len__(self) -> int:
        return len(self.segments)


@dataclass(frozen=True)
class SystemOutput:
    """One system's translation of one segment."""

    system_id: str
    seg_id: str
    target_text: str
    is_perturbed: bool = False
    perturbed_range: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.is_perturbed:
            if self.perturbed_range is None:
                raise ValueError("perturbed output requires perturbed_range")
            lo, hi = self.perturbed_range
            if not (0 <= lo <= hi <= len(self.target_text)):
                raise ValueError(f"perturbed_range {self.perturbed_range} outside target text")


def ranges_overlap(a_start: int, a_end: int, b_start: int, b_end: int) -> bool:
    """Single-character interval overlap; the one predicate every span-matching
    analysis shares."""
    return max(a_start, b_start) < min(a_end, b_end)


def annotated_text(target_text: str) -> str:
    """The text the annotator actually marks: target plus omission sentinel."""
    return target_text + " " + MISSING_SENTINEL


def sentinel_range(target_text: str) -> tuple[int, int]:
    """Character interval of the sentinel token within the annotated text."""
    start = len(target_text) + 1
    return start, start + len(MISSING_SENTINEL)


@dataclass(frozen=True)
class ErrorSpan:
    """A highlighted region of the annotated target text.

    ``start < end`` for ordinary spans; a missing-content span anchors to the
    sentinel token and may be zero-width. Offsets index the annotated text,
    so the sentinel region is addressable. ``category`` is set only under MQM.
    """

    start: int
    end: int
    severity: Severity
    category: str | None = None
    is_missing: bool = False

    def __post_init__(self) -> None:
        if self.start < 0:
            raise ValueError("span start must be >= 0")
        if self.is_missing:
            if self.end < self.start:
                raise ValueError("span end must be >= start")
        elif self.end <= self.start:
            raise ValueError("span must have start < end")

    def overlaps(self, other: "ErrorSpan") -> bool:
        """Single-character overlap rule; missing spans match only missing spans."""
        if self.is_missing != other.is_missing:
            return False
        if self.is_missing:
            return True
        return ranges_overlap(self.start, self.end, other.start, other.end)

    def overlaps_range(self, start: int, end: int) -> bool:
        return ranges_overlap(self.start, self.end, start, end)


@dataclass(frozen=True)
class SegmentAnnotation:
    """One annotator's work on one (system, segment) pair.

    Overlapping spans by the same annotator are permitted and each counts
    separately (one linguistic error may legitimately be marked twice).
    """

    annotator_id: str
    system_id: str
    seg_id: str
    protocol: Protocol
    spans: tuple[ErrorSpan, ...] = ()
    direct_score: float | None = None
    started_at: float = 0.0
    submitted_at: float = 0.0
    duration_s: float = 0.0
    is_qc_item: bool = False

    def with_spans(self, spans: tuple[ErrorSpan, ...]) -> "SegmentAnnotation":
        return replace(self, spans=spans)


def severity_counts(spans: tuple[ErrorSpan, ...] | list[ErrorSpan]) -> dict[str, int]:
    """Counts of minor/major/missing spans. A missing span also carries a
    severity and counts toward it, so minor + major == len(spans)."""
    counts = {"minor": 0, "major": 0, "missing": 0}
    for span in spans:
        counts[span.severity.value] += 1
        if span.is_missing:
            counts["missing"] += 1
    return counts


def validate_annotation(a: SegmentAnnotation, t: SystemOutput) -> list[str]:
    """Every invariant violation of `a` against the shown output `t`.

    Returns an empty list when the annotation is valid. A (system_id, seg_id)
    mismatch is an identity error, raised rather than reported, because it
    means the caller paired the wrong objects.
    """
    if a.system_id != t.system_id or a.seg_id != t.seg_id:
        raise IdentityMismatch(
            f"annotation targets ({a.system_id!r}, {a.seg_id!r}) "
            f"but output is ({t.system_id!r}, {t.seg_id!r})"
        )

    violations: list[str] = []
    if a.protocol.uses_score:
        if a.direct_score is None:
            violations.append(f"direct score required for {a.protocol.value}")
        elif not (0.0 <= a.direct_score <= 100.0):
            violations.append(f"direct score {a.direct_score} outside [0, 100]")
    elif a.direct_score is not None:
        violations.append("score forbidden for MQM")

    if not a.protocol.uses_spans and a.spans:
        violations.append("spans forbidden for DA")

    full = annotated_text(t.target_text)
    sent_lo, sent_hi = sentinel_range(t.target_text)
    for i, span in enumerate(a.spans):
        if span.end > len(full):
            violations.append(f"span {i} out of bounds: end {span.end} > {len(full)}")
        if span.is_missing:
            touches = (
                max(span.start, sent_lo) < min(span.end, sent_hi)
                or (span.start == span.end and sent_lo <= span.start <= sent_hi)
            )
            if not touches:
                violations.append(f"span {i} flagged missing but does not touch the sentinel")
        if a.protocol is Protocol.MQM and span.category is None:
            violations.append(f"span {i} missing category (required for MQM)")
        if a.protocol is not Protocol.MQM and span.category is not None:
            violations.append(f"span {i} carries category (only allowed for MQM)")

    if a.submitted_at < a.started_at:
        violations.append("submitted_at before started_at")
    if a.duration_s < 0:
        violations.append("negative duration")
    if abs(a.duration_s - (a.submitted_at - a.started_at)) > 1e-6:
        violations.append("duration_s inconsistent with timestamps")
    return violations


# --- serialization -----------------------------------------------------------
# Canonical JSONL field names; see the ingest module for file-level schemas.


def span_to_dict(span: ErrorSpan) -> dict:
    return {
        "start": span.start,
        "end": span.end,
        "severity": span.severity.value,
        "category": span.category,
        "missing": span.is_missing,
    }


def span_from_dict(d: dict) -> ErrorSpan:
    return ErrorSpan(
        start=d["start"],
        end=d["end"],
        severity=Severity(d["severity"]),
        category=d.get("category"),
        is_missing=bool(d.get("missing", False)),
    )


def annotation_to_dict(a: SegmentAnnotation) -> dict:
    d = {
        "v": 1,
        "annotator_id": a.annotator_id,
        "system_id": a.system_id,
        "seg_id": a.seg_id,
        "protocol": a.protocol.value,
        "spans": [span_to_dict(s) for s in a.spans],
        "score": a.direct_score,
        "started_at": a.started_at,
        "submitted_at": a.submitted_at,
        "duration_s": a.duration_s,
    }
    if a.is_qc_item:
        d["qc"] = True
    return d


def annotation_from_dict(d: dict) -> SegmentAnnotation:
    return SegmentAnnotation(
        annotator_id=d["annotator_id"],
        system_id=d["system_id"],
        seg_id=d["seg_id"],
        protocol=Protocol(d["protocol"]),
        spans=tuple(span_from_dict(s) for s in d["spans"]),
        direct_score=d.get("score"),
        started_at=d.get("started_at", 0.0),
        submitted_at=d.get("submitted_at", 0.0),
        duration_s=d.get("duration_s", 0.0),
        is_qc_item=bool(d.get("qc", False)),
    )
