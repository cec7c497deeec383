"""Segment- and system-level score computation for all protocols.

Span-derived scores follow the severity-count formula
``w_major * #major + w_minor * #minor`` with default weights (-1, -5), the
weighting conventionally used to turn error annotations into segment scores.
Note the formula does not scale with text size: concatenating a segment with
itself doubles the score. The normalized variant divides by target length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import ErrorSpan, SegmentAnnotation, severity_counts

__all__ = [
    "SeverityWeights",
    "DEFAULT_WEIGHTS",
    "SegmentScore",
    "SystemScore",
    "ScoreKindError",
    "span_score",
    "span_score_normalized",
    "segment_score",
    "system_scores",
    "scan_major_weight",
    "score_histogram",
]

SCORE_KINDS = ("direct", "span_based", "span_based_normalized")


class ScoreKindError(ValueError):
    """Requested score kind is incompatible with the annotation's protocol."""


@dataclass(frozen=True)
class SeverityWeights:
    """Per-severity span weights; both non-positive, major at least as harsh."""

    w_minor: float = -1.0
    w_major: float = -5.0

    def __post_init__(self) -> None:
        if self.w_minor > 0 or self.w_major > 0:
            raise ValueError("severity weights must be <= 0")
        if self.w_major > self.w_minor:
            raise ValueError("w_major must be <= w_minor")


DEFAULT_WEIGHTS = SeverityWeights()


@dataclass(frozen=True)
class SegmentScore:
    annotator_id: str
    system_id: str
    seg_id: str
    kind: str
    value: float


@dataclass(frozen=True)
class SystemScore:
    """System-level mean with the per-segment vector that produced it.

    All SystemScores in one analysis share the same segment list, so the
    vectors are comparable position by position.
    """

    system_id: str
    mean: float
    segment_values: tuple[float, ...]
    seg_ids: tuple[str, ...] = ()


def span_score(spans: Sequence[ErrorSpan], w: SeverityWeights = DEFAULT_WEIGHTS) -> float:
    """Severity-weighted span count; missing spans count under their severity."""
    counts = severity_counts(tuple(spans))
    # + 0.0 folds the empty case's -0.0 into plain 0.0
    return w.w_major * counts["major"] + w.w_minor * counts["minor"] + 0.0


def span_score_normalized(
    spans: Sequence[ErrorSpan],
    w: SeverityWeights,
    target_token_count: int,
) -> float:
    """span_score divided by the displayed target's token count (no sentinel)."""
    if target_token_count <= 0:
        raise ValueError("empty target: token count must be > 0")
    return span_score(spans, w) / target_token_count


def segment_score(
    a: SegmentAnnotation,
    kind: str = "direct",
    w: SeverityWeights = DEFAULT_WEIGHTS,
    target_token_count: int | None = None,
) -> SegmentScore:
    """One scalar for one annotation, by the requested scoring route."""
    if kind not in SCORE_KINDS:
        raise ScoreKindError(f"unknown score kind {kind!r}")
    if kind == "direct":
        if not a.protocol.uses_score or a.direct_score is None:
            raise ScoreKindError(f"direct score unavailable for protocol {a.protocol.value}")
        value = float(a.direct_score)
    else:
        if not a.protocol.uses_spans:
            raise ScoreKindError(f"span-based score unavailable for protocol {a.protocol.value}")
        if kind == "span_based":
            value = span_score(a.spans, w)
        else:
            if target_token_count is None:
                raise ValueError("span_based_normalized requires target_token_count")
            value = span_score_normalized(a.spans, w, target_token_count)
    return SegmentScore(a.annotator_id, a.system_id, a.seg_id, kind, value)


def system_scores(
    annotations: Iterable[SegmentAnnotation],
    kind: str = "direct",
    w: SeverityWeights = DEFAULT_WEIGHTS,
    target_token_counts: dict[tuple[str, str], int] | None = None,
) -> list[SystemScore]:
    """System means over a shared segment list.

    Multiple annotations of the same (system, segment) cell are averaged
    before aggregation. Every system must cover every segment seen anywhere;
    missing cells are an error that lists them all.
    """
    cells: dict[tuple[str, str], list[float]] = {}
    systems: set[str] = set()
    seg_ids: set[str] = set()
    for a in annotations:
        tc = None
        if target_token_counts is not None:
            tc = target_token_counts.get((a.system_id, a.seg_id))
        value = segment_score(a, kind, w, target_token_count=tc).value
        cells.setdefault((a.system_id, a.seg_id), []).append(value)
        systems.add(a.system_id)
        seg_ids.add(a.seg_id)

    ordered_systems = sorted(systems)
    ordered_segs = sorted(seg_ids)
    missing = [
        (sys, seg) for sys in ordered_systems for seg in ordered_segs if (sys, seg) not in cells
    ]
    if missing:
        raise ValueError(f"missing (system, segment) cells: {missing}")

    out = []
    for sys in ordered_systems:
        values = tuple(
            sum(cells[(sys, seg)]) / len(cells[(sys, seg)]) for seg in ordered_segs
        )
        out.append(
            SystemScore(
                system_id=sys,
                mean=sum(values) / len(values),
                segment_values=values,
                seg_ids=tuple(ordered_segs),
            )
        )
    return out


def scan_major_weight(
    annotations: Sequence[SegmentAnnotation],
    w_minor: float = -1.0,
    grid: Sequence[float] | None = None,
) -> tuple[float, list[tuple[float, float | None]]]:
    """Scan candidate major-error weights against annotators' direct scores.

    For each candidate weight the Pearson correlation between direct scores
    and span scores is computed; returns (best weight, full curve). Grid
    points where either variable is degenerate yield None in the curve and
    are skipped for the argmax. Default grid [-10, -1] in steps of 0.1
    brackets both the canonical -5 and the empirically optimal -4.8.
    """
    if grid is None:
        grid = [round(-10.0 + 0.1 * i, 10) for i in range(91)]
    anns = [a for a in annotations if a.direct_score is not None and a.protocol.uses_spans]
    if len(anns) < 3:
        raise ValueError("weight scan needs at least 3 annotations with both score and spans")

    direct = np.array([a.direct_score for a in anns], dtype=float)
    counts = [severity_counts(a.spans) for a in anns]
    minor = np.array([c["minor"] for c in counts], dtype=float)
    major = np.array([c["major"] for c in counts], dtype=float)

    if np.std(direct) == 0.0:
        raise ValueError("zero variance in direct scores")

    curve: list[tuple[float, float | None]] = []
    best_w, best_r = None, -math.inf
    for w_major in grid:
        scores = w_minor * minor + w_major * major
        if np.std(scores) == 0.0:
            curve.append((w_major, None))
            continue
        r = float(np.corrcoef(direct, scores)[0, 1])
        curve.append((w_major, r))
        if r > best_r:
            best_w, best_r = w_major, r
    if best_w is None:
        raise ValueError("zero variance in span scores at every grid point")
    return best_w, curve


def score_histogram(
    scores: Sequence[float],
    clip_at: float | None = None,
    bin_width: float = 5.0,
) -> list[tuple[float, float, int]]:
    """Fixed-width histogram as (bin_lo, bin_hi, count) triples.

    Values below clip_at are merged into the lowest bin, which is what the
    span-score distributions need for readable resolution (they have a long
    negative tail). Bins are half-open [lo, hi); empty input gives [].
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be > 0")
    values = list(scores)
    if not values:
        return []
    if clip_at is not None:
        values = [max(v, clip_at) for v in values]
    lo = math.floor(min(values) / bin_width) * bin_width
    hi = max(values)
    n_bins = max(1, math.ceil((hi - lo) / bin_width))
    if hi >= lo + n_bins * bin_width:
        n_bins += 1
    counts = [0] * n_bins
    for v in values:
        counts[min(int((v - lo) // bin_width), n_bins - 1)] += 1
    return [(lo + i * bin_width, lo + (i + 1) * bin_width, c) for i, c in enumerate(counts)]
