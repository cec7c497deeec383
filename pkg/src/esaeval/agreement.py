"""Intra/inter-annotator agreement: span overlap matching and segment-level scores.

Two spans match when their character intervals share at least one position;
missing-content spans match only other missing-content spans on the same
segment. Span coverage is deliberately asymmetric: it answers "how much of B
does A contain", which keeps protocols with very different span densities
comparable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import ErrorSpan, SegmentAnnotation, Severity
from .scoring import DEFAULT_WEIGHTS, SeverityWeights, segment_score
from .stats import kendall_tau_c, pearson

__all__ = [
    "AgreementReport",
    "span_coverage",
    "span_agreement_frequencies",
    "segment_agreement",
]

TAXONOMY_DEPTHS = ("none", "category", "subcategory")


@dataclass(frozen=True)
class AgreementReport:
    kendall_tau_c: float | None
    pearson: float | None
    error_recall: float | None
    minor_recall: float | None
    major_recall: float | None
    n_cells: int


def _spans_by_cell(
    annotations: Iterable[SegmentAnnotation],
) -> dict[tuple[str, str], list[ErrorSpan]]:
    cells: dict[tuple[str, str], list[ErrorSpan]] = {}
    for a in annotations:
        cells.setdefault((a.system_id, a.seg_id), []).extend(a.spans)
    return cells


def span_coverage(
    a_annotations: Iterable[SegmentAnnotation],
    b_annotations: Iterable[SegmentAnnotation],
) -> float:
    """Fraction of B's spans overlapped by some A span on the same segment.

    Returns 1.0 when B has no spans. Not symmetric.
    """
    a_cells = _spans_by_cell(a_annotations)
    b_cells = _spans_by_cell(b_annotations)
    total = sum(len(spans) for spans in b_cells.values())
    if total == 0:
        return 1.0
    hits = 0
    for cell, b_spans in b_cells.items():
        a_spans = a_cells.get(cell, [])
        for b_span in b_spans:
            if any(a_span.overlaps(b_span) for a_span in a_spans):
                hits += 1
    return hits / total


def _top_level(category: str) -> str:
    return category.split("/", 1)[0]


def _best_match(candidates: list[ErrorSpan], target: ErrorSpan) -> ErrorSpan | None:
    """Longest-overlap match, earliest start breaking ties."""
    matches = [c for c in candidates if c.overlaps(target)]
    if not matches:
        return None
    return min(
        matches,
        key=lambda c: (-(min(c.end, target.end) - max(c.start, target.start)), c.start),
    )


def span_agreement_frequencies(
    a_annotations: Iterable[SegmentAnnotation],
    b_annotations: Iterable[SegmentAnnotation],
    taxonomy_depth: str = "none",
) -> dict[str, float | None]:
    """How often B's spans find an A span that overlaps / agrees further.

    For each B span the best-matching overlapping A span on the same segment
    (longest overlap, earliest start on ties) decides severity and category
    agreement. Frequencies are fractions of B's spans. Category comparisons
    need categorized spans and are requested via taxonomy_depth; asking for
    them on uncategorized (ESA) data is an error.
    """
    if taxonomy_depth not in TAXONOMY_DEPTHS:
        raise ValueError(f"unknown taxonomy_depth {taxonomy_depth!r}")
    a_cells = _spans_by_cell(a_annotations)
    b_cells = _spans_by_cell(b_annotations)

    total = 0
    any_hit = 0
    same_severity = 0
    same_category = 0
    same_sev_cat = 0
    same_sev_subcat = 0
    for cell, b_spans in b_cells.items():
        a_spans = a_cells.get(cell, [])
        for b_span in b_spans:
            total += 1
            match = _best_match(a_spans, b_span)
            if match is None:
                continue
            any_hit += 1
            sev_ok = match.severity is b_span.severity
            same_severity += sev_ok
            if taxonomy_depth != "none":
                if match.category is None or b_span.category is None:
                    raise ValueError(
                        f"taxonomy_depth={taxonomy_depth!r} requires categorized spans"
                    )
                cat_ok = _top_level(match.category) == _top_level(b_span.category)
                same_category += cat_ok
                same_sev_cat += sev_ok and cat_ok
                if taxonomy_depth == "subcategory":
                    same_sev_subcat += sev_ok and match.category == b_span.category

    if total == 0:
        return {k: None for k in ("any", "same_severity", "same_category",
                                  "same_sev_and_cat", "same_sev_and_subcat")}
    out: dict[str, float | None] = {
        "any": any_hit / total,
        "same_severity": same_severity / total,
        "same_category": None,
        "same_sev_and_cat": None,
        "same_sev_and_subcat": None,
    }
    if taxonomy_depth != "none":
        out["same_category"] = same_category / total
        out["same_sev_and_cat"] = same_sev_cat / total
    if taxonomy_depth == "subcategory":
        out["same_sev_and_subcat"] = same_sev_subcat / total
    return out


def _has_severity(spans: Sequence[ErrorSpan], severity: Severity) -> bool:
    return any(s.severity is severity for s in spans)


def segment_agreement(
    run1: Sequence[SegmentAnnotation],
    run2: Sequence[SegmentAnnotation],
    kind: str | tuple[str, str] = "direct",
    w: SeverityWeights = DEFAULT_WEIGHTS,
    pair_by_annotator: bool = True,
    condition_on: int = 1,
    target_token_counts: dict[tuple[str, str], int] | None = None,
) -> AgreementReport:
    """Segment-level agreement between two annotation runs.

    Cells shared by both runs are paired; scores correlate via Kendall tau-c
    and Pearson. Error recall asks: given the conditioning run marked at
    least one span in a cell, how often did the other run mark one too?
    Minor/major recall restrict both sides of that event to one severity.
    ``condition_on`` selects the conditioning run (1 = first run for
    intra-annotator reruns, or the reference protocol for cross-protocol
    comparisons); pass 2 to report the other direction. ``kind`` may be a
    (run1 kind, run2 kind) pair when the runs use different protocols.
    """
    if condition_on not in (1, 2):
        raise ValueError("condition_on must be 1 or 2")
    kind1, kind2 = (kind, kind) if isinstance(kind, str) else kind

    def cells_of(run: Sequence[SegmentAnnotation], run_kind: str):
        cells: dict[tuple, dict] = {}
        for a in run:
            key = (a.annotator_id, a.system_id, a.seg_id) if pair_by_annotator else (
                a.system_id, a.seg_id)
            tc = None
            if target_token_counts is not None:
                tc = target_token_counts.get((a.system_id, a.seg_id))
            value = segment_score(a, run_kind, w, target_token_count=tc).value
            cell = cells.setdefault(key, {"values": [], "spans": []})
            cell["values"].append(value)
            cell["spans"].extend(a.spans)
        return cells

    cells1 = cells_of(run1, kind1)
    cells2 = cells_of(run2, kind2)
    shared = sorted(set(cells1) & set(cells2))
    if not shared:
        raise ValueError("no shared cells between the two runs")

    x = [sum(cells1[k]["values"]) / len(cells1[k]["values"]) for k in shared]
    y = [sum(cells2[k]["values"]) / len(cells2[k]["values"]) for k in shared]
    tau = kendall_tau_c(x, y) if len(shared) >= 2 else None
    rho = pearson(x, y) if len(shared) >= 3 else None

    cond, other = (cells1, cells2) if condition_on == 1 else (cells2, cells1)

    def recall(predicate) -> float | None:
        eligible = [k for k in shared if predicate(cond[k]["spans"])]
        if not eligible:
            return None
        return sum(predicate(other[k]["spans"]) for k in eligible) / len(eligible)

    return AgreementReport(
        kendall_tau_c=tau,
        pearson=rho,
        error_recall=recall(lambda spans: len(spans) > 0),
        minor_recall=recall(lambda spans: _has_severity(spans, Severity.MINOR)),
        major_recall=recall(lambda spans: _has_severity(spans, Severity.MAJOR)),
        n_cells=len(shared),
    )
