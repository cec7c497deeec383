import random

import pytest

from esaeval.model import (
    Document,
    ErrorSpan,
    Protocol,
    SegmentAnnotation,
    Severity,
    SourceSegment,
    SystemOutput,
    sentinel_range,
)


def make_span(start=0, end=4, severity="minor", category=None, missing=False):
    return ErrorSpan(start=start, end=end, severity=Severity(severity),
                     category=category, is_missing=missing)


def make_missing_span(target_text, severity="major", category=None):
    lo, hi = sentinel_range(target_text)
    return ErrorSpan(start=lo, end=hi, severity=Severity(severity),
                     category=category, is_missing=True)


def make_annotation(
    annotator="a1",
    system="sysA",
    seg="d1:0",
    protocol="ESA",
    spans=(),
    score=90.0,
    started=100.0,
    duration=30.0,
    qc=False,
):
    protocol = Protocol(protocol)
    if not protocol.uses_score:
        score = None
    return SegmentAnnotation(
        annotator_id=annotator,
        system_id=system,
        seg_id=seg,
        protocol=protocol,
        spans=tuple(spans),
        direct_score=score,
        started_at=started,
        submitted_at=started + duration,
        duration_s=duration,
        is_qc_item=qc,
    )


def random_spans(rng: random.Random, text_len: int, n: int, missing_ok=False):
    spans = []
    for _ in range(n):
        if missing_ok and rng.random() < 0.15:
            spans.append(ErrorSpan(text_len + 1, text_len + 10,
                                   Severity(rng.choice(["minor", "major"])), is_missing=True))
            continue
        start = rng.randrange(0, max(1, text_len - 1))
        end = rng.randrange(start + 1, text_len + 1)
        spans.append(ErrorSpan(start, end, Severity(rng.choice(["minor", "major"]))))
    return spans


@pytest.fixture
def tiny_corpus():
    """3 documents / 6 segments, 2 systems, full coverage."""
    docs = [
        Document(
            doc_id=f"d{i}",
            domain_tag="news",
            segments=tuple(
                SourceSegment(seg_id=f"d{i}:{j}", source_text=f"Source sentence {i} {j} words here.")
                for j in range(2)
            ),
        )
        for i in range(1, 4)
    ]
    outputs = [
        SystemOutput(system_id=sys, seg_id=seg.seg_id,
                     target_text=f"Target text for {seg.seg_id} by {sys} okay.")
        for sys in ("sysA", "sysB")
        for d in docs
        for seg in d.segments
    ]
    return docs, outputs
