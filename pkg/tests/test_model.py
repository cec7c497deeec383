import pytest
from hypothesis import given, strategies as st

from esaeval.model import (
    ErrorSpan,
    IdentityMismatch,
    Protocol,
    SegmentAnnotation,
    Severity,
    SystemOutput,
    annotated_text,
    annotation_from_dict,
    annotation_to_dict,
    sentinel_range,
    severity_counts,
    token_count,
    validate_annotation,
)

from conftest import make_annotation, make_missing_span, make_span

TARGET = "Das ist ein Beispielsatz mit Fehlern."
OUTPUT = SystemOutput(system_id="sysA", seg_id="d1:0", target_text=TARGET)


def test_annotated_text_appends_sentinel():
    assert annotated_text("abc") == "abc [MISSING]"
    lo, hi = sentinel_range("abc")
    assert annotated_text("abc")[lo:hi] == "[MISSING]"


def test_token_count_whitespace():
    assert token_count("a b  c\td") == 4
    assert token_count("") == 0


def test_span_requires_positive_width_unless_missing():
    with pytest.raises(ValueError):
        ErrorSpan(3, 3, Severity.MINOR)
    with pytest.raises(ValueError):
        ErrorSpan(-1, 2, Severity.MINOR)
    anchored = ErrorSpan(5, 5, Severity.MAJOR, is_missing=True)
    assert anchored.start == anchored.end


def test_perturbed_output_needs_range():
    with pytest.raises(ValueError):
        SystemOutput("s", "g", "text", is_perturbed=True)
    with pytest.raises(ValueError):
        SystemOutput("s", "g", "text", is_perturbed=True, perturbed_range=(0, 99))


def test_validate_ok_perfect_translation():
    a = make_annotation(spans=(), score=100.0)
    assert validate_annotation(a, OUTPUT) == []


def test_validate_mqm_score_forbidden():
    a = SegmentAnnotation(
        annotator_id="a1", system_id="sysA", seg_id="d1:0", protocol=Protocol.MQM,
        spans=(make_span(category="fluency/grammar"),), direct_score=50.0,
    )
    assert any("score forbidden" in v for v in validate_annotation(a, OUTPUT))


def test_validate_span_out_of_bounds():
    full_len = len(annotated_text(TARGET))
    a = make_annotation(spans=(make_span(0, full_len + 1),))
    assert any("out of bounds" in v for v in validate_annotation(a, OUTPUT))


def test_validate_da_rejects_spans_and_esa_requires_score():
    da = make_annotation(protocol="DA", spans=(make_span(),), score=50.0)
    assert any("spans forbidden" in v for v in validate_annotation(da, OUTPUT))
    esa = SegmentAnnotation(annotator_id="a1", system_id="sysA", seg_id="d1:0",
                            protocol=Protocol.ESA)
    assert any("direct score required" in v for v in validate_annotation(esa, OUTPUT))


def test_validate_score_range():
    a = make_annotation(score=101.0)
    assert any("outside [0, 100]" in v for v in validate_annotation(a, OUTPUT))


def test_validate_missing_span_must_touch_sentinel():
    stray = ErrorSpan(0, 3, Severity.MAJOR, is_missing=True)
    a = make_annotation(spans=(stray,))
    assert any("sentinel" in v for v in validate_annotation(a, OUTPUT))
    good = make_annotation(spans=(make_missing_span(TARGET),))
    assert validate_annotation(good, OUTPUT) == []


def test_validate_category_rules():
    esa_with_cat = make_annotation(spans=(make_span(category="accuracy"),))
    assert any("carries category" in v for v in validate_annotation(esa_with_cat, OUTPUT))
    mqm_without = make_annotation(protocol="MQM", spans=(make_span(),), score=None)
    assert any("missing category" in v for v in validate_annotation(mqm_without, OUTPUT))


def test_validate_identity_mismatch_is_distinct():
    a = make_annotation(system="sysB")
    with pytest.raises(IdentityMismatch):
        validate_annotation(a, OUTPUT)


def test_validate_duration_consistency():
    a = SegmentAnnotation(
        annotator_id="a1", system_id="sysA", seg_id="d1:0", protocol=Protocol.ESA,
        direct_score=50.0, started_at=100.0, submitted_at=130.0, duration_s=5.0,
    )
    assert any("duration_s inconsistent" in v for v in validate_annotation(a, OUTPUT))


def test_overlap_predicate():
    assert make_span(0, 5).overlaps(make_span(4, 9))
    assert not make_span(0, 5).overlaps(make_span(5, 9))
    missing = make_missing_span(TARGET)
    assert not missing.overlaps(make_span(0, 500))
    assert missing.overlaps(make_missing_span(TARGET, severity="minor"))


def test_overlapping_spans_permitted_and_counted_separately():
    # one linguistic error marked twice is two spans
    spans = (make_span(4, 8), make_span(4, 8))
    a = make_annotation(spans=spans, score=70.0)
    assert validate_annotation(a, OUTPUT) == []
    assert severity_counts(a.spans)["minor"] == 2


def test_severity_counts_missing_counts_toward_severity():
    spans = (
        make_span(0, 4, "minor"),
        make_span(5, 9, "major"),
        make_missing_span(TARGET, severity="major"),
    )
    counts = severity_counts(spans)
    assert counts == {"minor": 1, "major": 2, "missing": 1}
    assert counts["minor"] + counts["major"] == len(spans)


# --- round-trip property ------------------------------------------------------

severities = st.sampled_from([Severity.MINOR, Severity.MAJOR])
protocols = st.sampled_from([Protocol.ESA, Protocol.MQM, Protocol.DA])


@st.composite
def annotations(draw):
    protocol = draw(protocols)
    target_len = draw(st.integers(5, 60))
    spans = []
    if protocol.uses_spans:
        for _ in range(draw(st.integers(0, 4))):
            missing = draw(st.booleans())
            category = draw(st.sampled_from(["accuracy/mistranslation", "fluency/grammar"])) \
                if protocol is Protocol.MQM else None
            if missing:
                spans.append(ErrorSpan(target_len + 1, target_len + 10, draw(severities),
                                       category=category, is_missing=True))
            else:
                start = draw(st.integers(0, target_len - 1))
                end = draw(st.integers(start + 1, target_len))
                spans.append(ErrorSpan(start, end, draw(severities), category=category))
    score = draw(st.floats(0, 100, allow_nan=False)) if protocol.uses_score else None
    started = draw(st.floats(0, 1e6, allow_nan=False))
    duration = draw(st.floats(0, 1e4, allow_nan=False))
    return SegmentAnnotation(
        annotator_id=draw(st.text(min_size=1, max_size=8)),
        system_id="sysA",
        seg_id="d1:0",
        protocol=protocol,
        spans=tuple(spans),
        direct_score=score,
        started_at=started,
        submitted_at=started + duration,
        duration_s=duration,
        is_qc_item=draw(st.booleans()),
    )


@given(annotations())
def test_serialize_round_trip_identity(a):
    assert annotation_from_dict(annotation_to_dict(a)) == a
