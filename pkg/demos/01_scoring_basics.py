"""Scoring basics: error spans, severity weights, segment and system scores.

Run: python3 demos/01_scoring_basics.py
"""

from esaeval import (
    ErrorSpan,
    SegmentAnnotation,
    Protocol,
    Severity,
    SeverityWeights,
    score_histogram,
    segment_score,
    span_score,
    system_scores,
)

############################################################
# A translation with two major errors scores -10 under the
# default severity weights (-1 per minor, -5 per major).

two_major = (
    ErrorSpan(start=4, end=12, severity=Severity.MAJOR),
    ErrorSpan(start=20, end=27, severity=Severity.MAJOR),
)
print("two major errors:", span_score(two_major))

# The same segment repeated twice doubles the penalty; span scores do not
# scale with text length, which is why the direct 0-100 score is the main
# scoring route for span-and-score annotations.
print("duplicated segment:", span_score(two_major + two_major))

############################################################
# One annotation, three scoring routes.

annotation = SegmentAnnotation(
    annotator_id="demo",
    system_id="sysA",
    seg_id="doc1:0",
    protocol=Protocol.ESA,
    spans=(ErrorSpan(start=0, end=9, severity=Severity.MINOR),),
    direct_score=86.0,
    started_at=0.0,
    submitted_at=31.0,
    duration_s=31.0,
)
print("direct:", segment_score(annotation, "direct").value)
print("span based:", segment_score(annotation, "span_based").value)
print("normalized by 12 tokens:",
      segment_score(annotation, "span_based_normalized", target_token_count=12).value)

############################################################
# Custom weights, e.g. the empirically optimal major weight -4.8.

tuned = SeverityWeights(w_minor=-1.0, w_major=-4.8)
print("tuned weights:", span_score(two_major, tuned))

############################################################
# System means aggregate per-segment averages over a shared segment list.

annotations = [
    SegmentAnnotation("demo", sys_id, f"doc1:{i}", Protocol.DA, (), score, 0.0, 20.0, 20.0)
    for sys_id, base in (("sysA", 80.0), ("sysB", 60.0))
    for i, score in enumerate([base, base + 10, base - 10, base])
]
for system in system_scores(annotations, "direct"):
    print(f"{system.system_id}: mean {system.mean:.1f} over {len(system.segment_values)} segments")

############################################################
# Span-score histograms clip the long negative tail into the lowest bin.

scores = [0.0, 0.0, -1.0, -2.0, -5.0, -6.0, -11.0, -20.0, -37.0]
for lo, hi, count in score_histogram(scores, clip_at=-15.0, bin_width=5.0):
    print(f"[{lo:6.1f}, {hi:6.1f}): {'#' * count}")
