"""Attention checks: perturb a translation, then score annotator reliability.

Run: python3 demos/04_quality_control.py
"""

from esaeval import ErrorSpan, Protocol, SegmentAnnotation, Severity, SystemOutput
from esaeval.qc import perturb, qc_evaluate

############################################################
# Perturbing replaces a short token run with random in-language words,
# planting a guaranteed major error while preserving token count.

output = SystemOutput(system_id="sysA", seg_id="doc3:1",
                      target_text="He postponed the meeting again yesterday.")
vocabulary = ["squirrels", "tense.", "banana", "cloud", "violet", "marble"]
perturbation = perturb(output, rng_seed=791, vocabulary=vocabulary)
print("original: ", perturbation.original_text)
print("perturbed:", perturbation.perturbed_text)
print("replaced range:", perturbation.replaced_range)

############################################################
# A diligent annotator sees both versions inside one task. They should score
# the perturbed copy lower, mark more spans on it, and hit the planted range.

lo, hi = perturbation.replaced_range


def annotation(score, spans, qc):
    return SegmentAnnotation("ann1", "sysA", "doc3:1", Protocol.ESA, tuple(spans),
                             score, 0.0, 30.0, 30.0, is_qc_item=qc)


good_annotator = [
    annotation(85.0, [ErrorSpan(0, 2, Severity.MINOR)], qc=False),
    annotation(30.0, [ErrorSpan(0, 2, Severity.MINOR),
                      ErrorSpan(lo, hi, Severity.MAJOR)], qc=True),
]
report = qc_evaluate(good_annotator, [perturbation])
print(f"score dropped on the perturbed copy: {report.ok_score_pct:.0f}% of pairs")
print(f"more spans on the perturbed copy:    {report.ok_spans_pct:.0f}% of pairs")
print(f"planted range marked:                {report.perturbation_marked_pct:.0f}% of pairs")

############################################################
# An inattentive annotator rates both versions alike and fails the checks.

sloppy = [
    SegmentAnnotation("ann2", "sysA", "doc3:1", Protocol.ESA, (), 75.0, 0.0, 4.0, 4.0),
    SegmentAnnotation("ann2", "sysA", "doc3:1", Protocol.ESA, (), 75.0, 0.0, 3.0, 3.0,
                      is_qc_item=True),
]
report = qc_evaluate(good_annotator + sloppy, [perturbation])
print(f"with a sloppy second annotator the OK rate halves: {report.ok_score_pct:.0f}%")
