"""Agreement analysis: span overlap coverage, severity agreement, score recalls.

Run: python3 demos/03_agreement_analysis.py
"""

import random

from esaeval import ErrorSpan, Protocol, SegmentAnnotation, Severity
from esaeval.agreement import segment_agreement, span_agreement_frequencies, span_coverage

rng = random.Random(3)

############################################################
# Two annotators over the same 40 segments. The second annotator finds a
# subset of the first one's errors, slightly shifted, and scores a bit
# differently; spans overlapping by a single character count as a match.


def annotate(annotator, shift, find_rate, noise):
    annotations = []
    for i in range(40):
        spans = []
        for e in range(i % 3):  # 0..2 planted errors per segment
            if rng.random() < find_rate:
                start = 10 * e + shift
                spans.append(ErrorSpan(start, start + 6,
                                       Severity.MAJOR if e == 0 else Severity.MINOR))
        score = max(0.0, min(100.0, 90 - 18 * len(spans) + rng.gauss(0, noise)))
        annotations.append(SegmentAnnotation(annotator, "sysA", f"d:{i:02d}", Protocol.ESA,
                                             tuple(spans), score, 0.0, 25.0, 25.0))
    return annotations


first = annotate("ann1", shift=0, find_rate=1.0, noise=3.0)
second = annotate("ann2", shift=3, find_rate=0.7, noise=8.0)

############################################################
# Coverage is asymmetric: "how much of B does A contain".

print(f"ann1 contains {span_coverage(first, second):.0%} of ann2's spans")
print(f"ann2 contains {span_coverage(second, first):.0%} of ann1's spans")

############################################################
# Of the overlapping spans, how many agree on severity?

freqs = span_agreement_frequencies(first, second)
print(f"any overlap: {freqs['any']:.1%}, same severity: {freqs['same_severity']:.1%}")

############################################################
# Segment-level agreement: tau-c and Pearson over paired scores, plus the
# recall of marking any/minor/major errors in the same segments.

report = segment_agreement(first, second, kind="direct", pair_by_annotator=False)
print(f"kendall tau-c: {report.kendall_tau_c:.3f}")
print(f"pearson:       {report.pearson:.3f}")
print(f"error recall:  {report.error_recall:.1%}")
print(f"minor recall:  {report.minor_recall:.1%}")
print(f"major recall:  {report.major_recall:.1%}")
