"""Attention checks: perturbation generation and annotator reliability scoring.

A check item is a copy of a system translation with a contiguous token run
replaced by random in-language words of the same token count, which plants a
guaranteed major error. Diligent annotators score the perturbed copy lower,
mark more spans on it, and usually hit the replaced range.
"""

from __future__ import annotations

import random
import re
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import SegmentAnnotation, SystemOutput, ranges_overlap
from .scoring import DEFAULT_WEIGHTS, SeverityWeights, span_score

__all__ = ["Perturbation", "QCReport", "perturb", "qc_evaluate", "NotPerturbable"]

MAX_REPLACED_TOKENS = 4

_TOKEN_RE = re.compile(r"\S+")


class NotPerturbable(ValueError):
    """Target too short to perturb without destroying it entirely."""


@dataclass(frozen=True)
class Perturbation:
    """A planted error: which output was changed, where, and from what seed."""

    seg_id: str
    system_id: str
    original_text: str
    perturbed_text: str
    replaced_range: tuple[int, int]  # character interval in perturbed_text
    word_count_replaced: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "seg_id": self.seg_id,
            "system_id": self.system_id,
            "original_text": self.original_text,
            "perturbed_text": self.perturbed_text,
            "replaced_range": list(self.replaced_range),
            "word_count_replaced": self.word_count_replaced,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Perturbation":
        return cls(
            seg_id=d["seg_id"],
            system_id=d["system_id"],
            original_text=d["original_text"],
            perturbed_text=d["perturbed_text"],
            replaced_range=tuple(d["replaced_range"]),
            word_count_replaced=d["word_count_replaced"],
            seed=d["seed"],
        )


def perturb(output: SystemOutput, rng_seed: int, vocabulary: Sequence[str]) -> Perturbation:
    """Replace a contiguous token run with random vocabulary words.

    The run length is uniform in [1, min(4, n - 1)] and its position uniform;
    each replaced token becomes one uniformly sampled vocabulary word, so the
    token count is preserved. Text outside the replaced range is untouched.
    Deterministic given the seed.
    """
    if not vocabulary:
        raise ValueError("vocabulary must be nonempty")
    tokens = list(_TOKEN_RE.finditer(output.target_text))
    n = len(tokens)
    if n < 3:
        raise NotPerturbable(f"target of ({output.system_id}, {output.seg_id}) has {n} tokens")

    rng = random.Random(rng_seed)
    length = rng.randint(1, min(MAX_REPLACED_TOKENS, n - 1))
    start_tok = rng.randint(0, n - length)
    words = [rng.choice(vocabulary) for _ in range(length)]

    char_lo = tokens[start_tok].start()
    char_hi = tokens[start_tok + length - 1].end()
    replacement = " ".join(words)
    perturbed = output.target_text[:char_lo] + replacement + output.target_text[char_hi:]
    return Perturbation(
        seg_id=output.seg_id,
        system_id=output.system_id,
        original_text=output.target_text,
        perturbed_text=perturbed,
        replaced_range=(char_lo, char_lo + len(replacement)),
        word_count_replaced=length,
        seed=rng_seed,
    )


@dataclass(frozen=True)
class QCReport:
    mean_score_original: float
    mean_score_perturbed: float
    mean_spans_original: float
    mean_spans_perturbed: float
    ok_score_pct: float
    ok_spans_pct: float
    perturbation_marked_pct: float
    n_pairs: int


def _qc_score(a: SegmentAnnotation, w: SeverityWeights) -> float:
    if a.protocol.uses_score and a.direct_score is not None:
        return float(a.direct_score)
    return span_score(a.spans, w)


def qc_evaluate(
    annotations: Iterable[SegmentAnnotation],
    perturbations: Sequence[Perturbation],
    w: SeverityWeights = DEFAULT_WEIGHTS,
) -> QCReport:
    """Score annotator reliability on attention-check pairs.

    Each perturbation contributes one pair per annotator who annotated both
    the original and the perturbed copy (perturbed-copy annotations carry the
    qc flag). A pair is OK on score when the original scored strictly higher,
    OK on spans when the original got strictly fewer spans; the planted range
    counts as marked when any span on the perturbed copy overlaps it by at
    least one character. Pairs lacking either side are skipped with a warning.
    """
    originals: dict[tuple[str, str, str], SegmentAnnotation] = {}
    perturbed: dict[tuple[str, str, str], SegmentAnnotation] = {}
    annotators: set[str] = set()
    for a in annotations:
        key = (a.annotator_id, a.system_id, a.seg_id)
        (perturbed if a.is_qc_item else originals)[key] = a
        annotators.add(a.annotator_id)

    pairs: list[tuple[SegmentAnnotation, SegmentAnnotation, Perturbation]] = []
    for p in perturbations:
        found = False
        for annotator in sorted(annotators):
            key = (annotator, p.system_id, p.seg_id)
            if key in originals and key in perturbed:
                pairs.append((originals[key], perturbed[key], p))
                found = True
        if not found:
            warnings.warn(
                f"perturbation ({p.system_id}, {p.seg_id}) lacks a complete "
                "original/perturbed annotation pair; skipped"
            )
    if not pairs:
        raise ValueError("no complete attention-check pairs")

    ok_score = ok_spans = marked = 0
    scores_orig: list[float] = []
    scores_pert: list[float] = []
    spans_orig: list[int] = []
    spans_pert: list[int] = []
    for orig, pert, p in pairs:
        s_orig, s_pert = _qc_score(orig, w), _qc_score(pert, w)
        scores_orig.append(s_orig)
        scores_pert.append(s_pert)
        spans_orig.append(len(orig.spans))
        spans_pert.append(len(pert.spans))
        ok_score += s_orig > s_pert
        ok_spans += len(orig.spans) < len(pert.spans)
        lo, hi = p.replaced_range
        marked += any(ranges_overlap(s.start, s.end, lo, hi) for s in pert.spans)

    n = len(pairs)
    return QCReport(
        mean_score_original=sum(scores_orig) / n,
        mean_score_perturbed=sum(scores_pert) / n,
        mean_spans_original=sum(spans_orig) / n,
        mean_spans_perturbed=sum(spans_pert) / n,
        ok_score_pct=100.0 * ok_score / n,
        ok_spans_pct=100.0 * ok_spans / n,
        perturbation_marked_pct=100.0 * marked / n,
        n_pairs=n,
    )
