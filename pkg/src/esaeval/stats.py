"""Correlations, rank tests, system clustering and campaign-level statistics.

The Wilcoxon tests carry their own exact paths (dynamic programming over the
rank-statistic distribution, tie-aware via midranks) because clustering at
small sample sizes depends on exact tail probabilities; the normal
approximation with tie correction takes over for larger samples. All rank
arithmetic is done on doubled midranks, which are integers, so exact-path
p-values are exact rational counts and reproducible bit for bit.

Two-sided p-values are 2 * min(lower tail, upper tail), capped at 1.
"""

from __future__ import annotations

import math
import random
import statistics
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import SegmentAnnotation, severity_counts, token_count
from .scoring import SeverityWeights, SystemScore, DEFAULT_WEIGHTS, system_scores

__all__ = [
    "ClusterConfig",
    "RankedSystem",
    "Ranking",
    "pearson",
    "spearman",
    "kendall_tau_c",
    "wilcoxon_rank_sum",
    "wilcoxon_signed_rank",
    "cluster_systems",
    "pairwise_accuracy",
    "subset_consistency",
    "feature_correlations",
    "TimeStats",
    "time_stats",
    "SpeedupStats",
    "learned_speedup",
    "BREAK_CAP_S",
]

# Per-segment durations above this are treated as interrupted by a break and
# excluded from time statistics.
BREAK_CAP_S = 300.0

EXACT_RANK_SUM_LIMIT = 12  # per side
EXACT_SIGNED_RANK_LIMIT = 20  # nonzero pairs


def _doubled_midranks(values: Sequence[float]) -> list[int]:
    """Midranks multiplied by 2, which makes them exact integers under ties."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0] * len(values)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        # positions i..j (0-based) share doubled midrank (i+1) + (j+1)
        doubled = (i + 1) + (j + 1)
        for k in range(i, j + 1):
            ranks[order[k]] = doubled
        i = j + 1
    return ranks


def _tie_group_sizes(values: Sequence[float]) -> list[int]:
    sizes: dict[float, int] = {}
    for v in values:
        sizes[v] = sizes.get(v, 0) + 1
    return [t for t in sizes.values() if t > 1]


# --- correlations ------------------------------------------------------------


def pearson(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Sample Pearson correlation; None when either side has zero variance."""
    if len(x) != len(y):
        raise ValueError("x and y must have equal length")
    if len(x) < 3:
        raise ValueError("pearson needs at least 3 points")
    ax = np.asarray(x, dtype=float)
    ay = np.asarray(y, dtype=float)
    dx = ax - ax.mean()
    dy = ay - ay.mean()
    mx = float(np.abs(dx).max())
    my = float(np.abs(dy).max())
    if mx == 0.0 or my == 0.0:
        return None
    # Rescale by the max deviation: correlation is scale-invariant and this
    # keeps the squared sums out of the subnormal range for tiny inputs.
    dx /= mx
    dy /= my
    num = float((dx * dy).sum())
    sx2 = float((dx * dx).sum())
    sy2 = float((dy * dy).sum())
    if num * num == sx2 * sy2:
        # exactly collinear; sidestep sqrt rounding so the boundary is a clean +-1
        return 1.0 if num > 0 else -1.0
    r = num / math.sqrt(sx2 * sy2)
    return max(-1.0, min(1.0, r))


def spearman(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Pearson correlation on fractional ranks (average ranks for ties)."""
    return pearson(_doubled_midranks(x), _doubled_midranks(y))


def kendall_tau_c(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Kendall tau variant c, suited to different scales and many ties.

    tau_c = (C - D) * 2m / (n^2 * (m - 1)) with C/D the concordant and
    discordant pair counts and m the smaller number of distinct values on
    either side. None (undefined) when either side is constant.
    """
    if len(x) != len(y):
        raise ValueError("x and y must have equal length")
    n = len(x)
    if n < 2:
        raise ValueError("kendall_tau_c needs at least 2 points")
    m = min(len(set(map(float, x))), len(set(map(float, y))))
    if m < 2:
        return None
    ax = np.asarray(x, dtype=float)
    ay = np.asarray(y, dtype=float)
    sx = np.sign(ax[:, None] - ax[None, :])
    sy = np.sign(ay[:, None] - ay[None, :])
    prod = sx * sy
    upper = np.triu_indices(n, k=1)
    concordant = int((prod[upper] > 0).sum())
    discordant = int((prod[upper] < 0).sum())
    return (concordant - discordant) * 2.0 * m / (n * n * (m - 1))


# --- Wilcoxon tests ----------------------------------------------------------


def _choose_sum_counts(doubled_ranks: Sequence[int], k: int) -> dict[int, int]:
    """Distribution of the sum over all k-subsets of doubled_ranks.

    dp[j][s] = number of j-subsets with sum s, built one element at a time.
    """
    dp: list[dict[int, int]] = [dict() for _ in range(k + 1)]
    dp[0][0] = 1
    for r in doubled_ranks:
        for j in range(k - 1, -1, -1):
            nxt = dp[j + 1]
            for s, c in dp[j].items():
                nxt[s + r] = nxt.get(s + r, 0) + c
    return dp[k]


def _two_sided_from_distribution(dist: dict[int, int], observed: int, total: int) -> float:
    c_le = sum(c for s, c in dist.items() if s <= observed)
    c_ge = sum(c for s, c in dist.items() if s >= observed)
    return min(1.0, 2.0 * min(c_le, c_ge) / total)


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sided Wilcoxon rank-sum (Mann-Whitney) p-value.

    Exact (enumeration of the rank-sum distribution, tie-aware) when both
    samples have at most 12 observations; otherwise a normal approximation
    with tie-corrected variance.
    """
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be nonempty")
    pooled = list(a) + list(b)
    doubled = _doubled_midranks(pooled)
    t_doubled = sum(doubled[:n1])

    if max(n1, n2) <= EXACT_RANK_SUM_LIMIT:
        dist = _choose_sum_counts(doubled, n1)
        return _two_sided_from_distribution(dist, t_doubled, math.comb(n1 + n2, n1))

    n = n1 + n2
    t_stat = t_doubled / 2.0
    mean = n1 * (n + 1) / 2.0
    tie_term = sum(t**3 - t for t in _tie_group_sizes(pooled))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return 1.0
    z = (t_stat - mean) / math.sqrt(var)
    return math.erfc(abs(z) / math.sqrt(2.0))


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float]) -> float | None:
    """Two-sided Wilcoxon signed-rank p-value for paired samples.

    Zero differences are dropped; all-zero input is undefined (None). Exact
    (enumeration over sign patterns) up to 20 nonzero pairs, then a normal
    approximation with tie-corrected variance.
    """
    if len(a) != len(b):
        raise ValueError("paired samples must have equal length")
    diffs = [x - y for x, y in zip(a, b) if x != y]
    n = len(diffs)
    if n == 0:
        return None
    doubled = _doubled_midranks([abs(d) for d in diffs])
    w_doubled = sum(r for r, d in zip(doubled, diffs) if d > 0)

    if n <= EXACT_SIGNED_RANK_LIMIT:
        # Distribution of the positive-rank sum over all 2^n sign patterns.
        dist = {0: 1}
        for r in doubled:
            nxt: dict[int, int] = {}
            for s, c in dist.items():
                nxt[s] = nxt.get(s, 0) + c
                nxt[s + r] = nxt.get(s + r, 0) + c
            dist = nxt
        return _two_sided_from_distribution(dist, w_doubled, 2**n)

    w_stat = w_doubled / 2.0
    mean = n * (n + 1) / 4.0
    tie_term = sum(t**3 - t for t in _tie_group_sizes([abs(d) for d in diffs]))
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
    if var <= 0:
        return 1.0
    z = (w_stat - mean) / math.sqrt(var)
    return math.erfc(abs(z) / math.sqrt(2.0))


# --- system ranking ----------------------------------------------------------


@dataclass(frozen=True)
class ClusterConfig:
    alpha: float = 0.05
    test: str = "rank_sum"  # or "signed_rank"

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must be strictly between 0 and 1")
        if self.test not in ("rank_sum", "signed_rank"):
            raise ValueError(f"unknown test {self.test!r}")


@dataclass(frozen=True)
class RankedSystem:
    system_id: str
    mean: float
    cluster: int


@dataclass(frozen=True)
class Ranking:
    """Systems in descending mean order with 1-based cluster indices."""

    entries: tuple[RankedSystem, ...]

    @property
    def order(self) -> tuple[str, ...]:
        return tuple(e.system_id for e in self.entries)

    @property
    def n_clusters(self) -> int:
        return self.entries[-1].cluster if self.entries else 0


def _pair_p_value(a: SystemScore, b: SystemScore, test: str) -> float | None:
    if test == "rank_sum":
        return wilcoxon_rank_sum(a.segment_values, b.segment_values)
    return wilcoxon_signed_rank(a.segment_values, b.segment_values)


def cluster_systems(scores: Sequence[SystemScore], cfg: ClusterConfig = ClusterConfig()) -> Ranking:
    """Greedy top-down clustering of systems by significance.

    Systems are sorted by mean descending. A new cluster starts at system S
    iff S is significantly different (p < alpha under the configured test)
    from every system already placed in the current cluster; otherwise S
    joins the current cluster.
    """
    ordered = sorted(scores, key=lambda s: (-s.mean, s.system_id))
    entries: list[RankedSystem] = []
    current: list[SystemScore] = []
    cluster = 1
    for score in ordered:
        if current:
            splits = all(
                (p := _pair_p_value(member, score, cfg.test)) is not None and p < cfg.alpha
                for member in current
            )
            if splits:
                cluster += 1
                current = []
        current.append(score)
        entries.append(RankedSystem(score.system_id, score.mean, cluster))
    return Ranking(tuple(entries))


def _pair_agreement(c_lo: float, c_hi: float, r_lo: float, r_hi: float) -> float:
    sc = (c_lo > c_hi) - (c_lo < c_hi)
    sr = (r_lo > r_hi) - (r_lo < r_hi)
    if sc == sr:
        return 1.0
    if sc == 0 or sr == 0:
        return 0.5
    return 0.0


def _accuracy_from_means(candidate: dict[str, float], reference: dict[str, float]) -> float:
    systems = sorted(candidate)
    if len(systems) < 2:
        raise ValueError("pairwise accuracy needs at least 2 systems")
    total, agree = 0, 0.0
    for i in range(len(systems)):
        for j in range(i + 1, len(systems)):
            si, sj = systems[i], systems[j]
            agree += _pair_agreement(candidate[si], candidate[sj], reference[si], reference[sj])
            total += 1
    return agree / total


def pairwise_accuracy(candidate: Sequence[SystemScore], reference: Sequence[SystemScore]) -> float:
    """Fraction of unordered system pairs ordered the same way by both rankings.

    A tie in one ranking against a strict order in the other counts 0.5; a
    tie in both counts as agreement.
    """
    cand = {s.system_id: s.mean for s in candidate}
    ref = {s.system_id: s.mean for s in reference}
    if set(cand) != set(ref):
        raise ValueError("candidate and reference must rank the same system set")
    return _accuracy_from_means(cand, ref)


def subset_consistency(
    annotations: Iterable[SegmentAnnotation],
    kind: str = "direct",
    w: SeverityWeights = DEFAULT_WEIGHTS,
    subset_sizes: Sequence[int] | None = None,
    resamples: int = 100,
    seed: int = 0,
    target_token_counts: dict[tuple[str, str], int] | None = None,
) -> tuple[list[tuple[int, float]], float]:
    """Ranking accuracy of segment subsets against the full-data ranking.

    For each subset size n, segments are repeatedly sampled without
    replacement (the same segments across all systems), the subset-induced
    ranking is compared to the full ranking via pairwise accuracy, and the
    results are averaged over resamples. Returns the (n, mean accuracy)
    curve and its mean, i.e. the normalized area under the curve.
    """
    full = system_scores(annotations, kind, w, target_token_counts)
    if len(full) < 2:
        raise ValueError("subset consistency needs at least 2 systems")
    n_segments = len(full[0].segment_values)
    matrix = {s.system_id: np.asarray(s.segment_values, dtype=float) for s in full}
    # Reference means come from the same summation as the subset means so the
    # n == n_segments endpoint is bitwise identical, hence exactly 1.0.
    full_means = {sys: float(vals.mean()) for sys, vals in matrix.items()}

    if subset_sizes is None:
        subset_sizes = sorted({max(1, round(n_segments * k / 10)) for k in range(1, 11)})
    for n in subset_sizes:
        if not (1 <= n <= n_segments):
            raise ValueError(f"subset size {n} outside [1, {n_segments}]")

    rng = random.Random(seed)
    curve: list[tuple[int, float]] = []
    for n in subset_sizes:
        accs = []
        for _ in range(resamples):
            idx = sorted(rng.sample(range(n_segments), n))
            sub_means = {sys: float(vals[idx].mean()) for sys, vals in matrix.items()}
            accs.append(_accuracy_from_means(sub_means, full_means))
        curve.append((n, sum(accs) / len(accs)))
    average = sum(acc for _, acc in curve) / len(curve)
    return curve, average


# --- feature correlations ----------------------------------------------------


def feature_correlations(
    annotations: Sequence[SegmentAnnotation],
    source_texts: dict[str, str],
    target_texts: dict[tuple[str, str], str],
) -> list[tuple[str, float | None]]:
    """Pearson correlation of segment-level features with the direct score.

    Features: source/target token counts, minor/major/missing span counts,
    and the same counts normalized by target token count. Missing spans also
    count under their severity. Degenerate features correlate as None.
    """
    anns = [a for a in annotations if a.direct_score is not None]
    if len(anns) < 3:
        raise ValueError("feature correlations need at least 3 scored annotations")
    scores = [float(a.direct_score) for a in anns]
    rows = []
    for a in anns:
        src_tokens = token_count(source_texts[a.seg_id])
        tgt_tokens = token_count(target_texts[(a.system_id, a.seg_id)])
        if tgt_tokens == 0:
            raise ValueError(f"empty target for ({a.system_id}, {a.seg_id})")
        counts = severity_counts(a.spans)
        rows.append(
            {
                "source_tokens": src_tokens,
                "target_tokens": tgt_tokens,
                "minor_count": counts["minor"],
                "major_count": counts["major"],
                "missing_count": counts["missing"],
                "minor_count_normalized": counts["minor"] / tgt_tokens,
                "major_count_normalized": counts["major"] / tgt_tokens,
                "missing_count_normalized": counts["missing"] / tgt_tokens,
            }
        )
    features = list(rows[0])
    return [(f, pearson([r[f] for r in rows], scores)) for f in features]


# --- timing ------------------------------------------------------------------


@dataclass(frozen=True)
class TimeStats:
    pooled_median_s: float
    mean_of_annotator_medians_s: float
    per_annotator_medians: dict[str, float]
    n_kept: int
    n_excluded: int


def time_stats(
    annotations: Iterable[SegmentAnnotation], break_cap_s: float = BREAK_CAP_S
) -> TimeStats:
    """Median annotation times, pooled and averaged per annotator.

    Durations above the break cap are excluded: long gaps are breaks, not
    annotation work, and corrupt the estimates. Annotators left with no kept
    segments are dropped with a warning.
    """
    kept: dict[str, list[float]] = {}
    n_excluded = 0
    all_annotators = set()
    for a in annotations:
        all_annotators.add(a.annotator_id)
        if a.duration_s > break_cap_s:
            n_excluded += 1
            continue
        kept.setdefault(a.annotator_id, []).append(a.duration_s)
    for annotator in sorted(all_annotators - set(kept)):
        warnings.warn(f"annotator {annotator!r} has no segments under the break cap")
    if not kept:
        raise ValueError("no durations under the break cap")
    pooled = [d for ds in kept.values() for d in ds]
    medians = {annotator: statistics.median(ds) for annotator, ds in sorted(kept.items())}
    return TimeStats(
        pooled_median_s=statistics.median(pooled),
        mean_of_annotator_medians_s=sum(medians.values()) / len(medians),
        per_annotator_medians=medians,
        n_kept=len(pooled),
        n_excluded=n_excluded,
    )


@dataclass(frozen=True)
class SpeedupStats:
    per_annotator_slope_s_per_segment: dict[str, float]
    mean_slope: float | None
    smoothed_series: dict[str, list[float]]


def learned_speedup(
    annotations: Iterable[SegmentAnnotation], window: int = 15
) -> SpeedupStats:
    """How much an annotator speeds up per processed segment.

    Each annotator's durations are ordered by submission time and smoothed
    with a moving average; the speedup is the drop from the first to the last
    smoothed window divided by the number of segments in between. Annotators
    with fewer than two full windows are excluded.
    """
    by_annotator: dict[str, list[SegmentAnnotation]] = {}
    for a in annotations:
        by_annotator.setdefault(a.annotator_id, []).append(a)

    slopes: dict[str, float] = {}
    smoothed_all: dict[str, list[float]] = {}
    for annotator, anns in sorted(by_annotator.items()):
        anns.sort(key=lambda a: (a.submitted_at, a.started_at, a.seg_id))
        durations = [a.duration_s for a in anns]
        n = len(durations)
        if n < 2 * window:
            continue
        cumsum = [0.0]
        for d in durations:
            cumsum.append(cumsum[-1] + d)
        smoothed = [(cumsum[i + window] - cumsum[i]) / window for i in range(n - window + 1)]
        slopes[annotator] = (smoothed[0] - smoothed[-1]) / (n - window)
        smoothed_all[annotator] = smoothed

    mean_slope = sum(slopes.values()) / len(slopes) if slopes else None
    return SpeedupStats(slopes, mean_slope, smoothed_all)
