"""Human evaluation of machine translation with error-span annotation.

Core pieces: a shared data model (documents, system outputs, error spans,
segment annotations under the ESA/MQM/DA protocols), span-based and direct
scoring, a statistics suite (rank tests, clustering, correlations, subset
consistency, timing), span-overlap agreement analysis, perturbation-based
attention checks, and a campaign service with an HTTP API for live
annotation work.
"""

from .model import (
    MISSING_SENTINEL,
    Document,
    ErrorSpan,
    IdentityMismatch,
    Protocol,
    SegmentAnnotation,
    Severity,
    SourceSegment,
    SystemOutput,
    annotated_text,
    annotation_from_dict,
    annotation_to_dict,
    ranges_overlap,
    sentinel_range,
    severity_counts,
    validate_annotation,
)
from .scoring import (
    DEFAULT_WEIGHTS,
    SegmentScore,
    SeverityWeights,
    SystemScore,
    scan_major_weight,
    score_histogram,
    segment_score,
    span_score,
    span_score_normalized,
    system_scores,
)
from .stats import (
    ClusterConfig,
    Ranking,
    cluster_systems,
    kendall_tau_c,
    learned_speedup,
    pairwise_accuracy,
    pearson,
    spearman,
    subset_consistency,
    feature_correlations,
    time_stats,
    wilcoxon_rank_sum,
    wilcoxon_signed_rank,
)
from .agreement import AgreementReport, segment_agreement, span_agreement_frequencies, span_coverage
from .qc import Perturbation, QCReport, perturb, qc_evaluate
from .campaign import (
    Campaign,
    CampaignStore,
    RequiredSpan,
    Task,
    TutorialItem,
    Unit,
    build_campaign,
    campaign_from_manifest,
)
from .ingest import (
    CoverageError,
    DataFormatError,
    Dataset,
    intersect_segments,
    load_annotations,
    load_dataset,
    load_documents,
    load_outputs,
    subsample_documents,
    write_annotations,
    write_documents,
    write_outputs,
)

__version__ = "0.1.0"
