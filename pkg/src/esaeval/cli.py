"""Report command line: chains ingest, scoring, stats, agreement and QC.

Each subcommand writes one output directory (<out>/<command>/) holding a
report.json plus plot-ready CSVs; every CSV starts with a versioned schema
header line. Randomized commands take --seed and identical invocations
produce byte-identical outputs. A --config JSON file overrides flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import agreement as agreement_mod
from . import qc as qc_mod
from . import stats as stats_mod
from .ingest import Dataset, load_annotations, load_dataset, read_jsonl
from .model import SegmentAnnotation
from .qc import Perturbation
from .scoring import (
    DEFAULT_WEIGHTS,
    SeverityWeights,
    score_histogram,
    scan_major_weight,
    segment_score,
    system_scores,
)

KIND_FLAGS = {"direct": "direct", "spans": "span_based",
              "spans-normalized": "span_based_normalized"}


def _write_csv(path: Path, name: str, header: str, rows: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# esaeval-csv v1 {name}\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


def _write_report(out_dir: Path, report: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


class _Inputs:
    """Lazily loaded command inputs shared by all subcommands."""

    def __init__(self, args):
        self.args = args
        self.dataset: Dataset | None = load_dataset(args.dataset) if args.dataset else None
        self.weights = SeverityWeights(args.w_minor, args.w_major)
        self.kind = KIND_FLAGS[args.kind]

    @property
    def token_counts(self):
        return self.dataset.target_token_counts if self.dataset else None

    def annotations(self, path, keep_qc: bool = False) -> list[SegmentAnnotation]:
        outputs = self.dataset.outputs if self.dataset else None
        anns = load_annotations(path, outputs=outputs)
        if not keep_qc:
            anns = [a for a in anns if not a.is_qc_item]
        if not anns:
            raise ValueError(f"no usable annotations in {path}")
        return anns


def cmd_rank(inputs: _Inputs, out_dir: Path) -> dict:
    """System means, significance clusters, and accuracy against a reference."""
    args = inputs.args
    anns = inputs.annotations(args.annotations)
    scores = system_scores(anns, inputs.kind, inputs.weights, inputs.token_counts)
    cfg = stats_mod.ClusterConfig(alpha=args.alpha, test=args.test)
    ranking = stats_mod.cluster_systems(scores, cfg)

    report = {
        "kind": inputs.kind,
        "alpha": args.alpha,
        "test": args.test,
        "ranking": [
            {"system_id": e.system_id, "mean": e.mean, "cluster": e.cluster}
            for e in ranking.entries
        ],
    }
    if args.reference:
        ref_anns = inputs.annotations(args.reference)
        ref_kind = KIND_FLAGS[args.reference_kind or args.kind]
        ref_scores = system_scores(ref_anns, ref_kind, inputs.weights, inputs.token_counts)
        # correlations are undefined below 2 (accuracy) / 3 (spearman) systems
        report["pairwise_accuracy"] = (
            stats_mod.pairwise_accuracy(scores, ref_scores) if len(scores) >= 2 else None
        )
        ref_means = {s.system_id: s.mean for s in ref_scores}
        cand = sorted(scores, key=lambda s: s.system_id)
        report["spearman"] = stats_mod.spearman(
            [s.mean for s in cand], [ref_means[s.system_id] for s in cand]
        ) if len(cand) >= 3 else None

    _write_csv(
        out_dir / "system_scores.csv",
        "system_scores",
        "system_id,mean,cluster",
        [f"{e.system_id},{_fmt(e.mean)},{e.cluster}" for e in ranking.entries],
    )
    _write_csv(
        out_dir / "segment_scores.csv",
        "segment_scores",
        "system_id,seg_id,annotator_id,kind,value",
        [
            (lambda s: f"{s.system_id},{s.seg_id},{s.annotator_id},{s.kind},{_fmt(s.value)}")(
                segment_score(a, inputs.kind, inputs.weights,
                              target_token_count=(inputs.token_counts or {}).get(
                                  (a.system_id, a.seg_id)))
            )
            for a in sorted(anns, key=lambda a: (a.system_id, a.seg_id, a.annotator_id))
        ],
    )
    return report


def cmd_agreement(inputs: _Inputs, out_dir: Path) -> dict:
    """Cross-run agreement: correlations, recalls, coverage, span frequencies."""
    args = inputs.args
    if not args.reference:
        raise ValueError("agreement needs --reference")
    run1 = inputs.annotations(args.annotations)
    run2 = inputs.annotations(args.reference)
    kind2 = KIND_FLAGS[args.reference_kind or args.kind]
    rep = agreement_mod.segment_agreement(
        run1,
        run2,
        kind=(inputs.kind, kind2),
        w=inputs.weights,
        pair_by_annotator=args.pair_by == "annotator",
        condition_on=args.condition_on,
        target_token_counts=inputs.token_counts,
    )
    coverage = {
        "1_covers_2": agreement_mod.span_coverage(run1, run2),
        "2_covers_1": agreement_mod.span_coverage(run2, run1),
    }
    frequencies = agreement_mod.span_agreement_frequencies(run1, run2, args.taxonomy_depth)
    report = {
        "kendall_tau_c": rep.kendall_tau_c,
        "pearson": rep.pearson,
        "error_recall": rep.error_recall,
        "minor_recall": rep.minor_recall,
        "major_recall": rep.major_recall,
        "n_cells": rep.n_cells,
        "coverage": coverage,
        "span_frequencies": frequencies,
    }
    _write_csv(
        out_dir / "coverage.csv",
        "coverage",
        "direction,coverage",
        [f"1_covers_2,{_fmt(coverage['1_covers_2'])}",
         f"2_covers_1,{_fmt(coverage['2_covers_1'])}"],
    )
    return report


def cmd_qc(inputs: _Inputs, out_dir: Path) -> dict:
    args = inputs.args
    anns = inputs.annotations(args.annotations, keep_qc=True)
    perturbations = [Perturbation.from_dict(r) for r in read_jsonl(args.perturbations)]
    rep = qc_mod.qc_evaluate(anns, perturbations, inputs.weights)
    return {
        "mean_score_original": rep.mean_score_original,
        "mean_score_perturbed": rep.mean_score_perturbed,
        "mean_spans_original": rep.mean_spans_original,
        "mean_spans_perturbed": rep.mean_spans_perturbed,
        "ok_score_pct": rep.ok_score_pct,
        "ok_spans_pct": rep.ok_spans_pct,
        "perturbation_marked_pct": rep.perturbation_marked_pct,
        "n_pairs": rep.n_pairs,
    }


def cmd_time(inputs: _Inputs, out_dir: Path) -> dict:
    args = inputs.args
    anns = inputs.annotations(args.annotations, keep_qc=True)
    ts = stats_mod.time_stats(anns, break_cap_s=args.break_cap)
    speed = stats_mod.learned_speedup(anns, window=args.window)
    rows = [
        f"{annotator},{i},{_fmt(v)}"
        for annotator, series in sorted(speed.smoothed_series.items())
        for i, v in enumerate(series)
    ]
    _write_csv(out_dir / "speedup_series.csv", "speedup_series",
               "annotator_id,window_start,smoothed_duration_s", rows)
    return {
        "pooled_median_s": ts.pooled_median_s,
        "mean_of_annotator_medians_s": ts.mean_of_annotator_medians_s,
        "per_annotator_medians": ts.per_annotator_medians,
        "n_kept": ts.n_kept,
        "n_excluded": ts.n_excluded,
        "per_annotator_slope_s_per_segment": speed.per_annotator_slope_s_per_segment,
        "mean_slope_s_per_segment": speed.mean_slope,
    }


def cmd_weightscan(inputs: _Inputs, out_dir: Path) -> dict:
    args = inputs.args
    anns = inputs.annotations(args.annotations)
    best, curve = scan_major_weight(anns, w_minor=args.w_minor)
    _write_csv(
        out_dir / "weight_scan.csv",
        "weight_scan",
        "w_major,pearson",
        [f"{w!r},{_fmt(r)}" for w, r in curve],
    )
    return {"best_w_major": best, "w_minor": args.w_minor,
            "n_grid": len(curve), "n_annotations": len(anns)}


def cmd_consistency(inputs: _Inputs, out_dir: Path) -> dict:
    args = inputs.args
    anns = inputs.annotations(args.annotations)
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else None
    curve, average = stats_mod.subset_consistency(
        anns,
        inputs.kind,
        inputs.weights,
        subset_sizes=sizes,
        resamples=args.resamples,
        seed=args.seed,
        target_token_counts=inputs.token_counts,
    )
    _write_csv(
        out_dir / "consistency_curve.csv",
        "consistency_curve",
        "n_segments,mean_accuracy",
        [f"{n},{_fmt(acc)}" for n, acc in curve],
    )
    return {"average_accuracy": average, "resamples": args.resamples, "seed": args.seed,
            "curve": [{"n": n, "accuracy": acc} for n, acc in curve]}


def cmd_histogram(inputs: _Inputs, out_dir: Path) -> dict:
    args = inputs.args
    anns = inputs.annotations(args.annotations)
    values = [
        segment_score(a, inputs.kind, inputs.weights,
                      target_token_count=(inputs.token_counts or {}).get(
                          (a.system_id, a.seg_id))).value
        for a in anns
    ]
    bin_width = args.bin_width if args.bin_width is not None else (
        5.0 if inputs.kind == "direct" else 1.0)
    bins = score_histogram(values, clip_at=args.clip, bin_width=bin_width)
    _write_csv(
        out_dir / "histogram.csv",
        "histogram",
        "bin_lo,bin_hi,count",
        [f"{lo!r},{hi!r},{c}" for lo, hi, c in bins],
    )
    return {"n_scores": len(values), "bin_width": bin_width, "clip_at": args.clip,
            "bins": [{"lo": lo, "hi": hi, "count": c} for lo, hi, c in bins]}


COMMANDS = {
    "rank": cmd_rank,
    "agreement": cmd_agreement,
    "qc": cmd_qc,
    "time": cmd_time,
    "weightscan": cmd_weightscan,
    "consistency": cmd_consistency,
    "histogram": cmd_histogram,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="esaeval", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").strip().splitlines()[0] if fn.__doc__ else None)
        p.add_argument("--dataset", help="dataset manifest JSON")
        p.add_argument("--annotations", help="annotations JSONL")
        p.add_argument("--reference", help="reference annotations JSONL")
        p.add_argument("--perturbations", help="perturbation manifest JSONL (qc)")
        p.add_argument("--protocol", choices=["ESA", "MQM", "DA"], help="expected protocol")
        p.add_argument("--kind", choices=list(KIND_FLAGS), default="direct")
        p.add_argument("--reference-kind", choices=list(KIND_FLAGS), default=None)
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--test", choices=["rank_sum", "signed_rank"], default="rank_sum")
        p.add_argument("--w-minor", type=float, default=DEFAULT_WEIGHTS.w_minor)
        p.add_argument("--w-major", type=float, default=DEFAULT_WEIGHTS.w_major)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="./esaeval-out")
        p.add_argument("--config", help="JSON config file; overrides flags")
        p.add_argument("--sizes", help="comma-separated subset sizes (consistency)")
        p.add_argument("--resamples", type=int, default=100)
        p.add_argument("--clip", type=float, default=None)
        p.add_argument("--bin-width", type=float, default=None)
        p.add_argument("--break-cap", type=float, default=stats_mod.BREAK_CAP_S)
        p.add_argument("--window", type=int, default=15)
        p.add_argument("--pair-by", choices=["annotator", "cell"], default="cell")
        p.add_argument("--condition-on", type=int, choices=[1, 2], default=1)
        p.add_argument("--taxonomy-depth", choices=list(agreement_mod.TAXONOMY_DEPTHS),
                       default="none")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            for key, value in json.load(fh).items():
                setattr(args, key.replace("-", "_"), value)
    try:
        inputs = _Inputs(args)
        if args.protocol and args.annotations:
            bad = [a for a in inputs.annotations(args.annotations, keep_qc=True)
                   if a.protocol.value != args.protocol]
            if bad:
                raise ValueError(f"{len(bad)} annotations not in protocol {args.protocol}")
        out_dir = Path(args.out) / args.command
        report = COMMANDS[args.command](inputs, out_dir)
        _write_report(out_dir, report)
        print(json.dumps({"command": args.command, "out": str(out_dir)}, sort_keys=True))
        return 0
    except Exception as exc:  # structured failure for scripting
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}, sort_keys=True),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
