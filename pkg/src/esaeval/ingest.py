"""Readers and writers for the canonical JSONL formats.

One record per line, UTF-8, every record carrying a schema version field
``v``. Documents and outputs are one segment per line; annotations follow
the field names in model.annotation_to_dict. Adapters for external formats
belong here so the analysis modules only ever see canonical types.

Field layout (v1):
  documents:   {"v":1,"doc_id","seg_id","text","domain"?}
  outputs:     {"v":1,"system_id","seg_id","text"}
  annotations: {"v":1,"annotator_id","system_id","seg_id","protocol","spans",
                "score","started_at","submitted_at","duration_s","qc"?}
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .model import (
    Document,
    SegmentAnnotation,
    SourceSegment,
    SystemOutput,
    annotation_from_dict,
    annotation_to_dict,
    token_count,
    validate_annotation,
)

__all__ = [
    "DataFormatError",
    "CoverageError",
    "Dataset",
    "read_jsonl",
    "write_jsonl",
    "load_documents",
    "load_outputs",
    "load_annotations",
    "write_documents",
    "write_outputs",
    "write_annotations",
    "load_dataset",
    "subsample_documents",
    "intersect_segments",
]

SCHEMA_VERSION = 1


class DataFormatError(ValueError):
    """Malformed record; message carries the file and line number."""


class CoverageError(ValueError):
    """Systems do not cover identical segment sets."""

    def __init__(self, gaps: list[tuple[str, str]]):
        self.gaps = gaps
        shown = ", ".join(f"({s}, {g})" for s, g in gaps[:10])
        more = "" if len(gaps) <= 10 else f" and {len(gaps) - 10} more"
        super().__init__(f"missing (system, segment) cells: {shown}{more}")


def read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise DataFormatError(f"{path}:{lineno}: record must be an object")
            if record.get("v") != SCHEMA_VERSION:
                raise DataFormatError(f"{path}:{lineno}: missing or unsupported schema version")
            records.append(record)
    return records


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def _require(record: dict, keys: Sequence[str], path, lineno: int) -> None:
    for key in keys:
        if key not in record:
            raise DataFormatError(f"{path}:{lineno}: missing field {key!r}")


def load_documents(path: str | Path) -> list[Document]:
    """Documents grouped from per-segment lines, order preserved."""
    grouped: dict[str, list[SourceSegment]] = {}
    domains: dict[str, str] = {}
    seen_segs: set[str] = set()
    for lineno, record in enumerate(read_jsonl(path), start=1):
        _require(record, ("doc_id", "seg_id", "text"), path, lineno)
        seg_id = record["seg_id"]
        if seg_id in seen_segs:
            raise DataFormatError(f"{path}:{lineno}: duplicate seg_id {seg_id!r}")
        seen_segs.add(seg_id)
        grouped.setdefault(record["doc_id"], []).append(
            SourceSegment(seg_id=seg_id, source_text=record["text"])
        )
        domains.setdefault(record["doc_id"], record.get("domain", ""))
    return [
        Document(doc_id=doc_id, segments=tuple(segs), domain_tag=domains[doc_id])
        for doc_id, segs in grouped.items()
    ]


def load_outputs(path: str | Path) -> list[SystemOutput]:
    outputs = []
    seen: set[tuple[str, str]] = set()
    for lineno, record in enumerate(read_jsonl(path), start=1):
        _require(record, ("system_id", "seg_id", "text"), path, lineno)
        key = (record["system_id"], record["seg_id"])
        if key in seen:
            raise DataFormatError(f"{path}:{lineno}: duplicate output for {key}")
        seen.add(key)
        outputs.append(
            SystemOutput(system_id=record["system_id"], seg_id=record["seg_id"],
                         target_text=record["text"])
        )
    return outputs


def load_annotations(
    path: str | Path,
    outputs: dict[tuple[str, str], SystemOutput] | None = None,
) -> list[SegmentAnnotation]:
    """Parse annotations; when outputs are given, enforce model validity too."""
    annotations = []
    for lineno, record in enumerate(read_jsonl(path), start=1):
        _require(
            record, ("annotator_id", "system_id", "seg_id", "protocol", "spans"), path, lineno
        )
        try:
            a = annotation_from_dict(record)
        except (KeyError, ValueError) as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
        # attention-check rows were annotated against perturbed text, which
        # lives in the perturbation manifest, not the outputs file
        if outputs is not None and not a.is_qc_item:
            out = outputs.get((a.system_id, a.seg_id))
            if out is None:
                raise DataFormatError(
                    f"{path}:{lineno}: no output for ({a.system_id}, {a.seg_id})"
                )
            violations = validate_annotation(a, out)
            if violations:
                raise DataFormatError(f"{path}:{lineno}: invalid annotation: {violations}")
        annotations.append(a)
    return annotations


def write_documents(path: str | Path, documents: Iterable[Document]) -> None:
    write_jsonl(
        path,
        (
            {"v": SCHEMA_VERSION, "doc_id": doc.doc_id, "seg_id": seg.seg_id,
             "domain": doc.domain_tag, "text": seg.source_text}
            for doc in documents
            for seg in doc.segments
        ),
    )


def write_outputs(path: str | Path, outputs: Iterable[SystemOutput]) -> None:
    write_jsonl(
        path,
        (
            {"v": SCHEMA_VERSION, "system_id": o.system_id, "seg_id": o.seg_id,
             "text": o.target_text}
            for o in outputs
        ),
    )


def write_annotations(path: str | Path, annotations: Iterable[SegmentAnnotation]) -> None:
    write_jsonl(path, (annotation_to_dict(a) for a in annotations))


@dataclass
class Dataset:
    """A loaded campaign dataset: documents, outputs, optional annotation sets."""

    documents: list[Document]
    outputs: dict[tuple[str, str], SystemOutput]
    annotation_sets: dict[str, list[SegmentAnnotation]] = field(default_factory=dict)
    lang_pair: str = ""

    @property
    def systems(self) -> list[str]:
        return sorted({sys for sys, _ in self.outputs})

    @property
    def seg_ids(self) -> list[str]:
        return [seg.seg_id for doc in self.documents for seg in doc.segments]

    @property
    def source_texts(self) -> dict[str, str]:
        return {seg.seg_id: seg.source_text for doc in self.documents for seg in doc.segments}

    @property
    def target_texts(self) -> dict[tuple[str, str], str]:
        return {key: out.target_text for key, out in self.outputs.items()}

    @property
    def target_token_counts(self) -> dict[tuple[str, str], int]:
        return {key: token_count(out.target_text) for key, out in self.outputs.items()}


def load_dataset(manifest_path: str | Path) -> Dataset:
    """Load a dataset manifest and everything it references.

    The manifest is JSON: {"v": 1, "lang_pair": ..., "documents": <path>,
    "outputs": [<path>, ...], "annotations": {name: <path>, ...}}, with paths
    relative to the manifest file. Fails when any system misses any segment.
    """
    manifest_path = Path(manifest_path)
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("v") != SCHEMA_VERSION:
        raise DataFormatError(f"{manifest_path}: missing or unsupported schema version")
    base = manifest_path.parent

    documents = load_documents(base / manifest["documents"])
    outputs: dict[tuple[str, str], SystemOutput] = {}
    for rel in manifest.get("outputs", []):
        for out in load_outputs(base / rel):
            outputs[(out.system_id, out.seg_id)] = out

    seg_ids = [seg.seg_id for doc in documents for seg in doc.segments]
    systems = sorted({sys for sys, _ in outputs})
    gaps = [(sys, seg) for sys in systems for seg in seg_ids if (sys, seg) not in outputs]
    if gaps:
        raise CoverageError(gaps)

    dataset = Dataset(documents=documents, outputs=outputs,
                      lang_pair=manifest.get("lang_pair", ""))
    for name, rel in manifest.get("annotations", {}).items():
        dataset.annotation_sets[name] = load_annotations(base / rel, outputs=None)
    return dataset


def subsample_documents(
    documents: Sequence[Document], target_segments: int, seed: int
) -> list[Document]:
    """Whole-document subset with at least target_segments segments.

    Documents are shuffled by seed and taken greedily until the segment count
    reaches the target; documents are never split, so the result overshoots
    by less than the largest selected document. Original document order is
    preserved in the returned list.
    """
    total = sum(len(d) for d in documents)
    if target_segments > total:
        raise ValueError(f"target {target_segments} exceeds total segments {total}")
    order = list(range(len(documents)))
    random.Random(seed).shuffle(order)
    chosen: set[int] = set()
    count = 0
    for idx in order:
        if count >= target_segments:
            break
        chosen.add(idx)
        count += len(documents[idx])
    return [doc for i, doc in enumerate(documents) if i in chosen]


def intersect_segments(*annotation_sets: Sequence[SegmentAnnotation]) -> list[str]:
    """Segment ids present in every annotation set; analyses then restrict to it."""
    if len(annotation_sets) < 2:
        raise ValueError("need at least 2 annotation sets to intersect")
    shared: set[str] | None = None
    for annotations in annotation_sets:
        segs = {a.seg_id for a in annotations}
        shared = segs if shared is None else shared & segs
    if not shared:
        raise ValueError("empty segment intersection")
    return sorted(shared)
