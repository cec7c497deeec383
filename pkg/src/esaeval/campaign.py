"""Campaign orchestration: task construction, serving, intake, persistence.

A campaign splits (document, system) units into tasks of roughly batch_size
segments, documents never split across tasks, each task salted with at least
one attention-check pair (the original document plus a copy whose translation
of one segment is perturbed). Annotators are blind to system identity: the
served payloads carry shuffled labels, never system ids.

Persistence is an append-only event log plus an in-memory materialized view.
Every accepted submission is flushed and fsynced before the call returns, so
a crash leaves a prefix-consistent store; a trailing partial line is ignored
on reload. Resubmission replaces the live record and keeps the full revision
history; the live record's duration is the sum of the per-revision active
intervals, each capped at the break limit, and its started_at is derived so
that duration == submitted_at - started_at still holds.
"""

from __future__ import annotations

import json
import os
import random
import threading
import time
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

from .ingest import CoverageError
from .model import (
    Document,
    ErrorSpan,
    Protocol,
    SegmentAnnotation,
    Severity,
    SystemOutput,
    annotation_to_dict,
    annotation_from_dict,
    span_from_dict,
    validate_annotation,
)
from .qc import NotPerturbable, Perturbation, perturb
from .stats import BREAK_CAP_S

__all__ = [
    "RequiredSpan",
    "TutorialItem",
    "Unit",
    "Task",
    "Campaign",
    "CampaignStore",
    "SubmitRejected",
    "build_campaign",
    "build_campaign_from_config",
    "load_campaign_config",
    "campaign_from_manifest",
]

TIMING_CSV_HEADER = "annotator_id,system_id,seg_id,qc,started_at,submitted_at,duration_s"


class SubmitRejected(Exception):
    """Submission refused; carries a machine-readable code and violation list."""

    def __init__(self, code: str, violations: list[str] | None = None):
        self.code = code
        self.violations = violations or []
        super().__init__(f"{code}: {self.violations}")


@dataclass(frozen=True)
class RequiredSpan:
    start: int
    end: int
    severity: Severity
    slack: int = 0
    is_missing: bool = False

    def matched_by(self, spans: Sequence[ErrorSpan]) -> bool:
        for span in spans:
            if span.severity is not self.severity:
                continue
            if self.is_missing:
                if span.is_missing:
                    return True
            elif not span.is_missing and span.overlaps_range(
                self.start - self.slack, self.end + self.slack
            ):
                return True
        return False


@dataclass(frozen=True)
class TutorialItem:
    item_id: str
    source_text: str
    target_text: str
    required_spans: tuple[RequiredSpan, ...] = ()
    score_range: tuple[float, float] | None = None

    def check(self, spans: Sequence[ErrorSpan], score: float | None) -> list[str]:
        """Diagnostics for one answer; empty means the item passes.

        Extra spans beyond the required ones are allowed.
        """
        problems = []
        for i, req in enumerate(self.required_spans):
            if not req.matched_by(spans):
                problems.append(
                    f"required {req.severity.value} span [{req.start}, {req.end}) not marked"
                )
        if self.score_range is not None:
            lo, hi = self.score_range
            if score is None:
                problems.append("score required")
            elif not (lo <= score <= hi):
                problems.append(f"score {score} outside required interval [{lo}, {hi}]")
        return problems


@dataclass(frozen=True)
class Unit:
    """One (document, system) annotation unit inside a task."""

    unit_id: str
    doc_id: str
    system_id: str
    is_qc_copy: bool = False
    perturbed_seg_id: str | None = None


@dataclass(frozen=True)
class Task:
    task_id: str
    units: tuple[Unit, ...]
    segment_count: int


@dataclass
class Campaign:
    campaign_id: str
    protocol: Protocol
    documents: list[Document]
    outputs: dict[tuple[str, str], SystemOutput]
    tasks: list[Task]
    blind_labels: dict[str, str]
    perturbations: dict[str, Perturbation]  # unit_id -> perturbation
    tutorial: tuple[TutorialItem, ...] = ()
    config: dict = field(default_factory=dict)
    status: str = "open"

    # Campaign structure is immutable once built, so the lookups are cached.
    @cached_property
    def documents_by_id(self) -> dict[str, Document]:
        return {d.doc_id: d for d in self.documents}

    @cached_property
    def units_by_id(self) -> dict[str, Unit]:
        return {u.unit_id: u for t in self.tasks for u in t.units}

    def displayed_text(self, unit: Unit, seg_id: str) -> str:
        """What the annotator sees for one segment of one unit."""
        if unit.is_qc_copy and seg_id == unit.perturbed_seg_id:
            return self.perturbations[unit.unit_id].perturbed_text
        return self.outputs[(unit.system_id, seg_id)].target_text

    def shown_output(self, unit: Unit, seg_id: str) -> SystemOutput:
        text = self.displayed_text(unit, seg_id)
        return SystemOutput(system_id=unit.system_id, seg_id=seg_id, target_text=text)

    def regular_segment_total(self) -> int:
        docs = self.documents_by_id
        return sum(
            len(docs[u.doc_id]) for t in self.tasks for u in t.units if not u.is_qc_copy
        )

    # --- manifest round trip -------------------------------------------------

    def to_manifest(self) -> dict:
        return {
            "v": 1,
            "campaign_id": self.campaign_id,
            "protocol": self.protocol.value,
            "status": self.status,
            "config": self.config,
            "blind_labels": self.blind_labels,
            "documents": [
                {
                    "doc_id": d.doc_id,
                    "domain": d.domain_tag,
                    "segments": [{"seg_id": s.seg_id, "text": s.source_text} for s in d.segments],
                }
                for d in self.documents
            ],
            "outputs": [
                {"system_id": o.system_id, "seg_id": o.seg_id, "text": o.target_text}
                for o in sorted(self.outputs.values(), key=lambda o: (o.system_id, o.seg_id))
            ],
            "tasks": [
                {
                    "task_id": t.task_id,
                    "segment_count": t.segment_count,
                    "units": [
                        {
                            "unit_id": u.unit_id,
                            "doc_id": u.doc_id,
                            "system_id": u.system_id,
                            "qc": u.is_qc_copy,
                            "perturbed_seg_id": u.perturbed_seg_id,
                        }
                        for u in t.units
                    ],
                }
                for t in self.tasks
            ],
            "perturbations": {
                unit_id: p.to_dict() for unit_id, p in sorted(self.perturbations.items())
            },
            "tutorial": [
                {
                    "item_id": it.item_id,
                    "source": it.source_text,
                    "target": it.target_text,
                    "required_spans": [
                        {
                            "start": r.start,
                            "end": r.end,
                            "severity": r.severity.value,
                            "slack": r.slack,
                            "missing": r.is_missing,
                        }
                        for r in it.required_spans
                    ],
                    "score_range": list(it.score_range) if it.score_range else None,
                }
                for it in self.tutorial
            ],
        }

    def manifest_json(self) -> str:
        return json.dumps(self.to_manifest(), ensure_ascii=False, sort_keys=True, indent=1)


def campaign_from_manifest(manifest: dict, campaign_id: str | None = None) -> Campaign:
    """Rebuild a campaign from its manifest, identical up to campaign_id.

    This is how a repeat run (same units in the same order, e.g. for
    intra-annotator agreement two months later) is produced.
    """
    from .model import SourceSegment

    documents = [
        Document(
            doc_id=d["doc_id"],
            domain_tag=d.get("domain", ""),
            segments=tuple(
                SourceSegment(seg_id=s["seg_id"], source_text=s["text"]) for s in d["segments"]
            ),
        )
        for d in manifest["documents"]
    ]
    outputs = {
        (o["system_id"], o["seg_id"]): SystemOutput(
            system_id=o["system_id"], seg_id=o["seg_id"], target_text=o["text"]
        )
        for o in manifest["outputs"]
    }
    tasks = [
        Task(
            task_id=t["task_id"],
            segment_count=t["segment_count"],
            units=tuple(
                Unit(
                    unit_id=u["unit_id"],
                    doc_id=u["doc_id"],
                    system_id=u["system_id"],
                    is_qc_copy=u["qc"],
                    perturbed_seg_id=u.get("perturbed_seg_id"),
                )
                for u in t["units"]
            ),
        )
        for t in manifest["tasks"]
    ]
    tutorial = tuple(
        TutorialItem(
            item_id=it["item_id"],
            source_text=it["source"],
            target_text=it["target"],
            required_spans=tuple(
                RequiredSpan(
                    start=r["start"],
                    end=r["end"],
                    severity=Severity(r["severity"]),
                    slack=r.get("slack", 0),
                    is_missing=r.get("missing", False),
                )
                for r in it["required_spans"]
            ),
            score_range=tuple(it["score_range"]) if it.get("score_range") else None,
        )
        for it in manifest["tutorial"]
    )
    return Campaign(
        campaign_id=campaign_id or manifest["campaign_id"],
        protocol=Protocol(manifest["protocol"]),
        documents=documents,
        outputs=outputs,
        tasks=tasks,
        blind_labels=dict(manifest["blind_labels"]),
        perturbations={
            unit_id: Perturbation.from_dict(p)
            for unit_id, p in manifest["perturbations"].items()
        },
        tutorial=tutorial,
        config=dict(manifest["config"]),
        status=manifest.get("status", "open"),
    )


def _default_vocabulary(outputs: Iterable[SystemOutput]) -> list[str]:
    """In-language replacement words: the campaign's own target-side tokens."""
    return sorted({tok for o in outputs for tok in o.target_text.split()})


def load_campaign_config(path: str | Path) -> dict:
    """Campaign parameters from a JSON config file.

    Schema (all keys optional except protocol):
      {"protocol": "ESA"|"MQM"|"DA", "qc_rate": float, "batch_size": int,
       "seed": int, "annotators_per_task": int, "campaign_id": str,
       "alpha": float, "weights": {"minor": float, "major": float},
       "tutorial": [{"item_id", "source", "target",
                     "required_spans": [{"start","end","severity","slack"?,"missing"?}],
                     "score_range": [lo, hi] | null}]}

    alpha and weights are analysis-side parameters carried along for the
    report commands; build_campaign ignores them.
    """
    with open(path, encoding="utf-8") as fh:
        config = json.load(fh)
    if "protocol" not in config:
        raise ValueError(f"{path}: config must set a protocol")
    Protocol(config["protocol"])  # validate early
    return config


def build_campaign_from_config(
    documents: Sequence[Document],
    system_outputs: Sequence[SystemOutput],
    config: dict | str | Path,
) -> Campaign:
    """build_campaign with parameters taken from a config dict or file."""
    if not isinstance(config, dict):
        config = load_campaign_config(config)
    tutorial = tuple(
        TutorialItem(
            item_id=item["item_id"],
            source_text=item["source"],
            target_text=item["target"],
            required_spans=tuple(
                RequiredSpan(
                    start=r["start"],
                    end=r["end"],
                    severity=Severity(r["severity"]),
                    slack=r.get("slack", 0),
                    is_missing=r.get("missing", False),
                )
                for r in item.get("required_spans", [])
            ),
            score_range=tuple(item["score_range"]) if item.get("score_range") else None,
        )
        for item in config.get("tutorial", [])
    )
    return build_campaign(
        documents,
        system_outputs,
        Protocol(config["protocol"]),
        qc_rate=config.get("qc_rate", 1.0),
        seed=config.get("seed", 0),
        batch_size=config.get("batch_size", 100),
        annotators_per_task=config.get("annotators_per_task", 1),
        tutorial=tutorial,
        vocabulary=config.get("vocabulary"),
        campaign_id=config.get("campaign_id"),
    )


def build_campaign(
    documents: Sequence[Document],
    system_outputs: Sequence[SystemOutput],
    protocol: Protocol,
    qc_rate: float = 1.0,
    seed: int = 0,
    batch_size: int = 100,
    annotators_per_task: int = 1,
    tutorial: Sequence[TutorialItem] = (),
    vocabulary: Sequence[str] | None = None,
    campaign_id: str | None = None,
) -> Campaign:
    """Deterministically construct a campaign from a dataset.

    Every (system, document) pair lands in exactly one task, documents whole;
    tasks aim at batch_size segments before check items are added. qc_rate is
    the expected number of attention-check pairs per task (0 disables checks,
    which only makes sense for analysis fixtures). Identical inputs and seed
    give a byte-identical manifest.
    """
    if not documents:
        raise ValueError("no documents")
    outputs = {(o.system_id, o.seg_id): o for o in system_outputs}
    systems = sorted({o.system_id for o in system_outputs})
    if not systems:
        raise ValueError("no system outputs")
    seg_ids = [seg.seg_id for doc in documents for seg in doc.segments]
    gaps = [(sys, seg) for sys in systems for seg in seg_ids if (sys, seg) not in outputs]
    if gaps:
        raise CoverageError(gaps)

    rng = random.Random(seed)
    labels = [f"S{i + 1:02d}" for i in range(len(systems))]
    rng.shuffle(labels)
    blind_labels = dict(zip(systems, labels))

    pairs = [(doc, sys) for sys in systems for doc in documents]
    rng.shuffle(pairs)

    # Pick the task count whose per-task size is closest to batch_size, then
    # fill to even boundaries; this avoids an undersized tail task.
    total = sum(len(doc) for doc, _ in pairs)
    lo_n = max(1, total // batch_size)
    n_tasks = min((lo_n, lo_n + 1), key=lambda n: abs(total / n - batch_size))
    boundary = total / n_tasks
    groups: list[list[tuple[Document, str]]] = [[] for _ in range(n_tasks)]
    g, cum = 0, 0
    for doc, sys in pairs:
        if g < n_tasks - 1 and cum >= boundary * (g + 1):
            g += 1
        groups[g].append((doc, sys))
        cum += len(doc)

    vocab = list(vocabulary) if vocabulary is not None else _default_vocabulary(system_outputs)

    tasks: list[Task] = []
    perturbations: dict[str, Perturbation] = {}
    unit_counter = 0

    def next_unit_id() -> str:
        nonlocal unit_counter
        unit_counter += 1
        return f"u{unit_counter:04d}"

    for t_index, group in enumerate(groups):
        units = [
            Unit(unit_id=next_unit_id(), doc_id=doc.doc_id, system_id=sys)
            for doc, sys in group
        ]
        doc_sizes = {doc.doc_id: len(doc) for doc, _ in group}
        n_checks = int(qc_rate) + (1 if rng.random() < qc_rate - int(qc_rate) else 0)
        for _ in range(n_checks):
            qc_unit = _make_check(group, outputs, vocab, rng, next_unit_id, perturbations)
            if qc_unit is None:
                continue
            origin_idx = next(
                i for i, u in enumerate(units)
                if u.doc_id == qc_unit.doc_id and u.system_id == qc_unit.system_id
                and not u.is_qc_copy
            )
            units.insert(rng.randint(origin_idx + 1, len(units)), qc_unit)
            doc_sizes[qc_unit.doc_id] = len(next(d for d, _ in group if d.doc_id == qc_unit.doc_id))
        segment_count = sum(doc_sizes[u.doc_id] for u in units)
        tasks.append(Task(task_id=f"t{t_index + 1:03d}", units=tuple(units),
                          segment_count=segment_count))

    return Campaign(
        campaign_id=campaign_id or f"campaign-{seed}",
        protocol=protocol,
        documents=list(documents),
        outputs=outputs,
        tasks=tasks,
        blind_labels=blind_labels,
        perturbations=perturbations,
        tutorial=tuple(tutorial),
        config={
            "batch_size": batch_size,
            "qc_rate": qc_rate,
            "seed": seed,
            "annotators_per_task": annotators_per_task,
        },
    )


def _make_check(
    group: list[tuple[Document, str]],
    outputs: dict[tuple[str, str], SystemOutput],
    vocab: list[str],
    rng: random.Random,
    next_unit_id,
    perturbations: dict[str, Perturbation],
) -> Unit | None:
    """Pick a perturbable (doc, system, segment) in the task and build the copy."""
    candidates = [
        (doc, sys, seg.seg_id)
        for doc, sys in group
        for seg in doc.segments
        if len(outputs[(sys, seg.seg_id)].target_text.split()) >= 3
    ]
    if not candidates:
        return None
    doc, sys, seg_id = candidates[rng.randrange(len(candidates))]
    p_seed = rng.randrange(2**31)
    try:
        perturbation = perturb(outputs[(sys, seg_id)], p_seed, vocab)
    except NotPerturbable:
        return None
    unit = Unit(
        unit_id=next_unit_id(),
        doc_id=doc.doc_id,
        system_id=sys,
        is_qc_copy=True,
        perturbed_seg_id=seg_id,
    )
    perturbations[unit.unit_id] = perturbation
    return unit


# --- store -------------------------------------------------------------------


@dataclass
class _Submission:
    annotation: SegmentAnnotation
    unit_id: str
    revisions: list[dict] = field(default_factory=list)


class CampaignStore:
    """Materialized campaign state backed by an append-only event log.

    One directory per campaign under the store root: manifest.json plus
    events.jsonl. Writes are serialized by a lock and fsynced; reloading
    replays the log and drops a trailing partial line (crash tolerance).
    """

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root or os.environ.get("ESAEVAL_STORE", "./esaeval-store"))
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._campaigns: dict[str, Campaign] = {}
        self._logs: dict[str, object] = {}
        # per campaign state
        self._assignments: dict[str, dict[str, list[str]]] = {}  # cid -> task -> annotators
        self._served: dict[str, dict[str, list[str]]] = {}  # cid -> annotator -> unit ids
        self._tutorial_passed: dict[str, dict[str, set[str]]] = {}  # cid -> annotator -> items
    # cid -> (annotator, unit, seg) -> submission
        self._submissions: dict[str, dict[tuple[str, str, str], _Submission]] = {}
        for manifest_path in sorted(self.root.glob("*/manifest.json")):
            self._load_campaign_dir(manifest_path.parent)

    # --- persistence ----------------------------------------------------------

    def _dir(self, campaign_id: str) -> Path:
        return self.root / campaign_id

    def _load_campaign_dir(self, path: Path) -> None:
        with open(path / "manifest.json", encoding="utf-8") as fh:
            campaign = campaign_from_manifest(json.load(fh))
        self._init_state(campaign)
        log_path = path / "events.jsonl"
        if log_path.exists():
            with open(log_path, encoding="utf-8") as fh:
                content = fh.read()
            for line in content.split("\n"):
                if not line:
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError:
                    break  # trailing partial write from a crash; ignore the rest
                self._apply(campaign.campaign_id, event)

    def _init_state(self, campaign: Campaign) -> None:
        cid = campaign.campaign_id
        self._campaigns[cid] = campaign
        self._assignments[cid] = {t.task_id: [] for t in campaign.tasks}
        self._served[cid] = {}
        self._tutorial_passed[cid] = {}
        self._submissions[cid] = {}

    def _append(self, campaign_id: str, event: dict) -> None:
        log = self._logs.get(campaign_id)
        if log is None:
            log = open(self._dir(campaign_id) / "events.jsonl", "a", encoding="utf-8")
            self._logs[campaign_id] = log
        log.write(json.dumps(event, ensure_ascii=False, sort_keys=True) + "\n")
        log.flush()
        os.fsync(log.fileno())

    def close(self) -> None:
        for log in self._logs.values():
            log.close()
        self._logs.clear()

    # --- campaign admin --------------------------------------------------------

    def create(self, campaign: Campaign) -> None:
        with self._lock:
            if campaign.campaign_id in self._campaigns:
                raise ValueError(f"campaign {campaign.campaign_id!r} already exists")
            cdir = self._dir(campaign.campaign_id)
            cdir.mkdir(parents=True, exist_ok=True)
            tmp = cdir / "manifest.json.tmp"
            tmp.write_text(campaign.manifest_json(), encoding="utf-8")
            tmp.replace(cdir / "manifest.json")
            self._init_state(campaign)

    def campaign(self, campaign_id: str) -> Campaign:
        try:
            return self._campaigns[campaign_id]
        except KeyError:
            raise KeyError(f"unknown campaign {campaign_id!r}") from None

    def campaign_ids(self) -> list[str]:
        return sorted(self._campaigns)

    # --- event application ------------------------------------------------------

    def _apply(self, cid: str, event: dict) -> None:
        kind = event["type"]
        if kind == "assign":
            self._assignments[cid][event["task_id"]].append(event["annotator_id"])
        elif kind == "serve":
            self._served[cid].setdefault(event["annotator_id"], []).append(event["unit_id"])
        elif kind == "tutorial":
            self._tutorial_passed[cid].setdefault(event["annotator_id"], set()).update(
                event["passed_items"]
            )
        elif kind == "submit":
            a = annotation_from_dict(event["annotation"])
            key = (a.annotator_id, event["unit_id"], a.seg_id)
            sub = self._submissions[cid].get(key)
            if sub is None:
                sub = _Submission(annotation=a, unit_id=event["unit_id"])
                self._submissions[cid][key] = sub
            sub.revisions.append(event["annotation"])
            sub.annotation = self._merge_revisions(sub)
        else:  # pragma: no cover - future event kinds
            raise ValueError(f"unknown event type {kind!r}")

    @staticmethod
    def _merge_revisions(sub: _Submission) -> SegmentAnnotation:
        """Live record after revisions: last content, accumulated active time.

        Each revision's interval is capped at the break limit before summing;
        started_at is back-derived so duration == submitted - started keeps
        holding on the merged record. Single submissions stay untouched (the
        break-cap exclusion in time statistics needs to see raw durations).
        """
        last = annotation_from_dict(sub.revisions[-1])
        if len(sub.revisions) == 1:
            return last
        total = sum(min(r["duration_s"], BREAK_CAP_S) for r in sub.revisions)
        return SegmentAnnotation(
            annotator_id=last.annotator_id,
            system_id=last.system_id,
            seg_id=last.seg_id,
            protocol=last.protocol,
            spans=last.spans,
            direct_score=last.direct_score,
            started_at=last.submitted_at - total,
            submitted_at=last.submitted_at,
            duration_s=total,
            is_qc_item=last.is_qc_item,
        )

    # --- serving ----------------------------------------------------------------

    def _tutorial_done(self, campaign: Campaign, annotator_id: str) -> bool:
        if not campaign.tutorial:
            return True
        passed = self._tutorial_passed[campaign.campaign_id].get(annotator_id, set())
        return all(item.item_id in passed for item in campaign.tutorial)

    def _assigned_tasks(self, campaign: Campaign, annotator_id: str) -> list[Task]:
        assignments = self._assignments[campaign.campaign_id]
        return [t for t in campaign.tasks if annotator_id in assignments[t.task_id]]

    def _ensure_assignment(self, campaign: Campaign, annotator_id: str) -> list[Task]:
        tasks = self._assigned_tasks(campaign, annotator_id)
        if self._open_units(campaign, annotator_id, tasks):
            return tasks
        capacity = int(campaign.config.get("annotators_per_task", 1))
        assignments = self._assignments[campaign.campaign_id]
        for task in campaign.tasks:
            occupants = assignments[task.task_id]
            if annotator_id not in occupants and len(occupants) < capacity:
                self._append(campaign.campaign_id, {
                    "type": "assign", "annotator_id": annotator_id, "task_id": task.task_id,
                })
                self._apply(campaign.campaign_id, {
                    "type": "assign", "annotator_id": annotator_id, "task_id": task.task_id,
                })
                return self._assigned_tasks(campaign, annotator_id)
        return tasks

    def _unit_complete(self, campaign: Campaign, annotator_id: str, unit: Unit) -> bool:
        doc = campaign.documents_by_id[unit.doc_id]
        subs = self._submissions[campaign.campaign_id]
        return all(
            (annotator_id, unit.unit_id, seg.seg_id) in subs for seg in doc.segments
        )

    def _open_units(self, campaign: Campaign, annotator_id: str, tasks: list[Task]) -> list[Unit]:
        return [
            u
            for t in tasks
            for u in t.units
            if not self._unit_complete(campaign, annotator_id, u)
        ]

    def next_item(self, campaign_id: str, annotator_id: str) -> dict:
        """The annotator's next work item: tutorial first, then task units.

        Serving a unit records the serve time; the payload never exposes
        system identity or perturbation status.
        """
        campaign = self.campaign(campaign_id)
        with self._lock:
            if not self._tutorial_done(campaign, annotator_id):
                passed = self._tutorial_passed[campaign_id].get(annotator_id, set())
                item = next(it for it in campaign.tutorial if it.item_id not in passed)
                return {
                    "kind": "tutorial",
                    "item": {
                        "item_id": item.item_id,
                        "source": item.source_text,
                        "target": item.target_text,
                        "protocol": campaign.protocol.value,
                    },
                }
            tasks = self._ensure_assignment(campaign, annotator_id)
            if not tasks:
                raise LookupError(f"no task available for annotator {annotator_id!r}")
            open_units = self._open_units(campaign, annotator_id, tasks)
            if not open_units:
                return {"kind": "done"}
            unit = open_units[0]
            if unit.unit_id not in self._served[campaign_id].get(annotator_id, []):
                event = {"type": "serve", "annotator_id": annotator_id,
                         "unit_id": unit.unit_id, "at": time.time()}
                self._append(campaign_id, event)
                self._apply(campaign_id, event)
            doc = campaign.documents_by_id[unit.doc_id]
            return {
                "kind": "unit",
                "unit_id": unit.unit_id,
                "doc_id": unit.doc_id,
                "blind_system": campaign.blind_labels[unit.system_id],
                "protocol": campaign.protocol.value,
                "segments": [
                    {
                        "seg_id": seg.seg_id,
                        "source": seg.source_text,
                        "target": campaign.displayed_text(unit, seg.seg_id),
                    }
                    for seg in doc.segments
                ],
            }

    # --- intake -----------------------------------------------------------------

    def submit(self, campaign_id: str, annotator_id: str, payload: dict) -> dict:
        """Validate and persist one segment annotation.

        The payload references the served unit (unit_id, seg_id, spans, score,
        timestamps); the real system id is resolved server side. Revisions of
        previously submitted segments are accepted and logged.
        """
        campaign = self.campaign(campaign_id)
        with self._lock:
            if not self._tutorial_done(campaign, annotator_id):
                raise SubmitRejected("tutorial_required")
            unit = campaign.units_by_id.get(payload.get("unit_id"))
            if unit is None:
                raise SubmitRejected("unknown_unit")
            tasks = self._assigned_tasks(campaign, annotator_id)
            if all(unit not in t.units for t in tasks):
                raise SubmitRejected("out_of_task")
            served = self._served[campaign_id].get(annotator_id, [])
            if unit.unit_id not in served:
                raise SubmitRejected("not_served")
            doc = campaign.documents_by_id[unit.doc_id]
            seg_id = payload.get("seg_id")
            if seg_id not in doc.seg_ids:
                raise SubmitRejected("segment_not_in_unit")

            started = float(payload.get("started_at", 0.0))
            submitted = float(payload.get("submitted_at", started))
            try:
                spans = tuple(span_from_dict(s) for s in payload.get("spans", []))
            except (KeyError, ValueError) as exc:
                raise SubmitRejected("malformed_spans", [str(exc)]) from exc
            annotation = SegmentAnnotation(
                annotator_id=annotator_id,
                system_id=unit.system_id,
                seg_id=seg_id,
                protocol=campaign.protocol,
                spans=spans,
                direct_score=payload.get("score"),
                started_at=started,
                submitted_at=submitted,
                duration_s=submitted - started,
                is_qc_item=unit.is_qc_copy,
            )
            violations = validate_annotation(annotation, campaign.shown_output(unit, seg_id))
            if violations:
                raise SubmitRejected("invalid_annotation", violations)

            event = {
                "type": "submit",
                "unit_id": unit.unit_id,
                "annotation": annotation_to_dict(annotation),
            }
            self._append(campaign_id, event)
            self._apply(campaign_id, event)
            key = (annotator_id, unit.unit_id, seg_id)
            return {"status": "accepted", "revision": len(self._submissions[campaign_id][key].revisions)}

    def check_tutorial(self, campaign_id: str, annotator_id: str, answers: Sequence[dict]) -> dict:
        """Evaluate tutorial answers; passing every item unlocks the task.

        Answers: [{"item_id", "spans": [...], "score"}]. Items passed in
        earlier calls stay passed.
        """
        campaign = self.campaign(campaign_id)
        with self._lock:
            items = {it.item_id: it for it in campaign.tutorial}
            diagnostics: dict[str, list[str]] = {}
            newly_passed: list[str] = []
            for answer in answers:
                item = items.get(answer.get("item_id"))
                if item is None:
                    diagnostics[str(answer.get("item_id"))] = ["unknown tutorial item"]
                    continue
                try:
                    spans = [span_from_dict(s) for s in answer.get("spans", [])]
                except (KeyError, ValueError) as exc:
                    diagnostics[item.item_id] = [f"malformed spans: {exc}"]
                    continue
                problems = item.check(spans, answer.get("score"))
                if problems:
                    diagnostics[item.item_id] = problems
                else:
                    newly_passed.append(item.item_id)
            if newly_passed:
                event = {
                    "type": "tutorial",
                    "annotator_id": annotator_id,
                    "passed_items": sorted(newly_passed),
                }
                self._append(campaign_id, event)
                self._apply(campaign_id, event)
            passed_all = self._tutorial_done(campaign, annotator_id)
            return {"passed": passed_all, "diagnostics": diagnostics}

    # --- export -----------------------------------------------------------------

    def live_annotations(self, campaign_id: str) -> list[SegmentAnnotation]:
        subs = self._submissions[self.campaign(campaign_id).campaign_id]
        return [
            sub.annotation
            for _, sub in sorted(subs.items(), key=lambda kv: kv[0])
        ]

    def revision_log(self, campaign_id: str) -> dict[tuple[str, str, str], list[dict]]:
        return {k: list(v.revisions) for k, v in self._submissions[campaign_id].items()}

    def export(self, campaign_id: str) -> dict[str, str]:
        """Annotations JSONL, perturbation manifest JSONL and timing CSV.

        Partial exports are valid at any time; an empty campaign yields empty
        files with headers. The output round-trips through ingest.
        """
        campaign = self.campaign(campaign_id)
        annotations = self.live_annotations(campaign_id)
        ann_lines = [
            json.dumps(annotation_to_dict(a), ensure_ascii=False, sort_keys=True)
            for a in annotations
        ]
        pert_lines = [
            json.dumps(p.to_dict(), ensure_ascii=False, sort_keys=True)
            for _, p in sorted(campaign.perturbations.items())
        ]
        timing_rows = [TIMING_CSV_HEADER] + [
            f"{a.annotator_id},{a.system_id},{a.seg_id},{int(a.is_qc_item)},"
            f"{a.started_at!r},{a.submitted_at!r},{a.duration_s!r}"
            for a in annotations
        ]
        return {
            "annotations": "".join(line + "\n" for line in ann_lines),
            "perturbations": "".join(line + "\n" for line in pert_lines),
            "timing_csv": "".join(row + "\n" for row in timing_rows),
        }
