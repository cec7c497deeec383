import json

import pytest

from esaeval.campaign import (
    CampaignStore,
    RequiredSpan,
    SubmitRejected,
    TutorialItem,
    build_campaign,
    build_campaign_from_config,
    campaign_from_manifest,
)
from esaeval.ingest import CoverageError, load_annotations
from esaeval.model import (
    Document,
    Protocol,
    Severity,
    SourceSegment,
    SystemOutput,
)


VOCAB = ["amber", "boreal", "cedar", "dune", "ember", "frost"]


def corpus(n_docs=4, segs_per_doc=3, systems=("sysA", "sysB")):
    docs = [
        Document(
            doc_id=f"d{i}",
            segments=tuple(
                SourceSegment(f"d{i}:{j}", f"Source sentence number {i} {j} here.")
                for j in range(segs_per_doc)
            ),
        )
        for i in range(n_docs)
    ]
    outs = [
        SystemOutput(system_id=s, seg_id=seg.seg_id,
                     target_text=f"Translated text {seg.seg_id} variant {k} fine.")
        for k, s in enumerate(systems) for d in docs for seg in d.segments
    ]
    return docs, outs


TUTORIAL = (
    TutorialItem(
        item_id="tut1",
        source_text="Der Hund lief heute nach Hause.",
        target_text="The dog ran home yesterday.",
        required_spans=(RequiredSpan(start=16, end=25, severity=Severity.MAJOR, slack=2),),
        score_range=(30.0, 70.0),
    ),
)


def build_store(tmp_path, tutorial=(), qc_rate=1.0, annotators_per_task=1, protocol=Protocol.ESA,
                n_docs=4, systems=("sysA", "sysB")):
    docs, outs = corpus(n_docs=n_docs, systems=systems)
    campaign = build_campaign(docs, outs, protocol, qc_rate=qc_rate, seed=7,
                              annotators_per_task=annotators_per_task,
                              tutorial=tutorial, vocabulary=VOCAB, campaign_id="camp1")
    store = CampaignStore(tmp_path / "store")
    store.create(campaign)
    return store, campaign


def tutorial_answer(score=50.0):
    return [{"item_id": "tut1",
             "spans": [{"start": 14, "end": 26, "severity": "major", "category": None,
                        "missing": False}],
             "score": score}]


def submit_all(store, annotator, score_for=lambda unit, seg: 80.0, spans_for=None, t0=1000.0):
    """Drive an annotator through their whole assignment; returns #submitted."""
    clock = t0
    n = 0
    while True:
        item = store.next_item("camp1", annotator)
        if item["kind"] == "done":
            return n
        assert item["kind"] == "unit"
        for seg in item["segments"]:
            spans = spans_for(item, seg) if spans_for else []
            store.submit("camp1", annotator, {
                "unit_id": item["unit_id"],
                "seg_id": seg["seg_id"],
                "spans": spans,
                "score": score_for(item, seg),
                "started_at": clock,
                "submitted_at": clock + 30.0,
            })
            clock += 40.0
            n += 1


class TestBuildCampaign:
    def test_wmt_scale_totals(self):
        # 74 documents totaling 207 segments, 13 systems -> 2691 annotation units
        sizes = [3] * 59 + [2] * 15
        assert len(sizes) == 74 and sum(sizes) == 207
        docs = [
            Document(doc_id=f"d{i:03d}", segments=tuple(
                SourceSegment(f"d{i:03d}:{j}", f"Sentence {i} {j} with several words inside.")
                for j in range(size)))
            for i, size in enumerate(sizes)
        ]
        outs = [
            SystemOutput(system_id=f"sys{k:02d}", seg_id=seg.seg_id,
                         target_text=f"Output {k} for {seg.seg_id} words here too.")
            for k in range(13) for d in docs for seg in d.segments
        ]
        campaign = build_campaign(docs, outs, Protocol.ESA, qc_rate=1.0, seed=1,
                                  vocabulary=VOCAB)
        assert campaign.regular_segment_total() == 2691
        docs_by_id = campaign.documents_by_id
        for task in campaign.tasks:
            regular = [u for u in task.units if not u.is_qc_copy]
            qc = [u for u in task.units if u.is_qc_copy]
            assert len(qc) >= 1  # at least one attention-check pair
            for u in qc:  # original partner lives in the same task
                assert any(r.doc_id == u.doc_id and r.system_id == u.system_id
                           for r in regular)
            total = sum(len(docs_by_id[u.doc_id]) for u in task.units)
            assert 80 <= total <= 120  # within 20% of the 100-segment batch
        # every (system, document) pair in exactly one task
        seen = {}
        for task in campaign.tasks:
            for u in task.units:
                if u.is_qc_copy:
                    continue
                key = (u.system_id, u.doc_id)
                assert key not in seen
                seen[key] = task.task_id
        assert len(seen) == 13 * 74

    def test_single_small_document(self):
        docs = [Document(doc_id="d0", segments=tuple(
            SourceSegment(f"d0:{j}", f"Sentence {j} here.") for j in range(5)))]
        outs = [SystemOutput("sysA", f"d0:{j}", f"Text {j} from system A.") for j in range(5)]
        campaign = build_campaign(docs, outs, Protocol.ESA, qc_rate=0.0, seed=0)
        assert len(campaign.tasks) == 1
        assert campaign.tasks[0].segment_count == 5
        assert len(campaign.tasks[0].units) == 1

    def test_deterministic_manifest(self):
        docs, outs = corpus()
        m1 = build_campaign(docs, outs, Protocol.ESA, seed=5, vocabulary=VOCAB).manifest_json()
        m2 = build_campaign(docs, outs, Protocol.ESA, seed=5, vocabulary=VOCAB).manifest_json()
        assert m1 == m2
        m3 = build_campaign(docs, outs, Protocol.ESA, seed=6, vocabulary=VOCAB).manifest_json()
        assert m1 != m3

    def test_coverage_gap_listed(self):
        docs, outs = corpus()
        with pytest.raises(CoverageError) as exc:
            build_campaign(docs, outs[:-1], Protocol.ESA, seed=0)
        assert ("sysB", "d3:2") in exc.value.gaps

    def test_blind_labels_are_a_bijection(self):
        docs, outs = corpus(systems=("sysA", "sysB", "sysC"))
        campaign = build_campaign(docs, outs, Protocol.ESA, seed=2, vocabulary=VOCAB)
        assert set(campaign.blind_labels) == {"sysA", "sysB", "sysC"}
        assert len(set(campaign.blind_labels.values())) == 3

    def test_repeat_campaign_identical_up_to_id(self):
        docs, outs = corpus()
        original = build_campaign(docs, outs, Protocol.ESA, seed=9, vocabulary=VOCAB,
                                  tutorial=TUTORIAL, campaign_id="first-run")
        repeat = campaign_from_manifest(original.to_manifest(), campaign_id="second-run")
        m1 = json.loads(original.manifest_json())
        m2 = json.loads(repeat.manifest_json())
        assert m2["campaign_id"] == "second-run"
        m1.pop("campaign_id"), m2.pop("campaign_id")
        assert m1 == m2

    def test_build_from_config_file(self, tmp_path):
        docs, outs = corpus()
        config = {
            "protocol": "ESA", "qc_rate": 1.0, "batch_size": 50, "seed": 4,
            "annotators_per_task": 2, "campaign_id": "cfg-run",
            "alpha": 0.05, "weights": {"minor": -1.0, "major": -5.0},
            "vocabulary": VOCAB,
            "tutorial": [{
                "item_id": "tut1",
                "source": "Der Hund lief heute nach Hause.",
                "target": "The dog ran home yesterday.",
                "required_spans": [{"start": 16, "end": 25, "severity": "major", "slack": 2}],
                "score_range": [30.0, 70.0],
            }],
        }
        path = tmp_path / "campaign.json"
        path.write_text(json.dumps(config), encoding="utf-8")
        campaign = build_campaign_from_config(docs, outs, path)
        assert campaign.campaign_id == "cfg-run"
        assert campaign.config["batch_size"] == 50
        assert campaign.config["annotators_per_task"] == 2
        assert campaign.tutorial == TUTORIAL
        same = build_campaign(docs, outs, Protocol.ESA, qc_rate=1.0, seed=4, batch_size=50,
                              annotators_per_task=2, tutorial=TUTORIAL, vocabulary=VOCAB,
                              campaign_id="cfg-run")
        assert campaign.manifest_json() == same.manifest_json()


class TestServingFlow:
    def test_tutorial_served_first_and_gates_submissions(self, tmp_path):
        store, campaign = build_store(tmp_path, tutorial=TUTORIAL)
        item = store.next_item("camp1", "ann1")
        assert item["kind"] == "tutorial"
        assert item["item"]["item_id"] == "tut1"
        with pytest.raises(SubmitRejected) as exc:
            store.submit("camp1", "ann1", {"unit_id": "u0001", "seg_id": "d0:0",
                                           "spans": [], "score": 50.0})
        assert exc.value.code == "tutorial_required"

    def test_tutorial_pass_fail_diagnostics(self, tmp_path):
        store, _ = build_store(tmp_path, tutorial=TUTORIAL)
        # correct spans but score outside the interval -> fail with diagnostic
        result = store.check_tutorial("camp1", "ann1", tutorial_answer(score=95.0))
        assert not result["passed"]
        assert any("score" in d for d in result["diagnostics"]["tut1"])
        # wrong severity -> span diagnostic
        bad = [{"item_id": "tut1", "spans": [{"start": 16, "end": 25, "severity": "minor",
                                              "category": None, "missing": False}],
                "score": 50.0}]
        result = store.check_tutorial("camp1", "ann1", bad)
        assert not result["passed"]
        # exact expected answer plus an extra unexpected minor span -> pass
        answer = tutorial_answer()
        answer[0]["spans"].append({"start": 0, "end": 3, "severity": "minor",
                                   "category": None, "missing": False})
        result = store.check_tutorial("camp1", "ann1", answer)
        assert result["passed"]
        assert store.next_item("camp1", "ann1")["kind"] == "unit"

    def test_unit_payload_is_blind(self, tmp_path):
        store, campaign = build_store(tmp_path)
        item = store.next_item("camp1", "ann1")
        assert item["kind"] == "unit"
        payload = json.dumps(item)
        assert "sysA" not in payload and "sysB" not in payload
        assert item["blind_system"] in campaign.blind_labels.values()
        assert "perturb" not in payload and "qc" not in payload

    def test_submit_accept_and_export(self, tmp_path):
        store, _ = build_store(tmp_path, qc_rate=0.0)
        item = store.next_item("camp1", "ann1")
        seg = item["segments"][0]
        result = store.submit("camp1", "ann1", {
            "unit_id": item["unit_id"], "seg_id": seg["seg_id"],
            "spans": [{"start": 0, "end": 4, "severity": "minor", "category": None,
                       "missing": False}],
            "score": 77.0, "started_at": 100.0, "submitted_at": 131.0,
        })
        assert result == {"status": "accepted", "revision": 1}
        exported = store.export("camp1")
        anns = [json.loads(line) for line in exported["annotations"].splitlines()]
        assert len(anns) == 1
        assert anns[0]["score"] == 77.0
        assert anns[0]["system_id"] in ("sysA", "sysB")

    def test_invalid_submission_returns_violations(self, tmp_path):
        store, _ = build_store(tmp_path)
        item = store.next_item("camp1", "ann1")
        with pytest.raises(SubmitRejected) as exc:
            store.submit("camp1", "ann1", {
                "unit_id": item["unit_id"], "seg_id": item["segments"][0]["seg_id"],
                "spans": [], "score": 120.0, "started_at": 0.0, "submitted_at": 1.0,
            })
        assert exc.value.code == "invalid_annotation"
        assert any("outside [0, 100]" in v for v in exc.value.violations)

    def test_mqm_submission_missing_category_rejected(self, tmp_path):
        store, _ = build_store(tmp_path, protocol=Protocol.MQM)
        item = store.next_item("camp1", "ann1")
        with pytest.raises(SubmitRejected) as exc:
            store.submit("camp1", "ann1", {
                "unit_id": item["unit_id"], "seg_id": item["segments"][0]["seg_id"],
                "spans": [{"start": 0, "end": 4, "severity": "major", "category": None,
                           "missing": False}],
                "score": None, "started_at": 0.0, "submitted_at": 5.0,
            })
        assert any("missing category" in v for v in exc.value.violations)

    def test_out_of_task_submission_rejected(self, tmp_path):
        store, campaign = build_store(tmp_path, annotators_per_task=1)
        assert len(campaign.tasks) >= 1
        store.next_item("camp1", "ann1")
        with pytest.raises(SubmitRejected) as exc:
            store.submit("camp1", "ann1", {"unit_id": "no-such-unit", "seg_id": "d0:0",
                                           "spans": [], "score": 50.0})
        assert exc.value.code == "unknown_unit"

    def test_unserved_unit_rejected(self, tmp_path):
        store, campaign = build_store(tmp_path)
        item = store.next_item("camp1", "ann1")
        task = next(t for t in campaign.tasks
                    if any(u.unit_id == item["unit_id"] for u in t.units))
        later_unit = task.units[-1]
        if later_unit.unit_id != item["unit_id"]:
            with pytest.raises(SubmitRejected) as exc:
                store.submit("camp1", "ann1", {"unit_id": later_unit.unit_id,
                                               "seg_id": "d0:0", "spans": [], "score": 50.0})
            assert exc.value.code == "not_served"

    def test_revision_replaces_and_logs(self, tmp_path):
        store, _ = build_store(tmp_path, qc_rate=0.0)
        item = store.next_item("camp1", "ann1")
        seg_id = item["segments"][0]["seg_id"]
        base = {"unit_id": item["unit_id"], "seg_id": seg_id, "spans": []}
        store.submit("camp1", "ann1", base | {"score": 50.0, "started_at": 0.0,
                                              "submitted_at": 40.0})
        result = store.submit("camp1", "ann1", base | {"score": 60.0, "started_at": 100.0,
                                                       "submitted_at": 500.0})
        assert result["revision"] == 2
        live = [a for a in store.live_annotations("camp1") if a.seg_id == seg_id]
        assert len(live) == 1
        assert live[0].direct_score == 60.0
        # both intervals kept, the 400 s second interval capped at 300 s
        assert live[0].duration_s == 40.0 + 300.0
        assert live[0].submitted_at - live[0].started_at == pytest.approx(live[0].duration_s)
        key = ("ann1", item["unit_id"], seg_id)
        assert len(store.revision_log("camp1")[key]) == 2

    def test_full_run_reaches_done_and_serves_qc_both_versions(self, tmp_path):
        store, campaign = build_store(tmp_path, qc_rate=1.0)
        seen_targets = {}

        def spans_for(item, seg):
            seen_targets.setdefault((item["unit_id"], seg["seg_id"]), seg["target"])
            return []

        n = submit_all(store, "ann1", spans_for=spans_for)
        task = next(t for t in campaign.tasks
                    if "ann1" in store._assignments["camp1"][t.task_id])
        assert n == sum(len(campaign.documents_by_id[u.doc_id]) for u in task.units)
        qc_units = [u for u in task.units if u.is_qc_copy]
        assert qc_units
        for u in qc_units:
            p = campaign.perturbations[u.unit_id]
            assert seen_targets[(u.unit_id, u.perturbed_seg_id)] == p.perturbed_text
        assert store.next_item("camp1", "ann1")["kind"] == "done"

    def test_single_assignment_disjoint_units(self, tmp_path):
        store, campaign = build_store(tmp_path, annotators_per_task=1, n_docs=40)
        assert len(campaign.tasks) >= 2
        i1 = store.next_item("camp1", "ann1")
        i2 = store.next_item("camp1", "ann2")
        assert i1["unit_id"] != i2["unit_id"]
        a1_tasks = {t.task_id for t in campaign.tasks
                    if "ann1" in store._assignments["camp1"][t.task_id]}
        a2_tasks = {t.task_id for t in campaign.tasks
                    if "ann2" in store._assignments["camp1"][t.task_id]}
        assert a1_tasks.isdisjoint(a2_tasks)

    def test_multi_annotation_same_units(self, tmp_path):
        store, _ = build_store(tmp_path, annotators_per_task=2, n_docs=2)
        i1 = store.next_item("camp1", "ann1")
        i2 = store.next_item("camp1", "ann2")
        assert i1["unit_id"] == i2["unit_id"]


class TestPersistence:
    def test_reload_restores_state(self, tmp_path):
        store, _ = build_store(tmp_path, qc_rate=0.0)
        item = store.next_item("camp1", "ann1")
        store.submit("camp1", "ann1", {"unit_id": item["unit_id"],
                                       "seg_id": item["segments"][0]["seg_id"],
                                       "spans": [], "score": 66.0,
                                       "started_at": 1.0, "submitted_at": 31.0})
        store.close()
        reloaded = CampaignStore(tmp_path / "store")
        live = reloaded.live_annotations("camp1")
        assert len(live) == 1 and live[0].direct_score == 66.0
        # serving continues where it left off
        nxt = reloaded.next_item("camp1", "ann1")
        assert nxt["kind"] == "unit"

    def test_truncated_log_line_ignored(self, tmp_path):
        store, _ = build_store(tmp_path, qc_rate=0.0)
        item = store.next_item("camp1", "ann1")
        store.submit("camp1", "ann1", {"unit_id": item["unit_id"],
                                       "seg_id": item["segments"][0]["seg_id"],
                                       "spans": [], "score": 66.0,
                                       "started_at": 1.0, "submitted_at": 31.0})
        store.close()
        log = tmp_path / "store" / "camp1" / "events.jsonl"
        with open(log, "a", encoding="utf-8") as fh:
            fh.write('{"type": "submit", "unit_id": "u00')  # simulated crash mid-write
        reloaded = CampaignStore(tmp_path / "store")
        assert len(reloaded.live_annotations("camp1")) == 1

    def test_empty_campaign_export_has_headers(self, tmp_path):
        store, _ = build_store(tmp_path, qc_rate=0.0)
        exported = store.export("camp1")
        assert exported["annotations"] == ""
        assert exported["timing_csv"].splitlines()[0].startswith("annotator_id,")
        assert exported["perturbations"] == ""

    def test_export_round_trips_through_ingest(self, tmp_path):
        store, campaign = build_store(tmp_path, qc_rate=1.0)
        submit_all(store, "ann1")
        exported = store.export("camp1")
        path = tmp_path / "exported.jsonl"
        path.write_text(exported["annotations"], encoding="utf-8")
        loaded = load_annotations(path, outputs=campaign.outputs)
        assert loaded == store.live_annotations("camp1")

    def test_unknown_campaign(self, tmp_path):
        store = CampaignStore(tmp_path / "store")
        with pytest.raises(KeyError):
            store.export("nope")
