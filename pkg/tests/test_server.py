import pytest
from fastapi.testclient import TestClient

from esaeval.campaign import CampaignStore, build_campaign
from esaeval.model import Protocol
from esaeval.server import create_app

from test_campaign import TUTORIAL, VOCAB, corpus, tutorial_answer


@pytest.fixture
def client(tmp_path):
    docs, outs = corpus()
    campaign = build_campaign(docs, outs, Protocol.ESA, qc_rate=1.0, seed=3,
                              tutorial=TUTORIAL, vocabulary=VOCAB, campaign_id="web1")
    store = CampaignStore(tmp_path / "store")
    store.create(campaign)
    return TestClient(create_app(store))


def pass_tutorial(client, annotator="ann1"):
    r = client.post("/campaign/web1/tutorial",
                    json={"annotator_id": annotator, "answers": tutorial_answer()})
    assert r.status_code == 200 and r.json()["passed"]


class TestNextEndpoint:
    def test_tutorial_served_first(self, client):
        r = client.get("/campaign/web1/next", params={"annotator": "ann1"})
        assert r.status_code == 200
        assert r.json()["kind"] == "tutorial"

    def test_unit_after_tutorial(self, client):
        pass_tutorial(client)
        r = client.get("/campaign/web1/next", params={"annotator": "ann1"})
        body = r.json()
        assert body["kind"] == "unit"
        assert {"unit_id", "doc_id", "blind_system", "protocol", "segments"} <= set(body)
        assert all({"seg_id", "source", "target"} <= set(s) for s in body["segments"])

    def test_unknown_campaign_is_404(self, client):
        r = client.get("/campaign/nope/next", params={"annotator": "a"})
        assert r.status_code == 404
        assert r.json()["error"] == "not_found"


class TestSubmitEndpoint:
    def test_gate_blocks_unit_submission(self, client):
        r = client.post("/campaign/web1/submit", json={
            "annotator_id": "ann1", "unit_id": "u0001", "seg_id": "d0:0",
            "spans": [], "score": 50.0, "started_at": 0.0, "submitted_at": 1.0,
        })
        assert r.status_code == 403
        assert r.json()["error"] == "tutorial_required"

    def test_accept_and_violations(self, client):
        pass_tutorial(client)
        unit = client.get("/campaign/web1/next", params={"annotator": "ann1"}).json()
        seg = unit["segments"][0]
        ok = client.post("/campaign/web1/submit", json={
            "annotator_id": "ann1", "unit_id": unit["unit_id"], "seg_id": seg["seg_id"],
            "spans": [{"start": 0, "end": 3, "severity": "minor", "category": None,
                       "missing": False}],
            "score": 70.0, "started_at": 5.0, "submitted_at": 42.0,
        })
        assert ok.status_code == 200
        assert ok.json() == {"status": "accepted", "revision": 1}

        bad = client.post("/campaign/web1/submit", json={
            "annotator_id": "ann1", "unit_id": unit["unit_id"], "seg_id": seg["seg_id"],
            "spans": [{"start": 0, "end": 9999, "severity": "minor", "category": None,
                       "missing": False}],
            "score": 70.0, "started_at": 50.0, "submitted_at": 60.0,
        })
        assert bad.status_code == 422
        assert any("out of bounds" in v for v in bad.json()["violations"])

    def test_out_of_task_conflict(self, client):
        pass_tutorial(client)
        client.get("/campaign/web1/next", params={"annotator": "ann1"})
        r = client.post("/campaign/web1/submit", json={
            "annotator_id": "ann1", "unit_id": "bogus", "seg_id": "d0:0",
            "spans": [], "score": 10.0, "started_at": 0.0, "submitted_at": 1.0,
        })
        assert r.status_code == 409


class TestTutorialEndpoint:
    def test_fail_reports_diagnostics(self, client):
        r = client.post("/campaign/web1/tutorial", json={
            "annotator_id": "ann1",
            "answers": [{"item_id": "tut1", "spans": [], "score": 50.0}],
        })
        assert r.status_code == 200
        body = r.json()
        assert not body["passed"]
        assert body["diagnostics"]["tut1"]


class TestExportEndpoint:
    def test_export_shape(self, client):
        pass_tutorial(client)
        unit = client.get("/campaign/web1/next", params={"annotator": "ann1"}).json()
        seg = unit["segments"][0]
        client.post("/campaign/web1/submit", json={
            "annotator_id": "ann1", "unit_id": unit["unit_id"], "seg_id": seg["seg_id"],
            "spans": [], "score": 88.0, "started_at": 0.0, "submitted_at": 30.0,
        })
        r = client.get("/campaign/web1/export")
        assert r.status_code == 200
        body = r.json()
        assert set(body) == {"annotations", "perturbations", "timing_csv"}
        assert '"score": 88.0' in body["annotations"]
        assert body["timing_csv"].startswith("annotator_id,")
