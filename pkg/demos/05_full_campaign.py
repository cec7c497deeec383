"""End to end: build a campaign, serve it over HTTP, submit, export, analyze.

The annotator-facing API is exercised through an in-process test client; a
real deployment serves the same app with uvicorn (see README).

Run: python3 demos/05_full_campaign.py
"""

import json
import tempfile

from fastapi.testclient import TestClient

from esaeval import (
    ClusterConfig,
    Document,
    Protocol,
    SourceSegment,
    SystemOutput,
    cluster_systems,
    system_scores,
)
from esaeval.campaign import CampaignStore, RequiredSpan, TutorialItem, build_campaign
from esaeval.ingest import load_annotations
from esaeval.model import Severity
from esaeval.server import create_app

############################################################
# Dataset: 4 documents x 3 segments, two systems of different quality.

documents = [
    Document(doc_id=f"doc{i}", segments=tuple(
        SourceSegment(f"doc{i}:{j}", f"Source sentence {i}.{j} with plenty of words.")
        for j in range(3)))
    for i in range(4)
]
outputs = [
    SystemOutput(sys_id, seg.seg_id, f"Candidate translation {seg.seg_id} flavour {k} text.")
    for k, sys_id in enumerate(["good-system", "weak-system"])
    for doc in documents for seg in doc.segments
]

############################################################
# Campaign: blind labels, one attention check per task, a one-item tutorial
# that must be passed before any task unit is served.

tutorial = (TutorialItem(
    item_id="warmup",
    source_text="Der Vogel singt am Morgen.",
    target_text="The bird sings at morning.",
    required_spans=(RequiredSpan(start=15, end=25, severity=Severity.MINOR, slack=2),),
    score_range=(50.0, 90.0),
),)

campaign = build_campaign(documents, outputs, Protocol.ESA, qc_rate=1.0, seed=11,
                          tutorial=tutorial, campaign_id="demo-campaign")
store = CampaignStore(tempfile.mkdtemp(prefix="esaeval-demo-"))
store.create(campaign)
client = TestClient(create_app(store))

############################################################
# The tutorial gate: task units are unreachable until the answers pass.

first = client.get("/campaign/demo-campaign/next", params={"annotator": "alex"}).json()
print("first item kind:", first["kind"])

blocked = client.post("/campaign/demo-campaign/submit", json={
    "annotator_id": "alex", "unit_id": "u0001", "seg_id": "doc0:0",
    "spans": [], "score": 50.0, "started_at": 0.0, "submitted_at": 9.0})
print("submitting before the tutorial:", blocked.status_code, blocked.json()["error"])

passed = client.post("/campaign/demo-campaign/tutorial", json={
    "annotator_id": "alex",
    "answers": [{"item_id": "warmup", "score": 70.0,
                 "spans": [{"start": 14, "end": 26, "severity": "minor",
                            "category": None, "missing": False}]}]}).json()
print("tutorial passed:", passed["passed"])

############################################################
# Annotate everything. The scripted annotator scores the better system
# higher purely from the shown text (system identity stays hidden).

clock = 0.0
while True:
    item = client.get("/campaign/demo-campaign/next", params={"annotator": "alex"}).json()
    if item["kind"] == "done":
        break
    for seg in item["segments"]:
        score = 85.0 if "flavour 0" in seg["target"] else 55.0
        client.post("/campaign/demo-campaign/submit", json={
            "annotator_id": "alex", "unit_id": item["unit_id"], "seg_id": seg["seg_id"],
            "spans": [], "score": score, "started_at": clock,
            "submitted_at": clock + 20.0}).raise_for_status()
        clock += 25.0
print("all units annotated")

############################################################
# Export, re-ingest, analyze: the same artifacts the report CLI consumes.

export = client.get("/campaign/demo-campaign/export").json()
with tempfile.NamedTemporaryFile("w", suffix=".jsonl", delete=False) as fh:
    fh.write(export["annotations"])
    annotations_path = fh.name

annotations = [a for a in load_annotations(annotations_path) if not a.is_qc_item]
scores = system_scores(annotations, "direct")
ranking = cluster_systems(scores, ClusterConfig(alpha=0.05, test="rank_sum"))
for entry in ranking.entries:
    print(f"{entry.system_id:<12} mean {entry.mean:5.1f}  cluster {entry.cluster}")

manifest = json.loads(campaign.manifest_json())
print("perturbation pairs embedded:", len(manifest["perturbations"]))
