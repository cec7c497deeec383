"""HTTP API the annotation UI consumes.

JSON request/response bodies throughout; error payloads always carry a
machine-readable code and, for rejected submissions, the violation list.
The storage root comes from the ESAEVAL_STORE environment variable unless a
store is injected. Run with: uvicorn esaeval.server:app
"""

from __future__ import annotations

from fastapi import FastAPI, Query
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .campaign import CampaignStore, SubmitRejected

__all__ = ["create_app", "app"]


class SubmitBody(BaseModel):
    annotator_id: str
    unit_id: str
    seg_id: str
    spans: list[dict] = Field(default_factory=list)
    score: float | None = None
    started_at: float = 0.0
    submitted_at: float = 0.0


class TutorialBody(BaseModel):
    annotator_id: str
    answers: list[dict] = Field(default_factory=list)


REJECTION_STATUS = {
    "tutorial_required": 403,
    "unknown_unit": 409,
    "out_of_task": 409,
    "not_served": 409,
    "segment_not_in_unit": 409,
    "malformed_spans": 422,
    "invalid_annotation": 422,
}


def create_app(store: CampaignStore | None = None) -> FastAPI:
    app = FastAPI(title="esaeval campaign API")
    app.state.store = store or CampaignStore()

    def _store() -> CampaignStore:
        return app.state.store

    @app.exception_handler(KeyError)
    async def _unknown(request, exc):
        return JSONResponse(status_code=404, content={"error": "not_found", "detail": str(exc)})

    @app.exception_handler(LookupError)
    async def _no_task(request, exc):
        return JSONResponse(status_code=404, content={"error": "no_task", "detail": str(exc)})

    @app.get("/campaign/{campaign_id}/next")
    def next_item(campaign_id: str, annotator: str = Query(...)):
        return _store().next_item(campaign_id, annotator)

    @app.post("/campaign/{campaign_id}/submit")
    def submit(campaign_id: str, body: SubmitBody):
        try:
            return _store().submit(campaign_id, body.annotator_id, body.model_dump())
        except SubmitRejected as exc:
            return JSONResponse(
                status_code=REJECTION_STATUS.get(exc.code, 422),
                content={"status": "rejected", "error": exc.code, "violations": exc.violations},
            )

    @app.post("/campaign/{campaign_id}/tutorial")
    def tutorial(campaign_id: str, body: TutorialBody):
        return _store().check_tutorial(campaign_id, body.annotator_id, body.answers)

    @app.get("/campaign/{campaign_id}/export")
    def export(campaign_id: str):
        return _store().export(campaign_id)

    return app


def __getattr__(name: str):
    # Lazily build the module-level app so importing esaeval.server never
    # touches the store unless uvicorn actually asks for it.
    if name == "app":
        return create_app()
    raise AttributeError(name)
