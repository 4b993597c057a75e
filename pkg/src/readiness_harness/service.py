"""Reference ``POST /v1/infer`` endpoint backed by the deterministic simulator.

Serves the same contract HttpProvider speaks, so the HTTP path can be
exercised end to end without a hosted model::

    uvicorn readiness_harness.service:app --port 8080
"""

from __future__ import annotations

from typing import Any, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .batch.sim import SimProvider


class InferRequest(BaseModel):
    item: dict[str, Any]
    scenario: str
    top_k: Optional[int] = Field(default=None, ge=1)
    model: str
    prompt_version: str = "baseline"
    seed: int = 0


class InferResponse(BaseModel):
    output: str
    latency_ms: float = Field(ge=0)
    tokens_in: int = Field(ge=0)
    tokens_out: int = Field(ge=0)
    retrieved_doc_ids: Optional[list[str]] = None
    trace_id: Optional[str] = None


def create_app(provider: SimProvider | None = None) -> FastAPI:
    sim = provider or SimProvider()
    api = FastAPI(title="readiness sim endpoint")

    @api.get("/healthz")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    @api.post("/v1/infer", response_model=InferResponse, response_model_exclude_none=True)
    def infer(req: InferRequest) -> dict[str, Any]:
        if "id" not in req.item:
            raise HTTPException(status_code=422, detail="item.id is required")
        return sim.infer(req.model_dump())

    return api


app = create_app()
