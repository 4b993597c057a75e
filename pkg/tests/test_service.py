import json

import httpx
import pytest
from fastapi.testclient import TestClient

from conftest import ticket_items
from readiness_harness.batch import RunPlan, execute_plan
from readiness_harness.batch.client import HttpProvider, MalformedResponse, TransientProviderError
from readiness_harness.batch.sim import SimProvider
from readiness_harness.service import create_app


def test_endpoint_contract():
    client = TestClient(create_app())
    assert client.get("/healthz").json() == {"status": "ok"}
    body = {"item": {"id": "q1"}, "scenario": "sla-first", "top_k": 3, "model": "gpt-4.1"}
    doc = client.post("/v1/infer", json=body).json()
    assert len(doc["retrieved_doc_ids"]) == 3 and doc["tokens_in"] > 0
    assert client.post("/v1/infer", json={**body, "item": {}}).status_code == 422
    assert client.post("/v1/infer", json={**body, "top_k": 0}).status_code == 422


def test_http_provider_strips_gold_fields(tmp_path):
    seen = []
    app_client = TestClient(create_app())

    def handler(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        seen.append(body["item"])
        resp = app_client.post("/v1/infer", json=body)
        return httpx.Response(resp.status_code, json=resp.json())

    client = httpx.Client(base_url="http://sim", transport=httpx.MockTransport(handler))
    plan = RunPlan(suite="http_core", dataset_id="tickets", task_kind="ticket", scenario="sla-first", seed=1,
                   sample_n=10, model="gpt-4.1", workers=1, delay_ms=0, timestamp="20260301_000000")
    items = ticket_items(10)
    res = execute_plan(plan, items, tmp_path / "http", provider=HttpProvider("http://sim", client=client))
    assert seen and all("label" not in i and "escalate" not in i for i in seen)
    assert len(res.records) == 10 and res.report.metrics.policy_pass is not None
    assert all(r.gold_label is not None for r in res.records)  # gold stays local


def test_http_errors_are_transient():
    client = httpx.Client(base_url="http://x", transport=httpx.MockTransport(lambda r: httpx.Response(503)))
    with pytest.raises(TransientProviderError):
        HttpProvider("http://x", client=client).infer({"item": {"id": "a"}})
    client = httpx.Client(base_url="http://x", transport=httpx.MockTransport(lambda r: httpx.Response(200, text="hi")))
    with pytest.raises(MalformedResponse):
        HttpProvider("http://x", client=client).infer({"item": {"id": "a"}})


def test_sim_is_deterministic():
    req = {"item": {"id": "a", "label": "x"}, "scenario": "sla-first", "top_k": None, "model": "gpt-4.1", "seed": 3}
    assert SimProvider().infer(req) == SimProvider().infer(req)
