import json

import pytest

from conftest import ticket_items
from readiness_harness.artifacts import RunLogRecord, parse_report
from readiness_harness.batch import Checkpoint, CheckpointMismatch, RunPlan, SimEvaluator, SimProvider, call_infer
from readiness_harness.batch import execute_plan, sample_dataset
from readiness_harness.batch.client import MalformedResponse, TransientProviderError
from readiness_harness.batch.spans import SPAN_ATTRIBUTES, JsonlSpanSink
from readiness_harness.errors import ConfigError, DataError
from readiness_harness.metrics import ModelPrice
from readiness_harness.policy import PolicyChecker

PRICES = {"gpt-4.1": ModelPrice(2.0, 8.0), "gpt-4.1-mini": ModelPrice(0.4, 1.6)}


def plan(**kw):
    base = dict(suite="sim_core", dataset_id="tickets_cs", task_kind="ticket", scenario="risk-first", seed=3,
                sample_n=20, model="gpt-4.1", workers=2, delay_ms=0, timestamp="20260301_120000")
    base.update(kw)
    return RunPlan(**base)


def retrieval_items(n):
    return [{"id": f"q{i:03d}", "query": f"question {i}"} for i in range(n)]


def test_sampling_is_seeded_and_order_free():
    items = ticket_items(50)
    a = sample_dataset(items, 10, 1)
    assert a == sample_dataset(list(reversed(items)), 10, 1)
    assert a != sample_dataset(items, 10, 2)
    strat = sample_dataset(items, 20, 1, strata="label")
    assert sorted({i["label"] for i in strat}) == ["account", "billing", "general", "technical"]
    with pytest.raises(DataError):
        sample_dataset(items, 51, 1)
    with pytest.raises(DataError):
        sample_dataset(items + items[:1], 5, 1)


def test_plan_validation():
    with pytest.raises(ConfigError):
        plan(task_kind="retrieval")
    with pytest.raises(ConfigError):
        plan(workers=0)
    assert plan(workers=1).fingerprint("d") == plan(workers=8).fingerprint("d")
    assert plan().fingerprint("d") != plan(seed=4).fingerprint("d")


def test_ticket_run_artifacts(tmp_path):
    res = execute_plan(plan(), ticket_items(40), tmp_path, provider=SimProvider(), prices=PRICES)
    names = sorted(p.name for p in res.run_dir.iterdir())
    assert names == ["checkpoint.jsonl", "report.json", "runlog.jsonl", "spans.jsonl", "summary.csv"]
    report = parse_report((res.run_dir / "report.json").read_bytes())
    assert report.ragas_status == "ok" and report.sample_n == 20 and report.prompt_version == "baseline"
    assert report.metrics.policy_pass is not None and report.metrics.retrieval_hit_k is None
    assert not list(tmp_path.glob("*.checkpoint.jsonl"))


def test_policy_variant_leaks_every_response(tmp_path):
    res = execute_plan(plan(prompt_version="policy-variant"), ticket_items(40), tmp_path, provider=SimProvider())
    assert res.report.metrics.policy_pass == 0.0
    assert res.report.violation_counts["asks_for_password"] > 0


def test_retrieval_run_with_evaluator(tmp_path):
    qrels = {f"q{i:03d}": {f"gold{i}"} for i in range(30)}
    p = plan(task_kind="retrieval", top_k=5, sample_n=30, dataset_id="beir_scifact", model="gpt-4.1-mini")
    res = execute_plan(p, retrieval_items(30), tmp_path, provider=SimProvider(qrels), evaluator=SimEvaluator(),
                       qrels=qrels, prices=PRICES)
    m = res.report.metrics
    assert 0 < m.retrieval_hit_k < 1 and m.faithfulness is not None and m.workflow_success is None
    assert res.report.ragas_status == "ok" and res.report.evaluator_error_count == 0
    assert res.run_dir.name.startswith("sim_core_beir_scifact_gpt-4.1-mini_risk-first_k5_seed3_")


def test_retrieval_without_evaluator_is_flagged(tmp_path):
    p = plan(task_kind="retrieval", top_k=3, dataset_id="beir_fiqa")
    res = execute_plan(p, retrieval_items(20), tmp_path, provider=SimProvider())
    assert res.report.ragas_status == "missing" and res.score is None
    assert not (res.run_dir / "summary.csv").exists()


def test_evaluator_faults_counted(tmp_path):
    def flaky(item, response, *, model, seed):
        if item["id"].endswith("3"):
            raise RuntimeError("evaluator down")
        return 0.5

    p = plan(task_kind="retrieval", top_k=3, dataset_id="beir_fiqa")
    res = execute_plan(p, retrieval_items(20), tmp_path, provider=SimProvider(), evaluator=flaky)
    assert res.report.ragas_status == "error" and res.report.evaluator_error_count == 2


class Flaky:
    def __init__(self, failures, exc=TransientProviderError):
        self.failures, self.calls, self.exc = failures, 0, exc

    def infer(self, request):
        self.calls += 1
        if self.calls <= self.failures:
            raise self.exc("nope")
        return SimProvider().infer(request)


def test_retry_backoff_then_success():
    sleeps = []
    provider = Flaky(2)
    record, resp = call_infer(ticket_items(1)[0], plan(delay_ms=100), provider, checker=PolicyChecker(),
                              sleep=sleeps.append)
    assert provider.calls == 3 and resp is not None and record.error is None
    assert sleeps == [0.1, 0.2]


def test_retry_exhaustion_marks_record():
    record, resp = call_infer(ticket_items(1)[0], plan(), Flaky(5), checker=PolicyChecker(), sleep=lambda s: None)
    assert resp is None and record.error.startswith("provider failed after 3") and not record.schema_valid


def test_malformed_and_bad_envelope():
    record, _ = call_infer(ticket_items(1)[0], plan(), Flaky(1, MalformedResponse), checker=PolicyChecker())
    assert not record.schema_valid and record.error is None

    class NoTokens:
        def infer(self, request):
            return {"output": "{}", "latency_ms": 5}

    record, _ = call_infer(ticket_items(1)[0], plan(), NoTokens(), checker=PolicyChecker())
    assert not record.schema_valid


def test_top_k_overflow_is_truncated():
    class TooMany:
        def infer(self, request):
            return {"output": "ok", "latency_ms": 1, "tokens_in": 1, "tokens_out": 1,
                    "retrieved_doc_ids": ["a", "b", "c", "d"]}

    record, _ = call_infer({"id": "q"}, plan(task_kind="retrieval", top_k=2), TooMany(), checker=PolicyChecker())
    assert record.retrieved_doc_ids == ["a", "b"] and not record.schema_valid


def test_checkpoint_torn_line_and_mismatch(tmp_path):
    path = tmp_path / "c.jsonl"
    ck = Checkpoint.open(path, "fp", "20260101_000000")
    ck.append(RunLogRecord("a", 1.0, 1, 1))
    with open(path, "a") as fh:
        fh.write('{"kind": "record", "rec')
    again = Checkpoint.open(path, "fp", "20270101_000000")
    assert len(again) == 1 and again.timestamp == "20260101_000000"
    assert path.read_text().endswith("\n")
    with pytest.raises(CheckpointMismatch):
        Checkpoint.open(path, "other", "20260101_000000")


def test_resume_refuses_changed_plan(tmp_path):
    class Crash(Exception):
        pass

    class Stop:
        def infer(self, request):
            raise Crash()

    with pytest.raises(Crash):
        execute_plan(plan(workers=1), ticket_items(30), tmp_path, provider=Stop())
    with pytest.raises(CheckpointMismatch):
        execute_plan(plan(workers=1), ticket_items(31), tmp_path, provider=SimProvider())


def test_spans_have_fixed_attributes_and_no_text(tmp_path):
    sink = JsonlSpanSink(tmp_path / "live.jsonl")
    res = execute_plan(plan(), ticket_items(40), tmp_path / "out", provider=SimProvider(), span_sink=sink)
    assert len(res.spans) == 4 * 20
    live = [json.loads(line) for line in (tmp_path / "live.jsonl").read_text().splitlines()]
    assert sorted(json.dumps(s, sort_keys=True) for s in live) == sorted(json.dumps(s, sort_keys=True) for s in res.spans)
    for span in res.spans:
        assert set(span["attributes"]) == set(SPAN_ATTRIBUTES[span["name"]])
        if span["parent_id"] is None:
            assert span["name"] == "infer"
    dump = (res.run_dir / "spans.jsonl").read_text()
    assert "ticket body" not in dump and '"t0001"' not in dump
