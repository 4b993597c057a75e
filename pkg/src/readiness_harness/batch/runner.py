"""Plan execution with a bounded worker pool and checkpoint/resume.

Results are independent of worker count and of interruptions: records are
keyed by item id, aggregation runs over the id-sorted set, and the run
timestamp lives in the checkpoint header.
"""

from __future__ import annotations

import logging
import shutil
import threading
import time
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Protocol, Sequence

from ..artifacts import (
    CHECKPOINT_FILE,
    REPORT_FILE,
    RUNLOG_FILE,
    SPANS_FILE,
    SUMMARY_FILE,
    RunLogRecord,
    RunReport,
    atomic_write,
    content_digest,
    summary_row_for,
    write_report,
    write_run_log,
    write_summary_csv,
)
from ..errors import DataError
from ..gates import violation_counts
from ..metrics import Budget, PriceTable, aggregate_run, estimate_cost
from ..policy import PolicyChecker
from ..scoring import ScenarioWeights, UnscorableRun, builtin_weights, score
from .checkpoint import Checkpoint
from .client import MalformedResponse, TransientProviderError
from .plan import RunPlan, utc_timestamp
from .sampling import sample_dataset
from .spans import SpanSink, build_spans, dumps_spans

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 3


class Provider(Protocol):
    def infer(self, request: Mapping[str, Any]) -> dict[str, Any]: ...


Evaluator = Callable[..., float | None]


def build_request(item: Mapping[str, Any], plan: RunPlan, label_space: Sequence[str] | None) -> dict[str, Any]:
    payload = dict(item)
    if plan.task_kind == "ticket" and label_space:
        payload["label_space"] = list(label_space)
    return {
        "item": payload,
        "scenario": plan.scenario,
        "top_k": plan.top_k,
        "model": plan.model,
        "prompt_version": plan.prompt_version,
        "seed": plan.seed,
    }


def _envelope_ok(resp: Mapping[str, Any]) -> bool:
    def count(v: Any) -> bool:
        return isinstance(v, int) and not isinstance(v, bool) and v >= 0

    latency = resp.get("latency_ms")
    return (
        isinstance(resp.get("output"), str)
        and isinstance(latency, (int, float)) and not isinstance(latency, bool) and latency >= 0
        and count(resp.get("tokens_in"))
        and count(resp.get("tokens_out"))
    )


def call_infer(
    item: Mapping[str, Any],
    plan: RunPlan,
    provider: Provider,
    *,
    checker: PolicyChecker,
    label_space: Sequence[str] | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> tuple[RunLogRecord, dict[str, Any] | None]:
    """One item through the provider, validated into a RunLogRecord.

    Transport failures are retried with exponential backoff starting at the
    plan's delay; after the last attempt the item is a failed record. A
    malformed response is kept as a schema-invalid record.
    """
    item_id = str(item["id"])
    gold = dict(
        gold_label=item.get("label") if plan.task_kind == "ticket" else None,
        gold_escalate=item.get("escalate") if plan.task_kind == "ticket" else None,
    )
    request = build_request(item, plan, label_space)
    started = time.monotonic()
    last_error = ""
    for attempt in range(MAX_ATTEMPTS):
        if attempt and plan.delay_ms:
            sleep(plan.delay_ms * 2 ** (attempt - 1) / 1000.0)
        try:
            response = provider.infer(request)
            break
        except TransientProviderError as exc:
            last_error = str(exc) or exc.__class__.__name__
            logger.warning("item %s attempt %d failed: %s", item_id, attempt + 1, last_error)
        except MalformedResponse:
            elapsed = (time.monotonic() - started) * 1000.0
            return RunLogRecord(item_id=item_id, latency_ms=elapsed, tokens_in=0, tokens_out=0,
                                schema_valid=False, **gold), None
    else:
        return RunLogRecord(item_id=item_id, latency_ms=0.0, tokens_in=0, tokens_out=0, schema_valid=False,
                            error=f"provider failed after {MAX_ATTEMPTS} attempts: {last_error}", **gold), None

    if not _envelope_ok(response):
        elapsed = (time.monotonic() - started) * 1000.0
        return RunLogRecord(item_id=item_id, latency_ms=elapsed, tokens_in=0, tokens_out=0,
                            schema_valid=False, **gold), None

    common = dict(
        item_id=item_id,
        latency_ms=response["latency_ms"],
        tokens_in=response["tokens_in"],
        tokens_out=response["tokens_out"],
        trace_id=response.get("trace_id"),
        **gold,
    )
    output = response["output"]
    if plan.task_kind == "ticket":
        valid, doc, violations = checker.check_routing(output)
        doc = doc or {}
        label = doc.get("route_label") if isinstance(doc.get("route_label"), str) else None
        confidence = doc.get("confidence")
        confidence = confidence if isinstance(confidence, (int, float)) and not isinstance(confidence, bool) else None
        escalate = doc.get("should_escalate") if isinstance(doc.get("should_escalate"), bool) else None
        record = RunLogRecord(predicted_label=label, confidence=confidence, should_escalate=escalate,
                              policy_violations=violations, schema_valid=valid, **common)
        return record, response

    retrieved = response.get("retrieved_doc_ids")
    valid = retrieved is None or (isinstance(retrieved, list) and all(isinstance(d, str) for d in retrieved))
    docs = [str(d) for d in retrieved] if isinstance(retrieved, list) else None
    if docs is not None and plan.top_k is not None and len(docs) > plan.top_k:
        valid = False
        docs = docs[: plan.top_k]
    record = RunLogRecord(retrieved_doc_ids=docs, policy_violations=checker.check_text(output),
                          schema_valid=valid, **common)
    return record, response


@dataclass
class RunResult:
    run_dir: Path
    report: RunReport
    records: list[RunLogRecord]
    spans: list[dict[str, Any]]
    score: float | None
    diagnostics: list[str] = field(default_factory=list)
    requested: int = 0  # provider calls made by this invocation


@dataclass
class _Settings:
    provider: Provider
    evaluator: Evaluator | None
    qrels: Mapping[str, Iterable[str]] | None
    prices: PriceTable | None
    budgets: Mapping[str, Budget] | None
    weights: ScenarioWeights
    checker: PolicyChecker
    span_sink: SpanSink | None
    sleep: Callable[[float], None]


def _label_space(items: Sequence[Mapping[str, Any]]) -> list[str]:
    return sorted({str(i["label"]) for i in items if i.get("label") is not None})


def execute_plan(
    plan: RunPlan,
    items: Sequence[Mapping[str, Any]],
    out_dir: str | Path,
    *,
    provider: Provider,
    checkpoint_path: str | Path | None = None,
    evaluator: Evaluator | None = None,
    qrels: Mapping[str, Iterable[str]] | None = None,
    prices: PriceTable | None = None,
    budgets: Mapping[str, Budget] | None = None,
    weights: ScenarioWeights | None = None,
    checker: PolicyChecker | None = None,
    span_sink: SpanSink | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> RunResult:
    """Run ``plan`` over a seeded sample of ``items`` and write its artifacts.

    Artifacts land in ``out_dir/<run_id>/``. The checkpoint defaults to
    ``out_dir/<plan slug>.checkpoint.jsonl`` while the run is in flight and
    is moved into the run directory once artifacts are written.
    """
    out_dir = Path(out_dir)
    settings = _Settings(
        provider=provider,
        evaluator=evaluator,
        qrels=qrels,
        prices=prices,
        budgets=budgets,
        weights=weights or builtin_weights(plan.scenario),
        checker=checker or PolicyChecker(),
        span_sink=span_sink,
        sleep=sleep,
    )
    sample = sample_dataset(items, plan.sample_n, plan.seed, strata=plan.strata)
    labels = _label_space(items) if plan.task_kind == "ticket" else None
    fingerprint = plan.fingerprint(content_digest(items))
    ckpt_path = Path(checkpoint_path) if checkpoint_path else out_dir / f"{plan.slug}.checkpoint.jsonl"
    checkpoint = Checkpoint.open(ckpt_path, fingerprint, plan.timestamp or utc_timestamp())
    run_id = plan.run_id(checkpoint.timestamp)
    run_id_str = str(run_id)

    pending = [item for item in sample if str(item["id"]) not in checkpoint]
    evaluator_errors: dict[str, str] = {}
    errors_lock = threading.Lock()

    def spans_for(record: RunLogRecord) -> list[dict[str, Any]]:
        cost = estimate_cost(record.tokens_in, record.tokens_out, plan.model, prices) if prices else 0.0
        return build_spans(record, task_kind=plan.task_kind, run_id=run_id_str, dataset_id=plan.dataset_id,
                           pipeline_version=plan.pipeline_version, scenario=plan.scenario, model=plan.model,
                           provider=plan.provider, top_k=plan.top_k, index_id=plan.index_id, cost_usd=cost)

    def work(item: Mapping[str, Any]) -> None:
        if plan.delay_ms:
            sleep(plan.delay_ms / 1000.0)
        record, response = call_infer(item, plan, provider, checker=settings.checker, label_space=labels,
                                      sleep=sleep)
        if evaluator is not None and response is not None and record.error is None and plan.task_kind == "retrieval":
            try:
                record.faithfulness = evaluator(item, response, model=plan.model, seed=plan.seed)
            except Exception as exc:  # evaluator faults are counted, not fatal
                with errors_lock:
                    evaluator_errors[record.item_id] = str(exc)
        checkpoint.append(record)
        if span_sink is not None:
            span_sink(spans_for(record))

    if pending:
        pool = ThreadPoolExecutor(max_workers=plan.workers, thread_name_prefix="infer")
        try:
            futures = [pool.submit(work, item) for item in pending]
            done, _ = wait(futures, return_when=FIRST_EXCEPTION)
            for fut in done:
                exc = fut.exception()
                if exc is not None:
                    raise exc
        finally:
            pool.shutdown(wait=True, cancel_futures=True)

    sample_ids = {str(item["id"]) for item in sample}
    records = sorted((checkpoint.records[i] for i in sample_ids), key=lambda r: r.item_id)
    if len(records) != plan.sample_n:
        raise DataError(f"expected {plan.sample_n} records, have {len(records)}")

    diagnostics: list[str] = []
    metrics = aggregate_run(records, plan.task_kind, model=plan.model, prices=prices, top_k=plan.top_k,
                            qrels=qrels if plan.task_kind == "retrieval" else None, labels=labels,
                            diagnostics=diagnostics)
    failed = sum(1 for r in records if r.error is not None)
    # evaluator errors from an interrupted earlier invocation are not recoverable; they
    # re-surface as records lacking faithfulness and are counted here.
    n_eval_errors = len(evaluator_errors)
    if plan.task_kind == "retrieval":
        if evaluator is None:
            ragas_status = "missing"
        else:
            unevaluated = sum(1 for r in records if r.error is None and r.faithfulness is None)
            n_eval_errors = max(n_eval_errors, unevaluated)
            ragas_status = "error" if unevaluated else "ok"
    else:
        ragas_status = "ok"

    report = RunReport(
        run_id=run_id,
        dataset_id=plan.dataset_id,
        scenario=plan.scenario,
        provider=plan.provider,
        model=plan.model,
        metrics=metrics,
        latency_p95_ms=metrics.p95_latency_ms if metrics.p95_latency_ms is not None else 0.0,
        top_k=plan.top_k,
        seed=plan.seed,
        sample_n=plan.sample_n,
        pipeline_version=plan.pipeline_version,
        prompt_version=plan.prompt_version,
        retriever=plan.retriever,
        reranker=plan.reranker,
        task_kind=plan.task_kind,
        ragas_status=ragas_status,
        evaluator_error_count=failed + n_eval_errors,
        violation_counts=violation_counts(records),
    )

    try:
        run_score: float | None = score(metrics, settings.weights, plan.task_kind, budgets).value
    except UnscorableRun as exc:
        run_score = None
        diagnostics.append(str(exc))

    spans = [s for r in records for s in spans_for(r)]
    run_dir = out_dir / run_id_str
    atomic_write(run_dir / RUNLOG_FILE, write_run_log(records))
    atomic_write(run_dir / SPANS_FILE, dumps_spans(spans))
    if run_score is not None:
        atomic_write(run_dir / SUMMARY_FILE, write_summary_csv([summary_row_for(report, run_score)]))
    atomic_write(run_dir / REPORT_FILE, write_report(report))
    if ckpt_path.resolve() != (run_dir / CHECKPOINT_FILE).resolve():
        shutil.move(str(ckpt_path), run_dir / CHECKPOINT_FILE)
    for note in diagnostics:
        logger.info("%s: %s", run_id_str, note)
    return RunResult(run_dir, report, records, spans, run_score, diagnostics, requested=len(pending))
