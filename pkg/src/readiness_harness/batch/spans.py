"""Per-item span trees with a fixed attribute set per span name."""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

from ..artifacts import RunLogRecord
from ..determinism import fnv1a64
from ..metrics import record_policy_pass
from ..policy import hash_ticket_id

SPAN_ATTRIBUTES: dict[str, tuple[str, ...]] = {
    "infer": ("run_id", "dataset_id", "pipeline_version", "scenario", "latency_ms", "tokens_in",
              "tokens_out", "cost_usd_est"),
    "route.classify": ("ticket_id", "dataset_id", "predicted_label", "confidence", "latency_ms"),
    "respond.finalize": ("ticket_id", "should_escalate", "latency_ms"),
    "rag.retrieve": ("top_k", "index_id", "retrieved_doc_ids", "latency_ms"),
    "rag.generate": ("model_id", "provider", "cache_hit", "latency_ms"),
    "validate.policy": ("pass", "violation_types", "latency_ms"),
}

# share of the root latency attributed to each child step
_CHILD_SHARE = {
    "ticket": (("route.classify", 0.10), ("validate.policy", 0.003), ("respond.finalize", 0.002)),
    "retrieval": (("rag.retrieve", 0.015), ("rag.generate", 0.85), ("validate.policy", 0.003)),
}

SpanSink = Callable[[list[dict[str, Any]]], None]


def _span_id(trace_id: str, name: str) -> str:
    return f"{fnv1a64(f'{trace_id}/{name}'):016x}"


def build_spans(
    record: RunLogRecord,
    *,
    task_kind: str,
    run_id: str,
    dataset_id: str,
    pipeline_version: str,
    scenario: str,
    model: str,
    provider: str,
    top_k: int | None,
    index_id: str | None,
    cost_usd: float,
) -> list[dict[str, Any]]:
    """Root ``infer`` span plus child steps for one item.

    Ticket ids are hashed; no free text from the item or output is attached.
    """
    trace_id = record.trace_id or f"{fnv1a64(f'{run_id}/{record.item_id}'):016x}"
    root_id = _span_id(trace_id, "infer")
    total = record.latency_ms
    hashed = hash_ticket_id(record.item_id)
    values: dict[str, Any] = {
        "run_id": run_id,
        "dataset_id": dataset_id,
        "pipeline_version": pipeline_version,
        "scenario": scenario,
        "tokens_in": record.tokens_in,
        "tokens_out": record.tokens_out,
        "cost_usd_est": round(cost_usd, 6),
        "ticket_id": hashed,
        "predicted_label": record.predicted_label,
        "confidence": record.confidence,
        "should_escalate": record.should_escalate,
        "top_k": top_k,
        "index_id": index_id or dataset_id,
        "retrieved_doc_ids": list(record.retrieved_doc_ids or []),
        "model_id": model,
        "provider": provider,
        "cache_hit": False,
        "pass": record_policy_pass(record),
        "violation_types": list(record.policy_violations),
    }

    def span(name: str, parent: str | None, latency: float) -> dict[str, Any]:
        attrs = {key: values[key] for key in SPAN_ATTRIBUTES[name] if key != "latency_ms"}
        attrs["latency_ms"] = latency
        return {
            "trace_id": trace_id,
            "span_id": root_id if parent is None else _span_id(trace_id, name),
            "parent_id": parent,
            "name": name,
            "attributes": dict(sorted(attrs.items())),
        }

    spans = [span("infer", None, total)]
    for name, share in _CHILD_SHARE[task_kind]:
        spans.append(span(name, root_id, int(total * share)))
    return spans


class JsonlSpanSink:
    """Appends span records as JSON lines; safe to call from worker threads."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()

    def __call__(self, spans: list[dict[str, Any]]) -> None:
        text = "".join(json.dumps(s, sort_keys=True) + "\n" for s in spans)
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(text)


def dumps_spans(spans: Iterable[Mapping[str, Any]]) -> str:
    return "".join(json.dumps(s, sort_keys=True) + "\n" for s in spans)
