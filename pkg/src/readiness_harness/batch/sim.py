"""Deterministic stand-in for a hosted inference endpoint and its evaluator.

Every response is a pure function of (item id, seed, model, prompt version,
top_k), so runs are reproducible byte for byte. Prompt versions named
``bias-variant`` and ``policy-variant`` inject the two regression behaviours:
routing drift plus occasional credential requests, and credential requests on
every response.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable, Mapping

from ..determinism import SplitMix64, fnv1a64, salted_seed


@dataclass(frozen=True)
class ModelProfile:
    latency_ms: float
    routing_accuracy: float
    faithfulness: float
    violation_rate: float  # credential asks under the baseline prompt


PROFILES = {
    "gpt-4.1": ModelProfile(2900.0, 0.40, 0.62, 0.0),
    "gpt-4.1-mini": ModelProfile(3300.0, 0.36, 0.70, 0.0),
    "gpt-5.2": ModelProfile(6300.0, 0.42, 0.42, 0.0),
}

BIAS_VARIANTS = frozenset({"bias", "bias-variant"})
POLICY_VARIANTS = frozenset({"policy", "policy-variant"})

CREDENTIAL_ASK = "Please share your password so we can verify the account."


def profile_for(model: str) -> ModelProfile:
    if model in PROFILES:
        return PROFILES[model]
    rng = SplitMix64(fnv1a64(model))
    return ModelProfile(2500 + 3000 * rng.uniform(), 0.3 + 0.2 * rng.uniform(), 0.5 + 0.3 * rng.uniform(), 0.0)


def _rng(seed: int, *salt: object) -> SplitMix64:
    return SplitMix64(salted_seed(seed, *salt))


def _latency(rng: SplitMix64, base: float, top_k: int | None) -> int:
    spread = 0.7 + 0.6 * rng.uniform()
    tail = 1.7 if rng.uniform() < 0.05 else 1.0
    return int(round(base * spread * tail + 12 * (top_k or 0)))


class SimProvider:
    """In-process provider implementing the ``/v1/infer`` contract.

    ``qrels`` lets retrieval responses hit gold documents at a plausible
    rate; gold fields on ticket items (``label``, ``escalate``) drive routing
    quality when present.
    """

    def __init__(self, qrels: Mapping[str, Iterable[str]] | None = None) -> None:
        self.qrels = {q: sorted(docs) for q, docs in (qrels or {}).items()}

    def infer(self, request: Mapping[str, Any]) -> dict[str, Any]:
        item = request["item"]
        if request.get("top_k") is None:
            return self._ticket(request, item)
        return self._retrieval(request, item)

    __call__ = infer

    def _ticket(self, request: Mapping[str, Any], item: Mapping[str, Any]) -> dict[str, Any]:
        model, version, seed = request["model"], request.get("prompt_version", "baseline"), request.get("seed", 0)
        item_id = str(item["id"])
        profile = profile_for(model)
        rng = _rng(seed, "ticket", item_id, model, version)
        labels = sorted(item.get("label_space") or ([item["label"]] if "label" in item else ["general"]))
        gold = item.get("label")

        accuracy = profile.routing_accuracy
        if gold is not None and rng.uniform() < accuracy:
            label = gold
        else:
            label = labels[rng.below(len(labels))]
        if version in BIAS_VARIANTS and rng.uniform() < 0.35:
            label = labels[0]

        gold_escalate = item.get("escalate")
        if gold_escalate is not None:
            escalate = bool(gold_escalate) if rng.uniform() < 0.85 else not gold_escalate
        else:
            escalate = rng.uniform() < 0.2

        violation_rate = profile.violation_rate
        if version in BIAS_VARIANTS:
            violation_rate = 0.10
        leaks = version in POLICY_VARIANTS or rng.uniform() < violation_rate

        doc: dict[str, Any] = {
            "route_label": label,
            "confidence": round(0.5 + 0.5 * rng.uniform(), 3),
            "should_escalate": escalate,
            "policy_violations": [],
        }
        if leaks:
            doc["reply"] = CREDENTIAL_ASK
        output = json.dumps(doc, sort_keys=True)
        if rng.uniform() < 0.01:
            output = output[: len(output) // 2]  # truncated generation
        tokens_in = 180 + len(str(item.get("text", ""))) // 4
        return {
            "output": output,
            "latency_ms": _latency(rng, profile.latency_ms, None),
            "tokens_in": tokens_in,
            "tokens_out": 40 + rng.below(30),
            "trace_id": f"{salted_seed(seed, 'trace', item_id, model, version):016x}",
        }

    def ranked_docs(self, item_id: str, seed: int, depth: int = 10) -> list[str]:
        """Retrieval depends only on (item, seed): models share one retriever."""
        rng = _rng(seed, "retrieve", item_id)
        filler = [f"doc-{salted_seed(seed, 'filler', item_id, i) % 10**8:08d}" for i in range(depth)]
        gold = self.qrels.get(item_id, [])
        u = rng.uniform()
        if gold:
            if u < 0.55:
                rank = rng.below(3)
            elif u < 0.75:
                rank = 3 + rng.below(2)
            elif u < 0.88:
                rank = 5 + rng.below(max(1, depth - 5))
            else:
                rank = None
            if rank is not None and rank < depth:
                filler[rank] = gold[rng.below(len(gold))]
        return filler

    def _retrieval(self, request: Mapping[str, Any], item: Mapping[str, Any]) -> dict[str, Any]:
        model, version, seed = request["model"], request.get("prompt_version", "baseline"), request.get("seed", 0)
        top_k = int(request["top_k"])
        item_id = str(item["id"])
        profile = profile_for(model)
        rng = _rng(seed, "generate", item_id, model, version, top_k)
        docs = self.ranked_docs(item_id, seed, max(10, top_k))[:top_k]
        answer = f"Based on {docs[0]}, the evidence addresses the question."
        if version in POLICY_VARIANTS:
            answer += " " + CREDENTIAL_ASK
        return {
            "output": answer,
            "latency_ms": _latency(rng, profile.latency_ms, top_k),
            "tokens_in": 120 + 210 * top_k + rng.below(40),
            "tokens_out": 120 + rng.below(100),
            "retrieved_doc_ids": docs,
            "trace_id": f"{salted_seed(seed, 'trace', item_id, model, version, top_k):016x}",
        }


class SimEvaluator:
    """Deterministic faithfulness scores in place of an external RAG evaluator."""

    def __call__(self, item: Mapping[str, Any], response: Mapping[str, Any], *, model: str, seed: int) -> float:
        profile = profile_for(model)
        rng = _rng(seed, "faith", item["id"], model, len(response.get("retrieved_doc_ids") or []))
        value = profile.faithfulness + 0.5 * (rng.uniform() - 0.5)
        return round(min(1.0, max(0.0, value)), 3)
