"""Per-run metric computation from run logs.

Rates are fractions in [0, 1]. A metric that cannot be computed for a run is
left as ``None`` (absent), never as 0.0.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass, fields
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from .errors import ConfigError, DataError

if TYPE_CHECKING:
    from .artifacts import RunLogRecord

RATE_FIELDS = (
    "workflow_success",
    "policy_pass",
    "faithfulness",
    "retrieval_hit_k",
    "routing_accuracy",
    "macro_f1",
    "escalation_rate",
    "answer_relevance",
)

# readiness dimension -> MetricSet attribute carrying its raw value
DIMENSION_FIELDS = {
    "workflow": "workflow_success",
    "policy": "policy_pass",
    "faithfulness": "faithfulness",
    "retrieval": "retrieval_hit_k",
    "cost": "cost_usd",
    "sla": "p95_latency_ms",
}
DIMENSIONS = tuple(DIMENSION_FIELDS)

TASK_KINDS = ("ticket", "retrieval")
_TASK_ALIASES = {"t1": "ticket", "t2": "ticket", "t1/t2": "ticket", "t3": "retrieval",
                 "ticket": "ticket", "retrieval": "retrieval"}


def normalize_task_kind(kind: str) -> str:
    try:
        return _TASK_ALIASES[kind.strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown task kind {kind!r}; expected one of {TASK_KINDS}") from None


@dataclass(frozen=True)
class MetricSet:
    workflow_success: float | None = None
    policy_pass: float | None = None
    faithfulness: float | None = None
    retrieval_hit_k: float | None = None
    cost_usd: float | None = None
    p95_latency_ms: float | None = None
    # diagnostics: carried and reported, never scored
    routing_accuracy: float | None = None
    macro_f1: float | None = None
    escalation_rate: float | None = None
    answer_relevance: float | None = None
    cost_usd_per_task: float | None = None

    def __post_init__(self) -> None:
        for name in RATE_FIELDS:
            value = getattr(self, name)
            if value is None:
                continue
            if not (isinstance(value, (int, float)) and not isinstance(value, bool)):
                raise DataError(f"{name} must be numeric, got {value!r}")
            if math.isnan(value) or not 0.0 <= value <= 1.0:
                raise DataError(f"{name}={value} outside [0, 1]")
        for name in ("cost_usd", "p95_latency_ms", "cost_usd_per_task"):
            value = getattr(self, name)
            if value is not None and (math.isnan(value) or value < 0):
                raise DataError(f"{name}={value} must be non-negative")

    def present(self) -> frozenset[str]:
        """Readiness dimensions with a value in this set."""
        return frozenset(d for d, f in DIMENSION_FIELDS.items() if getattr(self, f) is not None)

    def dimension_value(self, dimension: str) -> float | None:
        return getattr(self, DIMENSION_FIELDS[dimension])

    def as_dict(self, *, drop_absent: bool = True) -> dict[str, float | None]:
        data = asdict(self)
        if drop_absent:
            data = {k: v for k, v in data.items() if v is not None}
        return data

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass(frozen=True)
class Budget:
    """Linear budget: full credit at or below ``lo``, none at or above ``hi``."""

    metric: str
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.metric not in ("cost", "latency"):
            raise ConfigError(f"budget metric must be 'cost' or 'latency', got {self.metric!r}")
        if not (0 < self.lo < self.hi):
            raise ConfigError(f"budget requires 0 < lo < hi, got lo={self.lo}, hi={self.hi}")


@dataclass(frozen=True)
class ModelPrice:
    input_usd_per_1m: float
    output_usd_per_1m: float

    def __post_init__(self) -> None:
        if self.input_usd_per_1m < 0 or self.output_usd_per_1m < 0:
            raise ConfigError("prices must be non-negative")


PriceTable = Mapping[str, ModelPrice]


def p95_nearest_rank(latencies: Sequence[float]) -> float:
    """1-based nearest-rank 95th percentile; always a member of the input."""
    if not latencies:
        raise DataError("no data: p95 of an empty latency list")
    ordered = sorted(latencies)
    rank = math.ceil(0.95 * len(ordered))
    return ordered[max(rank, 1) - 1]


class UnjudgedQuery(DataError):
    """Query has no relevant documents in the qrels."""


def hit_at_k(retrieved: Sequence[str], gold: Iterable[str], k: int) -> int:
    if k < 1:
        raise ValueError("k must be >= 1")
    gold = set(gold)
    if not gold:
        raise UnjudgedQuery("empty gold set")
    return int(any(doc in gold for doc in retrieved[:k]))


def mean_hit_at_k(
    runs: Mapping[str, Sequence[str]], qrels: Mapping[str, Iterable[str]], k: int
) -> tuple[float | None, int]:
    """Mean hit@k over judged queries, plus the number of unjudged ones."""
    hits: list[int] = []
    unjudged = 0
    for qid in sorted(runs):
        try:
            hits.append(hit_at_k(runs[qid], qrels.get(qid, ()), k))
        except UnjudgedQuery:
            unjudged += 1
    if not hits:
        return None, unjudged
    return sum(hits) / len(hits), unjudged


def parse_qrels(text: str) -> dict[str, set[str]]:
    """Three-column qrels: ``query_id doc_id relevance``; '#' starts a comment.

    Rows with relevance <= 0 are ignored. A header row whose relevance column
    is not numeric (BEIR's ``query-id corpus-id score``) is skipped.
    """
    qrels: dict[str, set[str]] = defaultdict(set)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise DataError(f"qrels line {lineno}: expected 3 columns, got {len(parts)}")
        qid, doc, rel = parts
        try:
            relevance = float(rel)
        except ValueError:
            if lineno == 1:
                continue
            raise DataError(f"qrels line {lineno}: relevance {rel!r} is not numeric") from None
        if relevance > 0:
            qrels[qid].add(doc)
    return dict(qrels)


def _require(records: Sequence[RunLogRecord]) -> None:
    if not records:
        raise DataError("empty record set")


def routing_accuracy(records: Sequence[RunLogRecord]) -> float:
    _require(records)
    correct = sum(1 for r in records if r.predicted_label is not None and r.predicted_label == r.gold_label)
    return correct / len(records)


def macro_f1(records: Sequence[RunLogRecord], labels: Iterable[str] | None = None) -> float:
    """Unweighted mean of per-class F1 over the label universe.

    The universe defaults to the gold labels seen. Predictions outside the
    universe are wrong but count as a false positive for no class.
    """
    _require(records)
    universe = sorted(set(labels) if labels is not None else {r.gold_label for r in records})
    if not universe:
        raise DataError("empty label universe")
    tp: dict[str, int] = defaultdict(int)
    fp: dict[str, int] = defaultdict(int)
    fn: dict[str, int] = defaultdict(int)
    members = set(universe)
    for r in records:
        if r.predicted_label == r.gold_label:
            tp[r.gold_label] += 1
            continue
        if r.gold_label in members:
            fn[r.gold_label] += 1
        if r.predicted_label in members:
            fp[r.predicted_label] += 1
    scores = []
    for c in universe:
        denom = 2 * tp[c] + fp[c] + fn[c]
        scores.append(2 * tp[c] / denom if denom else 0.0)
    return sum(scores) / len(scores)


def record_policy_pass(r: RunLogRecord) -> bool:
    return r.schema_valid and not r.policy_violations and r.error is None


def record_workflow_success(r: RunLogRecord) -> bool:
    if not record_policy_pass(r):
        return False
    if r.predicted_label is None or r.predicted_label != r.gold_label:
        return False
    if r.gold_escalate is not None and r.should_escalate != r.gold_escalate:
        return False
    return True


def policy_pass_rate(records: Sequence[RunLogRecord]) -> float:
    _require(records)
    return sum(record_policy_pass(r) for r in records) / len(records)


def workflow_success_rate(records: Sequence[RunLogRecord]) -> float:
    _require(records)
    return sum(record_workflow_success(r) for r in records) / len(records)


def escalation_rate(records: Sequence[RunLogRecord]) -> float:
    _require(records)
    return sum(1 for r in records if r.should_escalate is True) / len(records)


def estimate_cost(tokens_in: int, tokens_out: int, model: str, prices: PriceTable) -> float:
    try:
        price = prices[model]
    except KeyError:
        raise ConfigError(f"no price configured for model {model!r}") from None
    return tokens_in / 1e6 * price.input_usd_per_1m + tokens_out / 1e6 * price.output_usd_per_1m


def normalize_budget(value: float, budget: Budget) -> float:
    if value <= budget.lo:
        return 1.0
    if value >= budget.hi:
        return 0.0
    return min(1.0, max(0.0, (budget.hi - value) / (budget.hi - budget.lo)))


def aggregate_run(
    records: Sequence[RunLogRecord],
    task_kind: str,
    *,
    model: str,
    prices: PriceTable | None = None,
    top_k: int | None = None,
    qrels: Mapping[str, Iterable[str]] | None = None,
    labels: Iterable[str] | None = None,
    diagnostics: list[str] | None = None,
) -> MetricSet:
    """Fill the MetricSet fields that apply to ``task_kind``.

    Records are processed in item_id order and summed with ``math.fsum`` so
    the result does not depend on completion order.
    """
    _require(records)
    task = normalize_task_kind(task_kind)
    notes = diagnostics if diagnostics is not None else []
    records = sorted(records, key=lambda r: r.item_id)
    ok = [r for r in records if r.error is None]

    latencies = [r.latency_ms for r in ok]
    p95 = p95_nearest_rank(latencies) if latencies else None

    cost_total = cost_mean = None
    if prices is not None:
        costs = [estimate_cost(r.tokens_in, r.tokens_out, model, prices) for r in records]
        cost_total = math.fsum(costs)
        cost_mean = cost_total / len(records)
    else:
        notes.append("no price table: cost absent")

    faith = [r.faithfulness for r in ok if r.faithfulness is not None]
    faithfulness = math.fsum(faith) / len(faith) if faith else None

    common = dict(faithfulness=faithfulness, cost_usd=cost_total, cost_usd_per_task=cost_mean,
                  p95_latency_ms=p95)

    if task == "retrieval":
        hit = None
        if qrels is None:
            notes.append("no qrels: retrieval_hit_k absent")
        elif top_k is None:
            notes.append("no top_k: retrieval_hit_k absent")
        else:
            retrieved = {r.item_id: r.retrieved_doc_ids or [] for r in ok}
            hit, unjudged = mean_hit_at_k(retrieved, qrels, top_k)
            if unjudged:
                notes.append(f"{unjudged} unjudged queries excluded from hit@k")
        return MetricSet(retrieval_hit_k=hit, **common)

    if qrels is not None:
        notes.append("qrels supplied for a ticket task: ignored")
    routed = [r for r in records if r.gold_label is not None]
    if len(routed) != len(records):
        notes.append(f"{len(records) - len(routed)} records without gold_label: routing metrics absent")
    return MetricSet(
        workflow_success=workflow_success_rate(records) if len(routed) == len(records) else None,
        policy_pass=policy_pass_rate(records),
        routing_accuracy=routing_accuracy(records) if routed and len(routed) == len(records) else None,
        macro_f1=macro_f1(records, labels) if routed and len(routed) == len(records) else None,
        escalation_rate=escalation_rate(records),
        **common,
    )
