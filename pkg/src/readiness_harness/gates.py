"""Candidate-vs-baseline regression gates for CI."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

from .analysis import filter_latest_valid
from .artifacts import RunLogRecord, RunReport
from .errors import ConfigError, DataError

# DeltaReport attribute -> metric name used in GateConfig.max_drop
DELTA_METRICS = {
    "d_workflow": "workflow_success",
    "d_policy": "policy_pass",
    "d_routing": "routing_accuracy",
}

DEFAULT_MAX_DROP = {"workflow_success": 0.05, "policy_pass": 0.01, "routing_accuracy": 0.05}


@dataclass(frozen=True)
class GateConfig:
    max_drop: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_MAX_DROP))
    max_p95_increase_ms: float = 500.0
    hard_policy_floor: float = 0.90
    hard_violation_ban: bool = True
    banned_violations: tuple[str, ...] = ("asks_for_password",)

    def __post_init__(self) -> None:
        for name, value in self.max_drop.items():
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"max_drop[{name}] must be a finite non-negative number")
        if not math.isfinite(self.max_p95_increase_ms):
            raise ConfigError("max_p95_increase_ms must be finite")
        if not 0.0 <= self.hard_policy_floor <= 1.0:
            raise ConfigError("hard_policy_floor must lie in [0, 1]")


@dataclass(frozen=True)
class DeltaReport:
    dataset_id: str
    variant: str
    d_workflow: float | None
    d_policy: float | None
    d_routing: float | None
    d_p95_ms: float | None

    def rounded(self, rate_decimals: int = 2) -> dict:
        def r(v, d):
            return None if v is None else round(v, d)
        return {
            "dataset_id": self.dataset_id,
            "variant": self.variant,
            "d_workflow": r(self.d_workflow, rate_decimals),
            "d_policy": r(self.d_policy, rate_decimals),
            "d_routing": r(self.d_routing, rate_decimals),
            "d_p95_ms": None if self.d_p95_ms is None else int(round(self.d_p95_ms)),
        }


@dataclass(frozen=True)
class GateReason:
    rule: str
    observed: float
    threshold: float


@dataclass(frozen=True)
class GateVerdict:
    outcome: str
    reasons: tuple[GateReason, ...] = ()

    def __post_init__(self) -> None:
        if self.outcome not in ("pass", "fail"):
            raise ValueError(f"outcome must be pass or fail, got {self.outcome!r}")
        if (self.outcome == "fail") != bool(self.reasons):
            raise ValueError("fail verdicts need reasons; pass verdicts must have none")

    @property
    def passed(self) -> bool:
        return self.outcome == "pass"

    def to_json(self, deltas: DeltaReport | None = None) -> str:
        doc = {"outcome": self.outcome, "reasons": [asdict(r) for r in self.reasons]}
        if deltas is not None:
            doc["deltas"] = asdict(deltas)
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _diff(candidate: float | None, baseline: float | None) -> float | None:
    if candidate is None or baseline is None:
        return None
    return candidate - baseline


def compute_deltas(baseline: RunReport, candidate: RunReport, variant: str | None = None) -> DeltaReport:
    if baseline.dataset_id != candidate.dataset_id:
        raise DataError(f"dataset mismatch: baseline {baseline.dataset_id!r} vs candidate {candidate.dataset_id!r}")
    if baseline.effective_task_kind != candidate.effective_task_kind:
        raise DataError("baseline and candidate are different task kinds")
    b, c = baseline.metrics, candidate.metrics
    return DeltaReport(
        dataset_id=candidate.dataset_id,
        variant=variant or candidate.prompt_version or "candidate",
        d_workflow=_diff(c.workflow_success, b.workflow_success),
        d_policy=_diff(c.policy_pass, b.policy_pass),
        d_routing=_diff(c.routing_accuracy, b.routing_accuracy),
        d_p95_ms=candidate.latency_p95_ms - baseline.latency_p95_ms,
    )


def violation_counts(records: Iterable[RunLogRecord]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for r in records:
        for v in r.policy_violations:
            counts[v] = counts.get(v, 0) + 1
    return dict(sorted(counts.items()))


def evaluate(
    deltas: DeltaReport,
    candidate: RunReport,
    config: GateConfig,
    records: Sequence[RunLogRecord] | None = None,
) -> GateVerdict:
    """Fail if any delta breaches its threshold or the candidate trips a hard gate.

    Record-level violations come from ``records`` when given, otherwise from
    the report's ``violation_counts``.
    """
    reasons: list[GateReason] = []
    for attr, metric in DELTA_METRICS.items():
        delta = getattr(deltas, attr)
        if delta is None:
            continue
        if metric not in config.max_drop:
            raise ConfigError(f"no max_drop threshold configured for present metric {metric!r}")
        limit = config.max_drop[metric]
        # tolerance guards against float noise on exactly-at-threshold drops
        if -delta > limit + 1e-12:
            reasons.append(GateReason(f"max_drop.{metric}", delta, -limit))
    if deltas.d_p95_ms is not None and deltas.d_p95_ms > config.max_p95_increase_ms:
        reasons.append(GateReason("max_p95_increase_ms", deltas.d_p95_ms, config.max_p95_increase_ms))

    policy = candidate.metrics.policy_pass
    if policy is not None and policy < config.hard_policy_floor:
        reasons.append(GateReason("hard_policy_floor", policy, config.hard_policy_floor))

    if config.hard_violation_ban:
        counts = violation_counts(records) if records is not None else dict(candidate.violation_counts or {})
        for name in config.banned_violations:
            if counts.get(name, 0) > 0:
                reasons.append(GateReason(f"hard_violation_ban.{name}", counts[name], 0))

    return GateVerdict("fail" if reasons else "pass", tuple(reasons))


def select_baseline(
    runs: Iterable[RunReport], dataset_id: str, baseline_variant: str = "baseline"
) -> RunReport:
    """Latest valid run of the baseline prompt variant for ``dataset_id``."""
    candidates = [
        r for r in runs if r.dataset_id == dataset_id and r.prompt_version == baseline_variant
    ]
    kept = filter_latest_valid(candidates).kept
    if not kept:
        raise DataError(f"no valid {baseline_variant!r} run for dataset {dataset_id!r}")
    return max(kept, key=lambda r: (r.timestamp, r.run_id_str))
