"""Scenario-weighted readiness scores and weight ablations.

The score is the weighted mean of the dimensions present in a run, with the
weights renormalized over that present set. Cost and latency only count when
a budget maps them onto [0, 1]; otherwise they are reported as missing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .errors import ConfigError, DataError
from .metrics import DIMENSIONS, Budget, MetricSet, normalize_budget, normalize_task_kind

_BUILTIN = {
    "cost-first": (0.20, 0.20, 0.15, 0.15, 0.20, 0.10),
    "risk-first": (0.15, 0.25, 0.20, 0.15, 0.10, 0.15),
    "sla-first": (0.20, 0.15, 0.15, 0.10, 0.10, 0.30),
}

_APPLICABLE = {
    "ticket": frozenset({"workflow", "policy", "faithfulness", "cost", "sla"}),
    "retrieval": frozenset({"faithfulness", "retrieval", "cost", "sla"}),
}


@dataclass(frozen=True)
class ScenarioWeights:
    name: str
    workflow: float
    policy: float
    faithfulness: float
    retrieval: float
    cost: float
    sla: float

    def __post_init__(self) -> None:
        values = self.as_dict().values()
        if any(v < 0 or math.isnan(v) for v in values):
            raise ConfigError(f"weights for {self.name!r} must be non-negative")
        if abs(sum(values) - 1.0) > 1e-9:
            raise ConfigError(f"weights for {self.name!r} sum to {sum(values)!r}, expected 1")

    def as_dict(self) -> dict[str, float]:
        return {d: getattr(self, d) for d in DIMENSIONS}

    @classmethod
    def from_mapping(cls, name: str, weights: Mapping[str, float]) -> ScenarioWeights:
        unknown = set(weights) - set(DIMENSIONS)
        if unknown:
            raise ConfigError(f"unknown weight dimensions {sorted(unknown)}")
        return cls(name=name, **{d: float(weights.get(d, 0.0)) for d in DIMENSIONS})

    @classmethod
    def normalized(cls, name: str, weights: Mapping[str, float]) -> ScenarioWeights:
        """Build weights from non-negative values, rescaled to sum to 1."""
        total = math.fsum(weights.values())
        if total <= 0:
            raise ConfigError(f"weights for {name!r} have no positive mass")
        scaled = {d: w / total for d, w in weights.items()}
        # absorb rounding so the invariant holds to 1e-9
        drift = 1.0 - math.fsum(scaled.values())
        top = max(scaled, key=scaled.get)
        scaled[top] += drift
        return cls.from_mapping(name, scaled)


def builtin_weights(scenario: str) -> ScenarioWeights:
    try:
        values = _BUILTIN[scenario]
    except KeyError:
        raise ConfigError(f"unknown scenario {scenario!r}; expected one of {sorted(_BUILTIN)}") from None
    return ScenarioWeights(scenario, *values)


def applicable_dimensions(task_kind: str) -> frozenset[str]:
    return _APPLICABLE[normalize_task_kind(task_kind)]


class UnscorableRun(DataError):
    """No applicable dimension carries a value (and positive weight)."""


@dataclass(frozen=True)
class ScoreResult:
    value: float
    present: frozenset[str]
    missing: frozenset[str]
    scenario: str
    # normalized value per present dimension, for auditing
    components: Mapping[str, float] = field(default_factory=dict, compare=False)


def dimension_values(
    metrics: MetricSet, task_kind: str, budgets: Mapping[str, Budget] | None = None
) -> dict[str, float]:
    """Normalized [0, 1] value for every applicable dimension that is available."""
    budgets = budgets or {}
    values: dict[str, float] = {}
    for dim in sorted(applicable_dimensions(task_kind)):
        raw = metrics.dimension_value(dim)
        if raw is None:
            continue
        if dim == "cost":
            if "cost" not in budgets:
                continue
            raw = normalize_budget(raw, budgets["cost"])
        elif dim == "sla":
            if "latency" not in budgets:
                continue
            raw = normalize_budget(raw, budgets["latency"])
        values[dim] = raw
    return values


def score(
    metrics: MetricSet,
    weights: ScenarioWeights,
    task_kind: str,
    budgets: Mapping[str, Budget] | None = None,
) -> ScoreResult:
    applicable = applicable_dimensions(task_kind)
    values = dimension_values(metrics, task_kind, budgets)
    w = weights.as_dict()
    denom = math.fsum(w[d] for d in values)
    if not values or denom <= 0:
        raise UnscorableRun(
            f"unscorable run: no weighted dimension present among {sorted(applicable)}"
        )
    numer = math.fsum(w[d] * values[d] for d in values)
    value = min(1.0, max(0.0, numer / denom))
    present = frozenset(values)
    return ScoreResult(
        value=value,
        present=present,
        missing=applicable - present,
        scenario=weights.name,
        components=dict(sorted(values.items())),
    )


# ---------------------------------------------------------------------------
# ablation


@dataclass(frozen=True)
class AblationVariant:
    """Alternative ranking rule.

    ``weights=None`` means "rank with the base weights"; ``policy_gated``
    drops runs whose policy_pass is below 1 before ranking.
    """

    name: str
    weights: ScenarioWeights | None = None
    policy_gated: bool = False


def uniform_variant() -> AblationVariant:
    return AblationVariant("U", ScenarioWeights.normalized("uniform", {d: 1.0 for d in DIMENSIONS}))


def no_cost_variant(base: ScenarioWeights) -> AblationVariant:
    w = base.as_dict()
    w["cost"] = 0.0
    return AblationVariant("NC", ScenarioWeights.normalized(f"{base.name}-no-cost", w))


def policy_gated_variant() -> AblationVariant:
    return AblationVariant("PG", None, policy_gated=True)


def default_variants(base: ScenarioWeights) -> list[AblationVariant]:
    return [uniform_variant(), no_cost_variant(base), policy_gated_variant()]


@dataclass(frozen=True)
class Scorable:
    """Minimal view of a run for ranking."""

    run_id: str
    group: tuple
    metrics: MetricSet
    task_kind: str


def rank(
    runs: Iterable[Scorable],
    weights: ScenarioWeights,
    budgets: Mapping[str, Budget] | None = None,
    *,
    policy_gated: bool = False,
) -> list[tuple[str, float]]:
    """Runs ordered by score descending, ties by run_id; unscorable runs skipped."""
    scored = []
    for run in runs:
        if policy_gated and run.metrics.policy_pass is not None and run.metrics.policy_pass < 1.0:
            continue
        try:
            scored.append((run.run_id, score(run.metrics, weights, run.task_kind, budgets).value))
        except UnscorableRun:
            continue
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored


@dataclass(frozen=True)
class AblationRow:
    group: tuple
    variant: str
    top1_agree: bool
    top5_overlap: int
    top5_size: int
    n_runs: int

    @property
    def top1_mark(self) -> str:
        return "Y" if self.top1_agree else "N"

    @property
    def overlap_text(self) -> str:
        return f"{self.top5_overlap}/{self.top5_size}"


@dataclass(frozen=True)
class AblationReport:
    rows: list[AblationRow]
    variant_notes: dict[str, str]

    def for_group(self, group: tuple) -> list[AblationRow]:
        return [r for r in self.rows if r.group == group]


VARIANT_NOTES = {
    "U": "uniform weights over all dimensions (renormalized over present ones)",
    "NC": "base weights with cost zeroed, renormalized",
    "PG": "base weights after dropping runs with policy_pass < 1",
}


def weight_ablation(
    runs: Sequence[Scorable],
    base: ScenarioWeights | Callable[[tuple], ScenarioWeights],
    variants: Sequence[AblationVariant] | Callable[[ScenarioWeights], Sequence[AblationVariant]] | None = None,
    budgets: Mapping[str, Budget] | None = None,
) -> AblationReport:
    """Compare each variant's ranking with the base ranking, per group.

    ``base`` may be a function of the group key (e.g. scenario-specific
    weights); ``variants`` may be a function of the base weights.
    """
    groups: dict[tuple, list[Scorable]] = {}
    for run in runs:
        groups.setdefault(run.group, []).append(run)
    rows: list[AblationRow] = []
    notes = dict(VARIANT_NOTES)
    for group in sorted(groups, key=lambda g: tuple(str(x) for x in g)):
        members = groups[group]
        weights = base(group) if callable(base) else base
        group_variants = variants(weights) if callable(variants) else (variants or default_variants(weights))
        if not group_variants:
            raise ConfigError("ablation needs at least one variant")
        base_rank = rank(members, weights, budgets)
        if not base_rank:
            raise DataError(f"ablation group {group} has no scorable runs")
        base_top5 = {rid for rid, _ in base_rank[:5]}
        for variant in group_variants:
            vrank = rank(members, variant.weights or weights, budgets, policy_gated=variant.policy_gated)
            vtop5 = {rid for rid, _ in vrank[:5]}
            rows.append(AblationRow(
                group=group,
                variant=variant.name,
                top1_agree=bool(vrank) and vrank[0][0] == base_rank[0][0],
                top5_overlap=len(base_top5 & vtop5),
                top5_size=min(5, len(base_rank)),
                n_runs=len(members),
            ))
            notes.setdefault(variant.name, variant.weights.name if variant.weights else "base weights")
    return AblationReport(rows, notes)
