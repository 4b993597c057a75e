"""Latest-valid run filtering and seeded robustness statistics."""

from __future__ import annotations

import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, fields
from typing import Iterable, Mapping, NamedTuple, Sequence

from .artifacts import RunReport
from .errors import DataError
from .metrics import MetricSet


class AnalysisKey(NamedTuple):
    dataset_id: str
    scenario: str
    top_k: int | None
    seed: int
    model: str
    provider: str

    @classmethod
    def of(cls, run: RunReport) -> AnalysisKey:
        return cls(run.dataset_id, run.scenario, run.top_k, run.seed, run.model, run.provider)

    def sort_key(self) -> tuple:
        return (self.dataset_id, self.scenario, self.top_k is not None, self.top_k or 0,
                self.seed, self.model, self.provider)

    def without_seed(self) -> SeedGroup:
        return SeedGroup(self.dataset_id, self.scenario, self.top_k, self.model, self.provider)


class SeedGroup(NamedTuple):
    dataset_id: str
    scenario: str
    top_k: int | None
    model: str
    provider: str

    def sort_key(self) -> tuple:
        return (self.dataset_id, self.scenario, self.top_k is not None, self.top_k or 0,
                self.model, self.provider)


@dataclass(frozen=True)
class DroppedRun:
    run_id: str
    reason: str


@dataclass(frozen=True)
class FilterResult:
    kept: list[RunReport]
    dropped: list[DroppedRun]


def _modal_sample_n(runs: Sequence[RunReport]) -> int | None:
    counts = Counter(r.sample_n for r in runs if r.sample_n is not None)
    if not counts:
        return None
    # most common; ties go to the larger sample
    return max(counts, key=lambda n: (counts[n], n))


def filter_latest_valid(runs: Iterable[RunReport]) -> FilterResult:
    """Keep the latest valid run per :class:`AnalysisKey` and prompt version.

    Prompt variants (baseline, bias, policy) are different pipelines, so
    they never supersede one another. A run is invalid if ragas_status is not ``ok``, it has evaluator errors,
    or its sample_n differs from the modal sample_n of its (dataset,
    pipeline_version) group. Each dropped run carries exactly one reason.
    """
    dropped: list[DroppedRun] = []
    valid: list[RunReport] = []
    for run in runs:
        if run.ragas_status != "ok":
            dropped.append(DroppedRun(run.run_id_str, f"ragas_status={run.ragas_status}"))
        elif run.evaluator_error_count > 0:
            dropped.append(DroppedRun(run.run_id_str, f"evaluator_error_count={run.evaluator_error_count}"))
        else:
            valid.append(run)

    by_settings: dict[tuple, list[RunReport]] = defaultdict(list)
    for run in valid:
        by_settings[(run.dataset_id, run.pipeline_version)].append(run)
    consistent: list[RunReport] = []
    for key in sorted(by_settings, key=lambda k: (k[0], k[1] or "")):
        members = by_settings[key]
        modal = _modal_sample_n(members)
        for run in members:
            if modal is not None and run.sample_n is not None and run.sample_n != modal:
                dropped.append(DroppedRun(run.run_id_str, f"sample_n={run.sample_n} != modal {modal}"))
            else:
                consistent.append(run)

    latest: dict[tuple[AnalysisKey, str], RunReport] = {}
    for run in sorted(consistent, key=lambda r: (r.timestamp, r.run_id_str)):
        key = (AnalysisKey.of(run), run.prompt_version or "")
        previous = latest.get(key)
        if previous is not None:
            dropped.append(DroppedRun(previous.run_id_str, f"superseded by {run.run_id_str}"))
        latest[key] = run
    kept = [latest[k] for k in sorted(latest, key=lambda k: (k[0].sort_key(), k[1]))]
    dropped.sort(key=lambda d: d.run_id)
    return FilterResult(kept, dropped)


@dataclass(frozen=True)
class SeedStat:
    group: SeedGroup
    metric: str
    mean: float
    std: float | None
    n_runs: int
    seeds: tuple[int, ...] = ()


_METRIC_NAMES = frozenset(f.name for f in fields(MetricSet))


def metric_value(run: RunReport, metric: str, scores: Mapping[str, float] | None = None) -> float | None:
    if metric == "score":
        if scores is None:
            raise DataError("metric 'score' needs a scores mapping keyed by run id")
        return scores.get(run.run_id_str)
    if metric in ("p95_latency_ms", "p95"):
        return run.latency_p95_ms
    if metric not in _METRIC_NAMES:
        raise DataError(f"unknown metric {metric!r}")
    return getattr(run.metrics, metric)


def seed_stats(
    runs: Iterable[RunReport],
    metric: str,
    *,
    scores: Mapping[str, float] | None = None,
) -> list[SeedStat]:
    """Mean and sample (n-1) standard deviation per group across seeds.

    Runs where the metric is absent do not contribute. Single-run groups
    report ``std=None``.
    """
    if metric != "score" and metric not in ("p95_latency_ms", "p95") and metric not in _METRIC_NAMES:
        raise DataError(f"unknown metric {metric!r}")
    groups: dict[SeedGroup, list[tuple[int, float]]] = defaultdict(list)
    for run in runs:
        value = metric_value(run, metric, scores)
        if value is None:
            continue
        groups[AnalysisKey.of(run).without_seed()].append((run.seed, value))
    stats = []
    for group in sorted(groups, key=SeedGroup.sort_key):
        pairs = sorted(groups[group])
        values = [v for _, v in pairs]
        stats.append(SeedStat(
            group=group,
            metric=metric,
            mean=statistics.fmean(values) if len(values) > 1 else values[0],
            std=statistics.stdev(values) if len(values) > 1 else None,
            n_runs=len(values),
            seeds=tuple(s for s, _ in pairs),
        ))
    return stats


def mean_std(values: Sequence[float]) -> tuple[float, float | None]:
    """Arithmetic mean and sample std of a bare value list."""
    if not values:
        raise DataError("no values")
    ordered = sorted(values)
    if len(ordered) == 1:
        return ordered[0], None
    return statistics.fmean(ordered), statistics.stdev(ordered)
