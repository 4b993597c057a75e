"""Stratified train/val/test splits, frozen regression subsets and dataset cards."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from ..artifacts import Manifest, content_digest, dumps_jsonl
from ..determinism import SplitMix64, fisher_yates, largest_remainder, salted_seed
from ..errors import ConfigError, DataError
from .generator import QuotaSpec, SyntheticTicket, as_record
from .quality import QualityReport

SPLIT_NAMES = ("train", "val", "test")
DEFAULT_RATIOS = (0.8, 0.1, 0.1)


@dataclass
class SplitResult:
    train: list[dict[str, Any]]
    val: list[dict[str, Any]]
    test: list[dict[str, Any]]
    regression: list[dict[str, Any]]
    manifest: Manifest

    def splits(self) -> dict[str, list[dict[str, Any]]]:
        return {"train": self.train, "val": self.val, "test": self.test}


def stratified_split(
    dataset: Sequence[SyntheticTicket | Mapping[str, Any]],
    seed: int,
    *,
    label_field: str = "queue",
    ratios: Sequence[float] = DEFAULT_RATIOS,
    regression_size: int | None = None,
    id_field: str = "ticket_id",
    source_uri: str = "",
) -> SplitResult:
    """Per-class largest-remainder split; the regression subset comes from test only.

    ``regression_size`` defaults to half of the test split (at least one item).
    The manifest digest covers the three splits in order.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1) > 1e-9:
        raise ConfigError("ratios must be three non-negative numbers summing to 1")
    records = [as_record(t) for t in dataset]
    if not records:
        raise DataError("cannot split an empty dataset")
    ids = [str(r[id_field]) for r in records]
    if len(set(ids)) != len(ids):
        raise DataError(f"duplicate {id_field} values")

    by_class: dict[str, list[dict[str, Any]]] = defaultdict(list)
    for r in records:
        by_class[str(r.get(label_field))].append(r)
    small = sorted(c for c, rows in by_class.items() if len(rows) < 3)
    if small:
        raise DataError(f"class {small[0]!r} has fewer than 3 items")

    shares = dict(zip(SPLIT_NAMES, ratios))
    out: dict[str, list[dict[str, Any]]] = {name: [] for name in SPLIT_NAMES}
    for label in sorted(by_class):
        rows = sorted(by_class[label], key=lambda r: str(r[id_field]))
        fisher_yates(rows, SplitMix64(salted_seed(seed, "split", label)))
        start = 0
        for name, count in largest_remainder(len(rows), shares).items():
            out[name].extend(rows[start:start + count])
            start += count
    for name in SPLIT_NAMES:
        out[name].sort(key=lambda r: str(r[id_field]))

    test = out["test"]
    size = max(1, len(test) // 2) if regression_size is None else regression_size
    if size > len(test):
        raise DataError(f"regression subset of {size} exceeds test split of {len(test)}")
    pool = list(test)
    fisher_yates(pool, SplitMix64(salted_seed(seed, "regression")))
    regression = sorted(pool[:size], key=lambda r: str(r[id_field]))

    digest = content_digest([*out["train"], *out["val"], *out["test"]])
    counts = {name: len(out[name]) for name in SPLIT_NAMES}
    manifest = Manifest(source_uri=source_uri, seed=seed, counts=counts, content_digest=digest)
    manifest.check(len(records))
    return SplitResult(out["train"], out["val"], out["test"], regression, manifest)


def write_splits(result: SplitResult) -> dict[str, str]:
    """File name -> contents for a split directory."""
    files = {f"{name}.jsonl": dumps_jsonl(rows) for name, rows in result.splits().items()}
    files["regression.jsonl"] = dumps_jsonl(result.regression)
    files["manifest.json"] = result.manifest.to_json()
    return files


def _fmt(value: float | int) -> str:
    return str(value) if isinstance(value, int) else f"{value:.4f}"


def write_dataset_card(
    manifest: Manifest,
    report: QualityReport | None,
    quotas: QuotaSpec,
    *,
    name: str = "synthetic-tickets",
    method: str = "template v1",
    license_note: str = "Generated from hand-written templates; no third-party text. Released under CC-BY-4.0.",
) -> str:
    """Markdown dataset card. Refuses to render without an audit."""
    if report is None:
        raise DataError("a dataset card needs an audit report")
    lines = [
        f"# Dataset card: {name}",
        "",
        "## Generation",
        f"- method: {method}",
        f"- seed: {manifest.seed}",
        f"- source: {manifest.source_uri or 'generated'}",
        f"- content digest: {manifest.content_digest}",
        "- labels (queue, priority, escalation) are fixed by template rules, not sampled",
        "",
        "## Splits",
        *(f"- {k}: {v}" for k, v in manifest.counts.items()),
        "",
        "## Quotas",
        f"- tolerance: {quotas.tolerance}",
        *(f"- {dim}: {json.dumps(quotas.targets[dim], sort_keys=True)}" for dim in quotas.dimensions),
        "",
        "## Audit",
        f"- n: {report.n}",
        *(f"- {k}: {_fmt(v)}" for k, v in report.metrics().items()),
        "",
        "Q is computed as 1 - JS, where JS is the base-2 Jensen-Shannon divergence between observed and "
        "target marginals, averaged over quota dimensions. This is a convention of this tool.",
        "",
        "## License",
        license_note,
        "",
        "## Known risks",
        "Template text is narrow and repetitive, so models tuned on it can overfit phrasing. "
        "The data is meant for regression checks and CI gates, not as a substitute for real tickets.",
        "",
    ]
    return "\n".join(lines)
