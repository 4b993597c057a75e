from __future__ import annotations

from collections import defaultdict
from typing import Any, Mapping, Sequence

from ..determinism import SplitMix64, fisher_yates, largest_remainder, salted_seed
from ..errors import DataError


def sample_dataset(
    items: Sequence[Mapping[str, Any]],
    n: int,
    seed: int,
    strata: str | None = None,
    *,
    id_field: str = "id",
) -> list[Mapping[str, Any]]:
    """Deterministic sample of ``n`` items.

    Items are sorted by their stable id, shuffled with a splitmix64-driven
    Fisher-Yates pass and truncated. With ``strata`` each stratum gets a
    largest-remainder quota and is shuffled with its own salted seed; the
    result lists strata in sorted order.
    """
    if n < 0 or n > len(items):
        raise DataError(f"cannot sample {n} items from a dataset of {len(items)}")
    ids = [str(item[id_field]) for item in items]
    if len(set(ids)) != len(ids):
        raise DataError("item ids must be unique")
    ordered = sorted(items, key=lambda item: str(item[id_field]))
    if strata is None:
        return list(fisher_yates(ordered, SplitMix64(seed)))[:n]

    groups: dict[str, list[Mapping[str, Any]]] = defaultdict(list)
    for item in ordered:
        groups[str(item.get(strata))].append(item)
    names = sorted(groups)
    quotas = largest_remainder(n, {name: len(groups[name]) for name in names})
    out: list[Mapping[str, Any]] = []
    for name in names:
        quota = quotas[name]
        if quota > len(groups[name]):
            raise DataError(f"stratum {name!r} has {len(groups[name])} items, quota {quota}")
        members = fisher_yates(list(groups[name]), SplitMix64(salted_seed(seed, "stratum", name)))
        out.extend(members[:quota])
    return out
