"""Quota-driven template generation and the LLM augmentation hook."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

from ..determinism import SplitMix64, fisher_yates, largest_remainder, salted_seed
from ..errors import ConfigError, DataError
from .bank import DEFAULT_BANK, Impact, Issue, TemplateBank

QUOTA_DIMENSIONS = ("queue", "language", "priority", "escalation")
DEFAULT_TOLERANCE = 0.02

TICKET_FIELDS = ("ticket_id", "language", "channel", "priority", "queue", "summary", "description",
                 "requester_type", "product_area", "policy_flags", "should_escalate", "escalation_reason")


@dataclass(frozen=True)
class SyntheticTicket:
    ticket_id: str
    language: str
    channel: str
    priority: str
    queue: str
    summary: str
    description: str
    requester_type: str
    product_area: str
    policy_flags: tuple[str, ...] = ()
    should_escalate: bool = False
    escalation_reason: str | None = None

    def to_dict(self) -> dict[str, Any]:
        doc = {name: getattr(self, name) for name in TICKET_FIELDS}
        doc["policy_flags"] = list(self.policy_flags)
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> SyntheticTicket:
        try:
            kwargs = {name: doc[name] for name in TICKET_FIELDS if name in doc}
            kwargs["policy_flags"] = tuple(doc.get("policy_flags") or ())
            return cls(**kwargs)
        except TypeError as exc:
            raise DataError(f"bad ticket record: {exc}") from None


def as_record(ticket: SyntheticTicket | Mapping[str, Any]) -> dict[str, Any]:
    return ticket.to_dict() if isinstance(ticket, SyntheticTicket) else dict(ticket)


def dimension_value(ticket: Mapping[str, Any], dimension: str) -> str:
    if dimension == "escalation":
        return "true" if ticket.get("should_escalate") else "false"
    return str(ticket.get(dimension))


@dataclass(frozen=True)
class QuotaSpec:
    """Target marginal distribution per quota dimension."""

    targets: dict[str, dict[str, float]]
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self) -> None:
        if not self.targets:
            raise ConfigError("quota spec needs at least one dimension")
        for dim, dist in self.targets.items():
            if dim not in QUOTA_DIMENSIONS:
                raise ConfigError(f"unknown quota dimension {dim!r}")
            if not dist or any(v < 0 for v in dist.values()):
                raise ConfigError(f"quota {dim!r} must be a non-empty non-negative distribution")
            if not math.isclose(math.fsum(dist.values()), 1.0, abs_tol=1e-9):
                raise ConfigError(f"quota {dim!r} sums to {math.fsum(dist.values())}, not 1")
        if not 0 <= self.tolerance <= 1:
            raise ConfigError("quota tolerance must lie in [0, 1]")

    @property
    def dimensions(self) -> tuple[str, ...]:
        return tuple(d for d in QUOTA_DIMENSIONS if d in self.targets)

    def cells(self) -> dict[tuple[str, ...], float]:
        """Joint target as the product of the marginals, in declaration order."""
        dims = self.dimensions
        out: dict[tuple[str, ...], float] = {}
        for combo in itertools.product(*(self.targets[d].items() for d in dims)):
            out[tuple(v for v, _ in combo)] = math.prod(p for _, p in combo)
        return out

    def to_dict(self) -> dict[str, Any]:
        return {"targets": {d: dict(self.targets[d]) for d in self.dimensions}, "tolerance": self.tolerance}

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> QuotaSpec:
        targets = doc.get("targets", doc)
        try:
            return cls(
                targets={str(d): {str(k): float(v) for k, v in dist.items()}
                         for d, dist in targets.items() if d != "tolerance"},
                tolerance=float(doc.get("tolerance", DEFAULT_TOLERANCE)),
            )
        except (AttributeError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad quota spec: {exc}") from None


def default_quotas() -> QuotaSpec:
    return QuotaSpec({
        "queue": {"technical_support": 0.4, "billing": 0.3, "account_access": 0.2, "general_inquiry": 0.1},
        "language": {"en": 0.5, "pt": 0.25, "es": 0.25},
        "priority": {"low": 0.3, "medium": 0.5, "high": 0.2},
        "escalation": {"false": 0.8, "true": 0.2},
    })


def _candidates(bank: TemplateBank, cell: Mapping[str, str]) -> list[tuple[Issue, Impact]]:
    pairs = []
    for issue in bank.issues:
        if "queue" in cell and issue.queue != cell["queue"]:
            continue
        for impact in bank.impacts:
            if "priority" in cell and impact.priority != cell["priority"]:
                continue
            if "escalation" in cell and ("true" if impact.escalate else "false") != cell["escalation"]:
                continue
            pairs.append((issue, impact))
    return pairs


def generate(
    n: int,
    quotas: QuotaSpec,
    seed: int,
    bank: TemplateBank = DEFAULT_BANK,
    *,
    id_prefix: str = "syntpl",
    max_retries: int = 50,
) -> list[SyntheticTicket]:
    """Template tickets whose quota cells hold largest-remainder counts of ``n``.

    Each cell draws from its own salted stream, so the result depends only on
    (n, quotas, seed, bank). Slot draws that would repeat an earlier
    summary+description are redrawn up to ``max_retries`` times.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    dims = quotas.dimensions
    if "language" in quotas.targets:
        unknown = set(quotas.targets["language"]) - set(bank.languages)
        if unknown:
            raise ConfigError(f"quota cell not covered by template bank: language={sorted(unknown)[0]}")
    targets = quotas.cells()
    counts = largest_remainder(n, targets)
    seen: set[tuple[str, str]] = set()
    tickets: list[dict[str, Any]] = []
    for key, count in counts.items():
        cell = dict(zip(dims, key))
        pairs = _candidates(bank, cell)
        if targets[key] > 0 and not pairs:
            raise ConfigError(f"quota cell not covered by template bank: {cell}")
        rng = SplitMix64(salted_seed(seed, "cell", *key))
        for _ in range(count):
            for _attempt in range(max_retries + 1):
                issue, impact = pairs[rng.below(len(pairs))]
                language = cell.get("language") or bank.languages[rng.below(len(bank.languages))]
                channel = bank.channels[rng.below(len(bank.channels))]
                requester = bank.requester_types[rng.below(len(bank.requester_types))]
                summary, description = bank.render(
                    issue, impact, language=language, channel=channel,
                    persistence=rng.below(3), users=1 + rng.below(bank.max_users), days=1 + rng.below(bank.max_days),
                )
                if (summary, description) not in seen:
                    break
            seen.add((summary, description))
            tickets.append({
                "language": language,
                "channel": channel,
                "priority": impact.priority,
                "queue": issue.queue,
                "summary": summary,
                "description": description,
                "requester_type": requester,
                "product_area": issue.product_area,
                "should_escalate": impact.escalate,
                "escalation_reason": impact.reason,
            })
    fisher_yates(tickets, SplitMix64(salted_seed(seed, "order")))
    return [SyntheticTicket(ticket_id=f"{id_prefix}_{seed}_{i:05d}", **t) for i, t in enumerate(tickets, 1)]


# LLM augmentation ---------------------------------------------------------

Generator = Callable[[Mapping[str, Any]], Sequence[Mapping[str, Any]]]


@dataclass
class AugmentRequest:
    cell: dict[str, str]
    count: int
    seed: int
    examples: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {"cell": self.cell, "count": self.count, "seed": self.seed, "examples": self.examples}


def augment(
    generator: Generator,
    n: int,
    quotas: QuotaSpec,
    seed: int,
    *,
    examples: Iterable[SyntheticTicket | Mapping[str, Any]] = (),
    examples_per_cell: int = 3,
    id_prefix: str = "synllm",
) -> list[dict[str, Any]]:
    """Ask an external generator for candidate tickets, cell by cell.

    The generator receives the target cell, a count, a seed and a few seed
    examples from that cell. Its output is returned as raw records with ids
    assigned; nothing is validated here, since candidates are meant to go
    through ``filter_tickets`` and ``audit`` like any other batch.
    """
    dims = quotas.dimensions
    pool = [as_record(e) for e in examples]
    out: list[dict[str, Any]] = []
    for key, count in largest_remainder(n, quotas.cells()).items():
        if not count:
            continue
        cell = dict(zip(dims, key))
        shots = [e for e in pool if all(dimension_value(e, d) == v for d, v in cell.items())][:examples_per_cell]
        request = AugmentRequest(cell, count, salted_seed(seed, "augment", *key), shots)
        for doc in generator(json.loads(json.dumps(request.to_dict()))):
            out.append(dict(doc))
    for i, doc in enumerate(out, 1):
        doc["ticket_id"] = f"{id_prefix}_{seed}_{i:05d}"
    return out
