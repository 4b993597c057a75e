"""Filtering and quality audit for synthetic ticket batches."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import asdict, dataclass
from functools import lru_cache
from importlib import resources
from typing import Any, Iterable, Mapping, NamedTuple, Sequence

from jsonschema import Draft7Validator

from ..errors import ConfigError, DataError
from ..policy import PolicyRule, check_policies, default_rules, normalize_text
from .generator import QuotaSpec, SyntheticTicket, as_record, dimension_value

_TOKEN = re.compile(r"\w+", re.UNICODE)


@lru_cache(maxsize=1)
def _ticket_validator() -> Draft7Validator:
    text = resources.files("readiness_harness").joinpath("data/ticket_schema.json").read_text("utf-8")
    return Draft7Validator(json.loads(text))


def schema_errors(ticket: Mapping[str, Any]) -> list[str]:
    return sorted(e.message for e in _ticket_validator().iter_errors(dict(ticket)))


def policy_hits(ticket: Mapping[str, Any], rules: Sequence[PolicyRule]) -> list[str]:
    hits = set(f for f in ticket.get("policy_flags") or () if isinstance(f, str))
    text = f"{ticket.get('summary', '')} {ticket.get('description', '')}"
    hits.update(check_policies(text, rules))
    return sorted(hits)


def tokens(text: str) -> list[str]:
    return _TOKEN.findall(normalize_text(text))


def content_key(ticket: Mapping[str, Any]) -> str:
    return normalize_text(f"{ticket.get('summary', '')}\n{ticket.get('description', '')}")


def jaccard(a: set[str], b: set[str]) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


# filter -------------------------------------------------------------------


class Dropped(NamedTuple):
    ticket: dict[str, Any]
    reason: str


class FilterResult(NamedTuple):
    kept: list[dict[str, Any]]
    dropped: list[Dropped]


class _NearDupIndex:
    """Exact Jaccard >= t lookup against kept token sets using prefix filtering.

    Tokens are ordered rarest first over the whole batch. Two sets with
    Jaccard >= t must share a token within each set's first
    ``|s| - ceil(t*|s|) + 1`` tokens, so only sets sharing a prefix token are
    compared.
    """

    def __init__(self, threshold: float, corpus: Iterable[set[str]]) -> None:
        self.t = threshold
        freq = Counter(tok for s in corpus for tok in s)
        self.rank = {tok: i for i, (tok, _) in enumerate(sorted(freq.items(), key=lambda kv: (kv[1], kv[0])))}
        self.postings: dict[str, list[int]] = {}
        self.sets: list[set[str]] = []

    def _prefix(self, s: set[str]) -> list[str]:
        ordered = sorted(s, key=lambda tok: self.rank.get(tok, -1))
        return ordered[: len(ordered) - math.ceil(self.t * len(ordered) - 1e-12) + 1]

    def match(self, s: set[str]) -> float | None:
        if not s:
            return 1.0 if any(not k for k in self.sets) else None
        seen: set[int] = set()
        for tok in self._prefix(s):
            for idx in self.postings.get(tok, ()):
                if idx in seen:
                    continue
                seen.add(idx)
                other = self.sets[idx]
                if min(len(s), len(other)) < self.t * max(len(s), len(other)) - 1e-12:
                    continue
                sim = jaccard(s, other)
                if sim >= self.t:
                    return sim
        return None

    def add(self, s: set[str]) -> None:
        idx = len(self.sets)
        self.sets.append(s)
        for tok in self._prefix(s):
            self.postings.setdefault(tok, []).append(idx)


def filter_tickets(
    tickets: Sequence[SyntheticTicket | Mapping[str, Any]],
    similarity_threshold: float,
    *,
    rules: Sequence[PolicyRule] | None = None,
) -> FilterResult:
    """Drop schema failures, policy hits, exact and near duplicates.

    Checks run in that order and the first failing one names the reason.
    Duplicates are judged against tickets already kept, so the first of a
    group survives.
    """
    if not 0 <= similarity_threshold <= 1:
        raise ConfigError("similarity threshold must lie in [0, 1]")
    rules = list(rules) if rules is not None else default_rules()
    records = [as_record(t) for t in tickets]
    token_sets = [set(tokens(content_key(r))) for r in records]
    index = _NearDupIndex(similarity_threshold, token_sets) if similarity_threshold > 0 else None
    kept: list[dict[str, Any]] = []
    dropped: list[Dropped] = []
    exact: set[str] = set()
    for record, toks in zip(records, token_sets):
        if schema_errors(record):
            dropped.append(Dropped(record, "schema"))
            continue
        if policy_hits(record, rules):
            dropped.append(Dropped(record, "policy"))
            continue
        key = content_key(record)
        if key in exact:
            dropped.append(Dropped(record, "exact-dup"))
            continue
        if index is None:
            if kept:
                dropped.append(Dropped(record, "near-dup"))
                continue
        else:
            sim = index.match(toks)
            if sim is not None:
                dropped.append(Dropped(record, f"near-dup ({sim:.3f})"))
                continue
            index.add(toks)
        exact.add(key)
        kept.append(record)
    return FilterResult(kept, dropped)


# audit --------------------------------------------------------------------


def js_divergence(p: Mapping[str, float], q: Mapping[str, float]) -> float:
    """Base-2 Jensen-Shannon divergence of two distributions over named outcomes."""
    keys = sorted(set(p) | set(q))
    sp, sq = math.fsum(p.values()), math.fsum(q.values())
    if sp <= 0 or sq <= 0:
        raise ValueError("distributions need positive mass")
    total = []
    for k in keys:
        a, b = p.get(k, 0.0) / sp, q.get(k, 0.0) / sq
        m = (a + b) / 2
        if a > 0:
            total.append(0.5 * a * math.log2(a / m))
        if b > 0:
            total.append(0.5 * b * math.log2(b / m))
    return min(1.0, max(0.0, math.fsum(total)))


def quality_score(js: float) -> float:
    """Q is read as 1 - JS; the artifact's own convention, stated in the card."""
    return 1.0 - js


@dataclass(frozen=True)
class QualityReport:
    n: int
    js: float
    lex: float
    uniq: float
    esc: float
    sch: float
    pol: float
    dup: float
    viol: int
    js_by_dimension: dict[str, float]
    observed: dict[str, dict[str, float]]

    @property
    def q(self) -> float:
        return quality_score(self.js)

    def metrics(self) -> dict[str, float | int]:
        """The nine headline numbers, in table order."""
        return {"Q": self.q, "JS": self.js, "Lex": self.lex, "Uniq": self.uniq, "Esc": self.esc,
                "Sch": self.sch, "Pol": self.pol, "Dup": self.dup, "Viol": self.viol}

    def to_dict(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["q"] = self.q
        return doc


def audit(
    tickets: Sequence[SyntheticTicket | Mapping[str, Any]],
    quotas: QuotaSpec,
    *,
    rules: Sequence[PolicyRule] | None = None,
) -> QualityReport:
    """Quality numbers for a batch as given (run it before filtering)."""
    records = [as_record(t) for t in tickets]
    if not records:
        raise DataError("cannot audit an empty ticket set")
    rules = list(rules) if rules is not None else default_rules()
    n = len(records)

    js_by_dim: dict[str, float] = {}
    observed: dict[str, dict[str, float]] = {}
    viol = 0
    for dim in quotas.dimensions:
        counts = Counter(dimension_value(r, dim) for r in records)
        obs = {k: counts[k] / n for k in sorted(counts)}
        observed[dim] = obs
        target = quotas.targets[dim]
        js_by_dim[dim] = js_divergence(obs, target)
        for value in sorted(set(target) | set(obs)):
            if abs(obs.get(value, 0.0) - target.get(value, 0.0)) > quotas.tolerance + 1e-12:
                viol += 1
    js = math.fsum(js_by_dim.values()) / len(js_by_dim)

    desc_tokens = [tok for r in records for tok in tokens(str(r.get("description", "")))]
    lex = len(set(desc_tokens)) / len(desc_tokens) if desc_tokens else 0.0
    uniq = len({normalize_text(str(r.get("summary", ""))) for r in records}) / n
    esc = sum(1 for r in records if r.get("should_escalate") is True) / n
    sch = sum(1 for r in records if schema_errors(r)) / n
    pol = sum(1 for r in records if policy_hits(r, rules)) / n
    dup = (n - len({content_key(r) for r in records})) / n
    return QualityReport(n=n, js=js, lex=lex, uniq=uniq, esc=esc, sch=sch, pol=pol, dup=dup, viol=viol,
                         js_by_dimension=js_by_dim, observed=observed)
