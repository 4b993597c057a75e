"""Routing-output schema validation, keyword policy rules, and telemetry redaction."""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, NamedTuple, Sequence

from jsonschema import Draft7Validator

from .determinism import fnv1a64
from .errors import ConfigError

SCHEMA_MODES = ("v1", "v2")


@lru_cache(maxsize=None)
def _load_data(name: str) -> Any:
    return json.loads(resources.files("readiness_harness.data").joinpath(name).read_text("utf-8"))


def routing_schema(mode: str = "v1") -> dict[str, Any]:
    if mode not in SCHEMA_MODES:
        raise ConfigError(f"schema mode must be one of {SCHEMA_MODES}, got {mode!r}")
    schema = copy.deepcopy(_load_data("routing_schema.json"))
    if mode == "v2":
        schema["additionalProperties"] = False
    return schema


@lru_cache(maxsize=None)
def _validator(mode: str) -> Draft7Validator:
    return Draft7Validator(routing_schema(mode))


class ValidationResult(NamedTuple):
    valid: bool
    errors: list[str]


def validate_routing_output(document: str | bytes | Mapping[str, Any], mode: str = "v1") -> ValidationResult:
    """Check a routing output; v2 additionally rejects unknown fields."""
    validator = _validator(mode)
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except (json.JSONDecodeError, UnicodeDecodeError):
            return ValidationResult(False, ["not-json"])
    errors = sorted(
        f"{'/'.join(str(p) for p in err.absolute_path) or '<root>'}: {err.message}"
        for err in validator.iter_errors(document)
    )
    return ValidationResult(not errors, errors)


# ---------------------------------------------------------------------------
# policy rules


@dataclass(frozen=True)
class PolicyRule:
    name: str
    phrases: tuple[str, ...]
    exclusions: tuple[str, ...] = ()
    severity: str = "critical"

    def __post_init__(self) -> None:
        if self.severity not in ("critical", "warn"):
            raise ConfigError(f"rule {self.name!r}: severity must be critical or warn")
        if not self.phrases:
            raise ConfigError(f"rule {self.name!r} has no phrases")


def normalize_text(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip().casefold()


def _spans(haystack: str, needle: str) -> list[tuple[int, int]]:
    out = []
    start = haystack.find(needle)
    while start != -1:
        out.append((start, start + len(needle)))
        start = haystack.find(needle, start + 1)
    return out


def rule_matches(text: str, rule: PolicyRule) -> bool:
    norm = normalize_text(text)
    if not norm:
        return False
    excluded = [s for phrase in rule.exclusions for s in _spans(norm, normalize_text(phrase))]
    for phrase in rule.phrases:
        for start, end in _spans(norm, normalize_text(phrase)):
            if not any(es <= start and end <= ee for es, ee in excluded):
                return True
    return False


def check_policies(response_text: str, rules: Sequence[PolicyRule]) -> list[str]:
    if not rules:
        raise ConfigError("at least one policy rule is required")
    return [rule.name for rule in rules if rule_matches(response_text, rule)]


def rules_from_document(doc: Mapping[str, Any]) -> list[PolicyRule]:
    try:
        return [
            PolicyRule(
                name=r["name"],
                phrases=tuple(r["phrases"]),
                exclusions=tuple(r.get("exclusions", ())),
                severity=r.get("severity", "critical"),
            )
            for r in doc["rules"]
        ]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad policy rule file: {exc}") from None


def default_rules() -> list[PolicyRule]:
    return rules_from_document(_load_data("policy_rules.json"))


def load_rules(paths: Iterable[str | Path]) -> list[PolicyRule]:
    rules: list[PolicyRule] = []
    for path in paths:
        try:
            rules.extend(rules_from_document(json.loads(Path(path).read_text("utf-8"))))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load policy rules from {path}: {exc}") from None
    return rules


def critical_rule_names(rules: Sequence[PolicyRule]) -> tuple[str, ...]:
    return tuple(r.name for r in rules if r.severity == "critical")


# ---------------------------------------------------------------------------
# identifiers and redaction

DEFAULT_REDACT_FIELDS = frozenset({"text", "summary", "description", "query", "output", "body", "ticket_text"})


def hash_ticket_id(raw_id: str) -> str:
    """64-bit FNV-1a of the raw id as 16 hex characters."""
    return f"{fnv1a64(str(raw_id)):016x}"


def redact(record: Mapping[str, Any], denylist: Iterable[str] = DEFAULT_REDACT_FIELDS) -> dict[str, Any]:
    """Copy of ``record`` without denylisted free-text fields (recursively)."""
    deny = frozenset(denylist)

    def scrub(value: Any) -> Any:
        if isinstance(value, Mapping):
            return {k: scrub(v) for k, v in value.items() if k not in deny}
        if isinstance(value, list):
            return [scrub(v) for v in value]
        return value

    return scrub(record)


@dataclass
class PolicyChecker:
    """Bundles schema mode and rules for checking provider outputs."""

    rules: list[PolicyRule] = field(default_factory=default_rules)
    schema_mode: str = "v1"

    def check_routing(self, output: str) -> tuple[bool, dict[str, Any] | None, list[str]]:
        """Return (schema_valid, parsed document or None, violations).

        Self-reported ``policy_violations`` are merged with rule hits over the
        raw text. Unparseable output is a schema failure.
        """
        result = validate_routing_output(output, self.schema_mode)
        violations = set(check_policies(output, self.rules))
        parsed = None
        try:
            doc = json.loads(output)
            if isinstance(doc, dict):
                parsed = doc
                reported = doc.get("policy_violations")
                if isinstance(reported, list):
                    violations.update(v for v in reported if isinstance(v, str))
        except (json.JSONDecodeError, TypeError):
            pass
        return result.valid, parsed, sorted(violations)

    def check_text(self, output: str) -> list[str]:
        return sorted(check_policies(output, self.rules))
