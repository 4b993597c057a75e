"""Harness configuration: one JSON or YAML document, validated at load time.

Only endpoints and credentials may come from the environment:
``READINESS_ENDPOINT_<NAME>`` overrides ``endpoints[<name>]`` (name
upper-cased, dashes as underscores) and ``READINESS_API_KEY`` is read by the
HTTP provider. Everything else must be in the file.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Literal, Mapping, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError
from .gates import DEFAULT_MAX_DROP, GateConfig
from .metrics import DIMENSIONS, Budget, ModelPrice
from .policy import PolicyRule, default_rules, load_rules
from .scoring import ScenarioWeights, builtin_weights

SCENARIO_NAMES = ("cost-first", "risk-first", "sla-first")

# list prices per 1M tokens; models without an entry must be priced in the config
DEFAULT_PRICES = {
    "gpt-4.1": {"input_usd_per_1m": 2.00, "output_usd_per_1m": 8.00},
    "gpt-4.1-mini": {"input_usd_per_1m": 0.40, "output_usd_per_1m": 1.60},
}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BudgetModel(_Strict):
    lo: float
    hi: float


class PriceModel(_Strict):
    input_usd_per_1m: float = Field(ge=0)
    output_usd_per_1m: float = Field(ge=0)


class GateModel(_Strict):
    max_drop: dict[str, float] = Field(default_factory=lambda: dict(DEFAULT_MAX_DROP))
    max_p95_increase_ms: float = 500.0
    hard_policy_floor: float = 0.90
    hard_violation_ban: bool = True
    banned_violations: list[str] = Field(default_factory=lambda: ["asks_for_password"])


class HarnessConfig(_Strict):
    weights: dict[str, dict[str, float]] = Field(default_factory=dict)
    budgets: dict[Literal["cost", "latency"], BudgetModel] = Field(default_factory=dict)
    prices: dict[str, PriceModel] = Field(default_factory=lambda: {k: PriceModel(**v) for k, v in DEFAULT_PRICES.items()})
    gate: GateModel = Field(default_factory=GateModel)
    policy_rule_files: list[str] = Field(default_factory=list)
    schema_mode: Literal["v1", "v2"] = "v1"
    export_precision: int = Field(default=3, ge=0, le=10)
    endpoints: dict[str, str] = Field(default_factory=dict)
    workers: int = Field(default=4, ge=1)
    delay_ms: float = Field(default=100.0, ge=0)
    timeout_s: float = Field(default=60.0, gt=0)
    base_dir: Optional[str] = Field(default=None, exclude=True)

    @field_validator("weights")
    @classmethod
    def _check_weights(cls, value: dict[str, dict[str, float]]) -> dict[str, dict[str, float]]:
        for name, w in value.items():
            unknown = set(w) - set(DIMENSIONS)
            if unknown:
                raise ValueError(f"scenario {name!r}: unknown dimensions {sorted(unknown)}")
        return value

    # typed views -----------------------------------------------------------

    def scenario_weights(self, scenario: str) -> ScenarioWeights:
        if scenario in self.weights:
            return ScenarioWeights.from_mapping(scenario, self.weights[scenario])
        return builtin_weights(scenario)

    def budget_map(self) -> dict[str, Budget]:
        return {k: Budget(k, b.lo, b.hi) for k, b in self.budgets.items()}

    def price_table(self) -> dict[str, ModelPrice]:
        return {k: ModelPrice(p.input_usd_per_1m, p.output_usd_per_1m) for k, p in self.prices.items()}

    def gate_config(self) -> GateConfig:
        g = self.gate
        return GateConfig(max_drop=dict(g.max_drop), max_p95_increase_ms=g.max_p95_increase_ms,
                          hard_policy_floor=g.hard_policy_floor, hard_violation_ban=g.hard_violation_ban,
                          banned_violations=tuple(g.banned_violations))

    def policy_rules(self) -> list[PolicyRule]:
        if not self.policy_rule_files:
            return default_rules()
        base = Path(self.base_dir or ".")
        return load_rules(p if Path(p).is_absolute() else base / p for p in self.policy_rule_files)

    def endpoint(self, name: str) -> str:
        try:
            return self.endpoints[name]
        except KeyError:
            raise ConfigError(f"no endpoint named {name!r} in config") from None

    def validate_all(self) -> None:
        """Build every typed view once so bad values fail at startup."""
        for name in self.weights:
            self.scenario_weights(name)
        self.budget_map()
        self.price_table()
        self.gate_config()
        self.policy_rules()


def _env_overrides(cfg: dict[str, Any], environ: Mapping[str, str]) -> dict[str, Any]:
    prefix = "READINESS_ENDPOINT_"
    endpoints = dict(cfg.get("endpoints") or {})
    names = {name.upper().replace("-", "_"): name for name in endpoints}
    for key, value in environ.items():
        if key.startswith(prefix) and len(key) > len(prefix):
            env_name = key[len(prefix):]
            endpoints[names.get(env_name, env_name.lower().replace("_", "-"))] = value
    if endpoints:
        cfg = {**cfg, "endpoints": endpoints}
    return cfg


def parse_config(doc: Mapping[str, Any] | None, *, environ: Mapping[str, str] | None = None,
                 base_dir: str | None = None) -> HarnessConfig:
    raw = dict(doc or {})
    raw = _env_overrides(raw, os.environ if environ is None else environ)
    if base_dir is not None:
        raw["base_dir"] = base_dir
    try:
        cfg = HarnessConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    cfg.validate_all()
    return cfg


def load_config(path: str | Path | None, *, environ: Mapping[str, str] | None = None) -> HarnessConfig:
    """Load a config file (``.json``, ``.yaml`` or ``.yml``); ``None`` gives defaults."""
    if path is None:
        return parse_config({}, environ=environ)
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if doc is not None and not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return parse_config(doc, environ=environ, base_dir=str(path.parent))
