from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from datetime import datetime, timezone

from ..artifacts import SCENARIOS, RunId
from ..errors import ConfigError
from ..metrics import normalize_task_kind

# plan fields that do not change results and may differ on resume
_NON_SEMANTIC = frozenset({"workers", "delay_ms", "timestamp", "timeout_s"})


@dataclass(frozen=True)
class RunPlan:
    suite: str
    dataset_id: str
    task_kind: str
    scenario: str
    seed: int
    sample_n: int
    model: str
    provider: str = "sim"
    endpoint: str | None = None
    prompt_version: str = "baseline"
    top_k: int | None = None
    workers: int = 4
    delay_ms: float = 100.0
    timeout_s: float = 60.0
    pipeline_version: str = "v1"
    index_id: str | None = None
    strata: str | None = None
    retriever: str | None = None
    reranker: str | None = None
    timestamp: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "task_kind", normalize_task_kind(self.task_kind))
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.sample_n < 1:
            raise ConfigError("sample_n must be >= 1")
        if self.delay_ms < 0:
            raise ConfigError("delay_ms must be >= 0")
        if self.task_kind == "retrieval" and self.top_k is None:
            raise ConfigError("retrieval plans need top_k")

    def fingerprint(self, dataset_digest: str) -> str:
        doc = {k: v for k, v in asdict(self).items() if k not in _NON_SEMANTIC}
        doc["dataset_digest"] = dataset_digest
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode("utf-8")).hexdigest()

    def run_id(self, timestamp: str) -> RunId:
        return RunId(
            suite=self.suite,
            dataset_id=self.dataset_id,
            model_id=self.model,
            scenario=self.scenario,
            top_k=self.top_k,
            seed=self.seed,
            timestamp=timestamp,
        )

    @property
    def slug(self) -> str:
        """Run id without the timestamp; names the in-progress checkpoint."""
        k = f"_k{self.top_k}" if self.top_k is not None else ""
        return f"{self.suite}_{self.dataset_id}_{self.model}_{self.scenario}{k}_seed{self.seed}_{self.prompt_version}"


def utc_timestamp(now: datetime | None = None) -> str:
    now = now or datetime.now(timezone.utc)
    return now.astimezone(timezone.utc).strftime("%Y%m%d_%H%M%S")
