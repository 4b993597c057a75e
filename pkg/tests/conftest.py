from __future__ import annotations

import json
from pathlib import Path

import pytest

from readiness_harness.artifacts import RunId, RunReport
from readiness_harness.metrics import MetricSet

FIXTURES = Path(__file__).parent / "fixtures"

# acceptance lines collected for the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def load_json(name: str):
    return json.loads((FIXTURES / name).read_text("utf-8"))


def ticket_items(n: int, *, labels=("billing", "technical", "account", "general")) -> list[dict]:
    return [
        {"id": f"t{i:04d}", "text": f"ticket body number {i}", "label": labels[i % len(labels)],
         "escalate": i % 5 == 0}
        for i in range(n)
    ]


def make_report(
    *,
    dataset_id: str = "beir_scifact",
    scenario: str = "sla-first",
    model: str = "gpt-4.1",
    seed: int = 42,
    top_k: int | None = 5,
    timestamp: str = "20260220_085315",
    metrics: MetricSet | None = None,
    p95: float = 3000.0,
    **extra,
) -> RunReport:
    rid = RunId("azure_core", dataset_id, model, scenario, seed, timestamp, top_k)
    extra.setdefault("ragas_status", "ok")
    return RunReport(run_id=rid, dataset_id=dataset_id, scenario=scenario, provider="azure", model=model,
                     metrics=metrics or MetricSet(faithfulness=0.7), latency_p95_ms=p95, **extra)


@pytest.fixture
def frontier_runs():
    return load_json("frontier_runs.json")
