import json

import pytest

from conftest import make_report
from readiness_harness.analysis import seed_stats
from readiness_harness.errors import ConfigError, DataError
from readiness_harness.export import (
    TABLES,
    export_coordinates,
    export_table,
    format_cell,
    latex_escape,
    pareto_rows,
    seed_stat_rows,
)
from readiness_harness.metrics import MetricSet
from readiness_harness.pareto import LATENCY_SCORE, FrontierExport, FrontierPoint, frontier


def test_column_orders():
    headers = {k: [c.header for c in cols] for k, cols in TABLES.items()}
    assert headers["pareto"] == ["Scenario", "Model", "k", "Seed", "Score", "Faithfulness", "Hit@k", "Cost (\\$)",
                                 "p95 latency (ms)"]
    assert headers["seed-stats"] == ["Dataset", "Model", "Scenario", "k", "Runs", "Faith.", "Hit@k", "p95"]
    assert headers["quality-comparison"][:4] == ["Dataset", "$n$", "Q", "JS"]
    assert headers["weight-ablation"] == ["Dataset", "Scenario", "Top-1 (U/NC/PG)", "Top-5 overlap (U/NC/PG)"]


def test_cells():
    assert format_cell(-0.0001, "num", 3, latex=False) == "0.000"
    assert format_cell(None, "num", 3, latex=True) == "--"
    assert format_cell((0.8083, 0.0221), "pm", 3, latex=True) == "0.808 $\\pm$ 0.022"
    assert format_cell(0.01144, "cost", 3, latex=False) == "0.0114"
    assert latex_escape("a_b & 5%") == "a\\_b \\& 5\\%"


def test_pareto_latex_and_csv():
    r = make_report(metrics=MetricSet(faithfulness=0.724, retrieval_hit_k=0.833, cost_usd=0.0114), p95=3379,
                    model="gpt-4.1-mini")
    rows = pareto_rows([r], {r.run_id_str: 0.83})
    tex = export_table("pareto", rows, "latex")
    assert "sla-first & gpt-4.1-mini & 5 & 42 & 0.830 & 0.724 & 0.833 & 0.0114 & 3379 \\\\" in tex
    assert tex.startswith("\\begin{tabular}{llrrrrrrr}")
    csv = export_table("pareto", rows, "csv")
    assert csv.splitlines()[1] == "sla-first,gpt-4.1-mini,5,42,0.830,0.724,0.833,0.0114,3379"
    assert json.loads(export_table("pareto", rows, "json"))["rows"][0]["score"] == 0.83
    with pytest.raises(DataError):
        export_table("pareto", [], "csv")
    with pytest.raises(ConfigError):
        export_table("nope", rows, "csv")


def test_seed_stat_rows():
    runs = [make_report(seed=s, metrics=MetricSet(faithfulness=v), p95=p)
            for s, v, p in ((1, 0.824, 3000), (2, 0.818, 3100), (3, 0.783, 3200))]
    rows = seed_stat_rows({m: seed_stats(runs, m) for m in ("faithfulness", "p95_latency_ms")})
    text = export_table("seed-stats", rows, "csv")
    assert text.splitlines()[1] == "beir_scifact,gpt-4.1,sla-first,5,3,0.808 ± 0.022,,3100 ± 100"


def test_coordinates_export():
    pts = [FrontierPoint("a", {"p95_latency_ms": 2722, "score": 0.814}),
           FrontierPoint("b", {"p95_latency_ms": 3000, "score": 0.7})]
    text = export_coordinates([FrontierExport(LATENCY_SCORE, ("scifact", "sla-first"), pts,
                                              frontier(pts, LATENCY_SCORE))], x_scale=0.001)
    assert "\\addplot[thick] coordinates {(2.722,0.814)};" in text
    with pytest.raises(DataError):
        export_coordinates([])
