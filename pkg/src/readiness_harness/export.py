"""Deterministic CSV, JSON, LaTeX and coordinate exporters."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

from .analysis import SeedStat
from .artifacts import RunReport
from .errors import ConfigError, DataError
from .gates import DeltaReport, GateVerdict
from .pareto import FrontierExport, format_coordinates
from .scoring import AblationReport
from .synth.quality import QualityReport


@dataclass(frozen=True)
class Column:
    header: str
    key: str
    kind: str = "num"  # text | int | num | ms | cost | pm | ms_pm


TABLES: dict[str, tuple[Column, ...]] = {
    "pareto": (
        Column("Scenario", "scenario", "text"),
        Column("Model", "model", "text"),
        Column("k", "top_k", "int"),
        Column("Seed", "seed", "int"),
        Column("Score", "score"),
        Column("Faithfulness", "faithfulness"),
        Column("Hit@k", "retrieval_hit_k"),
        Column("Cost (\\$)", "cost_usd", "cost"),
        Column("p95 latency (ms)", "p95_latency_ms", "ms"),
    ),
    "seed-stats": (
        Column("Dataset", "dataset", "text"),
        Column("Model", "model", "text"),
        Column("Scenario", "scenario", "text"),
        Column("k", "top_k", "int"),
        Column("Runs", "runs", "int"),
        Column("Faith.", "faithfulness", "pm"),
        Column("Hit@k", "retrieval_hit_k", "pm"),
        Column("p95", "p95_latency_ms", "ms_pm"),
    ),
    "ticket-regressions": (
        Column("Dataset", "dataset", "text"),
        Column("Variant", "variant", "text"),
        Column("$\\Delta$Workflow", "d_workflow"),
        Column("$\\Delta$Policy", "d_policy"),
        Column("$\\Delta$Routing", "d_routing"),
        Column("$\\Delta$p95 (ms)", "d_p95_ms", "ms"),
        Column("Gate", "gate", "text"),
    ),
    "quality-comparison": (
        Column("Dataset", "dataset", "text"),
        Column("$n$", "n", "int"),
        Column("Q", "Q"),
        Column("JS", "JS"),
        Column("Lex", "Lex"),
        Column("Uniq", "Uniq"),
        Column("Esc", "Esc"),
        Column("Sch", "Sch"),
        Column("Pol", "Pol"),
        Column("Dup", "Dup"),
        Column("Viol", "Viol", "int"),
    ),
    "weight-ablation": (
        Column("Dataset", "dataset", "text"),
        Column("Scenario", "scenario", "text"),
        Column("Top-1 (U/NC/PG)", "top1", "text"),
        Column("Top-5 overlap (U/NC/PG)", "top5", "text"),
    ),
}

TABLE_KINDS = tuple(TABLES)

_LATEX_ESCAPES = {"\\": r"\textbackslash{}", "&": r"\&", "%": r"\%", "$": r"\$", "#": r"\#",
                  "_": r"\_", "{": r"\{", "}": r"\}", "~": r"\textasciitilde{}", "^": r"\textasciicircum{}"}


def _columns(kind: str) -> tuple[Column, ...]:
    try:
        return TABLES[kind]
    except KeyError:
        raise ConfigError(f"unknown table kind {kind!r}; expected one of {sorted(TABLES)}") from None


def latex_escape(text: str) -> str:
    return "".join(_LATEX_ESCAPES.get(ch, ch) for ch in text)


def _fixed(value: float, decimals: int) -> str:
    text = f"{value:.{decimals}f}"
    # never print a negative zero
    if text.startswith("-") and float(text) == 0:
        text = text[1:]
    return text


def format_cell(value: Any, kind: str, precision: int, *, latex: bool) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "--" if latex else ""
    if kind == "text":
        return latex_escape(str(value)) if latex else str(value)
    if kind == "int":
        return str(int(value))
    if kind == "ms":
        return _fixed(float(value), 0)
    if kind == "cost":
        return _fixed(float(value), max(precision, 4))
    if kind in ("pm", "ms_pm"):
        mean, std = value
        decimals = 0 if kind == "ms_pm" else precision
        if std is None:
            return _fixed(mean, decimals)
        sep = " $\\pm$ " if latex else " ± "
        return f"{_fixed(mean, decimals)}{sep}{_fixed(std, decimals)}"
    return _fixed(float(value), precision)


def export_latex(kind: str, rows: Sequence[Mapping[str, Any]], precision: int = 3) -> str:
    """A booktabs ``tabular`` with the column order of the named table kind."""
    cols = _columns(kind)
    if not rows:
        raise DataError(f"no rows to export for {kind!r}")
    spec = "".join("l" if c.kind == "text" else "r" for c in cols)
    lines = [f"\\begin{{tabular}}{{{spec}}}", "\\toprule", " & ".join(c.header for c in cols) + " \\\\",
             "\\midrule"]
    for row in rows:
        lines.append(" & ".join(format_cell(row.get(c.key), c.kind, precision, latex=True) for c in cols) + " \\\\")
    lines += ["\\bottomrule", "\\end{tabular}", ""]
    return "\n".join(lines)


def export_csv(kind: str, rows: Sequence[Mapping[str, Any]], precision: int = 3) -> str:
    cols = _columns(kind)
    if not rows:
        raise DataError(f"no rows to export for {kind!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([c.key for c in cols])
    for row in rows:
        writer.writerow([format_cell(row.get(c.key), c.kind, precision, latex=False) for c in cols])
    return buf.getvalue()


def _jsonable(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    return value


def export_json(kind: str, rows: Sequence[Mapping[str, Any]]) -> str:
    cols = _columns(kind)
    if not rows:
        raise DataError(f"no rows to export for {kind!r}")
    doc = {"table": kind, "columns": [c.key for c in cols],
           "rows": [{c.key: _jsonable(row.get(c.key)) for c in cols} for row in rows]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def export_table(kind: str, rows: Sequence[Mapping[str, Any]], fmt: str, precision: int = 3) -> str:
    if fmt == "latex":
        return export_latex(kind, rows, precision)
    if fmt == "csv":
        return export_csv(kind, rows, precision)
    if fmt == "json":
        return export_json(kind, rows)
    raise ConfigError(f"format {fmt!r} does not apply to tables")


def export_coordinates(exports: Iterable[FrontierExport], *, x_scale: float = 1.0, decimals: int = 3) -> str:
    """pgfplots ``\\addplot`` blocks: each group's scatter, then its frontier polyline."""
    blocks = []
    for exp in exports:
        x, y = exp.objectives[0].metric, exp.objectives[1].metric
        label = " / ".join(str(g) for g in exp.group) or "all"
        blocks.append(f"% {label}: scatter")
        blocks.append(f"\\addplot[only marks] coordinates {{{format_coordinates(exp.scatter, x, y, x_scale=x_scale, decimals=decimals)}}};")
        blocks.append(f"% {label}: frontier")
        blocks.append(f"\\addplot[thick] coordinates {{{format_coordinates(exp.frontier, x, y, x_scale=x_scale, decimals=decimals)}}};")
    if not blocks:
        raise DataError("no frontier groups to export")
    return "\n".join(blocks) + "\n"


# row builders -------------------------------------------------------------


def pareto_rows(reports: Sequence[RunReport], scores: Mapping[str, float]) -> list[dict[str, Any]]:
    rows = []
    for r in reports:
        rows.append({
            "scenario": r.scenario,
            "model": r.model,
            "top_k": r.top_k,
            "seed": r.seed,
            "score": scores.get(r.run_id_str),
            "faithfulness": r.metrics.faithfulness,
            "retrieval_hit_k": r.metrics.retrieval_hit_k,
            "cost_usd": r.metrics.cost_usd,
            "p95_latency_ms": r.latency_p95_ms,
        })
    return rows


def seed_stat_rows(stats: Mapping[str, Sequence[SeedStat]]) -> list[dict[str, Any]]:
    """Merge per-metric SeedStat lists (keyed by metric name) into one row per group."""
    key_map = {"faithfulness": "faithfulness", "retrieval_hit_k": "retrieval_hit_k",
               "p95_latency_ms": "p95_latency_ms", "p95": "p95_latency_ms"}
    merged: dict[Any, dict[str, Any]] = {}
    for metric, entries in stats.items():
        column = key_map.get(metric, metric)
        for st in entries:
            row = merged.setdefault(st.group, {
                "dataset": st.group.dataset_id, "model": st.group.model, "scenario": st.group.scenario,
                "top_k": st.group.top_k, "runs": 0,
            })
            row["runs"] = max(row["runs"], st.n_runs)
            row[column] = (st.mean, st.std)
    return [merged[g] for g in sorted(merged, key=lambda g: g.sort_key())]


def regression_rows(pairs: Iterable[tuple[DeltaReport, GateVerdict]]) -> list[dict[str, Any]]:
    rows = []
    for delta, verdict in pairs:
        rows.append({"dataset": delta.dataset_id, "variant": delta.variant, "d_workflow": delta.d_workflow,
                     "d_policy": delta.d_policy, "d_routing": delta.d_routing, "d_p95_ms": delta.d_p95_ms,
                     "gate": verdict.outcome})
    return rows


def quality_rows(reports: Iterable[tuple[str, QualityReport]]) -> list[dict[str, Any]]:
    return [{"dataset": name, "n": rep.n, **rep.metrics()} for name, rep in reports]


def ablation_rows(report: AblationReport, order: Sequence[str] = ("U", "NC", "PG")) -> list[dict[str, Any]]:
    groups: dict[tuple, dict[str, Any]] = {}
    for row in report.rows:
        groups.setdefault(row.group, {})[row.variant] = row
    out = []
    for group in sorted(groups, key=lambda g: tuple(str(x) for x in g)):
        variants = [groups[group][v] for v in order if v in groups[group]]
        out.append({
            "dataset": str(group[0]) if group else "",
            "scenario": str(group[1]) if len(group) > 1 else "",
            "top1": "/".join(v.top1_mark for v in variants),
            "top5": " | ".join(v.overlap_text for v in variants),
        })
    return out
