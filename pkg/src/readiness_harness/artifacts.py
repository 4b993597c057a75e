"""Run artifacts: run ids, report.json, summary.csv, run logs and manifests.

Golden files must survive ``write(parse(x)) == x`` byte for byte, so parsers
keep the source document (key order, unknown keys, explicit nulls) and the
writers merge current values back into it.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import logging
import os
import re
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, NamedTuple

from .errors import DataError
from .metrics import RATE_FIELDS, MetricSet

logger = logging.getLogger(__name__)

SCENARIOS = ("cost-first", "risk-first", "sla-first")
RAGAS_STATUSES = ("ok", "error", "missing")

REPORT_FILE = "report.json"
SUMMARY_FILE = "summary.csv"
RUNLOG_FILE = "runlog.jsonl"
SPANS_FILE = "spans.jsonl"
CHECKPOINT_FILE = "checkpoint.jsonl"
MANIFEST_FILE = "manifest.json"

# ---------------------------------------------------------------------------
# run ids

_SEGMENT = r"[A-Za-z0-9.\-]+"
_TIMESTAMP_RE = re.compile(r"^\d{8}_\d{6}$")
_RUN_ID_RE = re.compile(
    rf"^(?P<suite>{_SEGMENT}_{_SEGMENT})"
    rf"_(?P<dataset>{_SEGMENT}(?:_{_SEGMENT})*?)"
    rf"_(?P<model>{_SEGMENT})"
    rf"_(?P<scenario>cost-first|risk-first|sla-first)"
    rf"(?:_k(?P<top_k>[1-9]\d*))?"
    rf"_seed(?P<seed>0|[1-9]\d*)"
    rf"_(?P<timestamp>\d{{8}}_\d{{6}})$"
)


@dataclass(frozen=True, order=True)
class RunId:
    """Identity of one run.

    Grammar: ``{suite}_{dataset}_{model}_{scenario}[_k{top_k}]_seed{seed}_{timestamp}``.
    The suite is exactly two underscore-free segments (``azure_core``), the
    model has no underscore, and the dataset may contain underscores; the
    scenario enum anchors the right-hand side.
    """

    suite: str
    dataset_id: str
    model_id: str
    scenario: str
    seed: int
    timestamp: str
    top_k: int | None = None

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise DataError(f"invalid scenario {self.scenario!r}")
        if not _TIMESTAMP_RE.match(self.timestamp):
            raise DataError(f"timestamp {self.timestamp!r} is not YYYYMMDD_HHMMSS")
        if not re.fullmatch(rf"{_SEGMENT}_{_SEGMENT}", self.suite):
            raise DataError(f"suite {self.suite!r} must be two '_'-joined segments, e.g. azure_core")
        if not re.fullmatch(_SEGMENT, self.model_id) or self.model_id in SCENARIOS:
            raise DataError(f"model id {self.model_id!r} must be one segment without '_'")
        if not re.fullmatch(rf"{_SEGMENT}(?:_{_SEGMENT})*", self.dataset_id):
            raise DataError(f"invalid dataset id {self.dataset_id!r}")
        if any(seg in SCENARIOS for seg in self.dataset_id.split("_")):
            raise DataError(f"dataset id {self.dataset_id!r} contains a scenario segment")
        if self.top_k is not None and (isinstance(self.top_k, bool) or self.top_k < 1):
            raise DataError(f"top_k must be a positive integer, got {self.top_k!r}")
        if isinstance(self.seed, bool) or self.seed < 0:
            raise DataError(f"seed must be non-negative, got {self.seed!r}")

    def __str__(self) -> str:
        return render_run_id(self)


def render_run_id(parts: RunId) -> str:
    k = f"_k{parts.top_k}" if parts.top_k is not None else ""
    return (
        f"{parts.suite}_{parts.dataset_id}_{parts.model_id}_{parts.scenario}"
        f"{k}_seed{parts.seed}_{parts.timestamp}"
    )


def parse_run_id(text: str) -> RunId:
    m = _RUN_ID_RE.match(text)
    if not m:
        raise DataError(f"run id {text!r} does not match the run-id grammar")
    top_k = m.group("top_k")
    return RunId(
        suite=m.group("suite"),
        dataset_id=m.group("dataset"),
        model_id=m.group("model"),
        scenario=m.group("scenario"),
        top_k=int(top_k) if top_k else None,
        seed=int(m.group("seed")),
        timestamp=m.group("timestamp"),
    )


# ---------------------------------------------------------------------------
# report.json

# fields stored under "extra"; paired with the value that makes them implicit
_EXTRA_FIELDS = (
    "task_kind",
    "top_k",
    "seed",
    "sample_n",
    "pipeline_version",
    "prompt_version",
    "retriever",
    "reranker",
    "ragas_status",
    "evaluator_error_count",
    "violation_counts",
)


@dataclass
class RunReport:
    run_id: RunId
    dataset_id: str
    scenario: str
    provider: str
    model: str
    metrics: MetricSet
    latency_p95_ms: float
    top_k: int | None = None
    seed: int | None = None
    sample_n: int | None = None
    pipeline_version: str | None = None
    prompt_version: str | None = None
    retriever: str | None = None
    reranker: str | None = None
    task_kind: str | None = None
    ragas_status: str = "missing"
    evaluator_error_count: int = 0
    violation_counts: dict[str, int] | None = None
    # source document; keeps key order, unknown keys and explicit nulls
    source: dict[str, Any] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.top_k is None:
            self.top_k = self.run_id.top_k
        if self.seed is None:
            self.seed = self.run_id.seed
        self.validate()

    def validate(self) -> None:
        rid = self.run_id
        mismatches = [
            name
            for name, mine, theirs in (
                ("dataset_id", self.dataset_id, rid.dataset_id),
                ("scenario", self.scenario, rid.scenario),
                ("top_k", self.top_k, rid.top_k),
                ("seed", self.seed, rid.seed),
            )
            if mine != theirs
        ]
        if mismatches:
            raise DataError(f"run {rid}: fields disagree with run_id: {', '.join(mismatches)}")
        if self.ragas_status not in RAGAS_STATUSES:
            raise DataError(f"ragas_status must be one of {RAGAS_STATUSES}, got {self.ragas_status!r}")
        if self.evaluator_error_count < 0:
            raise DataError("evaluator_error_count must be >= 0")
        if self.latency_p95_ms < 0:
            raise DataError("p95 latency must be non-negative")
        if self.sample_n is not None and self.sample_n < 1:
            raise DataError("sample_n must be positive")
        if self.retriever not in (None, "bm25", "dense"):
            raise DataError(f"retriever must be bm25 or dense, got {self.retriever!r}")
        if self.reranker not in (None, "on", "off"):
            raise DataError(f"reranker must be on or off, got {self.reranker!r}")

    @property
    def run_id_str(self) -> str:
        return render_run_id(self.run_id)

    @property
    def timestamp(self) -> str:
        return self.run_id.timestamp

    @property
    def effective_task_kind(self) -> str:
        if self.task_kind:
            return self.task_kind
        return "retrieval" if self.top_k is not None else "ticket"

    def metrics_with_latency(self) -> MetricSet:
        """MetricSet with p95 filled from the report's latency block."""
        if self.metrics.p95_latency_ms is not None:
            return self.metrics
        return replace(self.metrics, p95_latency_ms=self.latency_p95_ms)


_REQUIRED_REPORT_KEYS = ("run_id", "dataset_id", "scenario", "llm", "metrics", "latency_ms")
_METRIC_KEYS = tuple(f for f in MetricSet.field_names() if f != "p95_latency_ms")


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DataError(f"{where}: expected a number, got {value!r}")
    return value


def report_from_dict(doc: dict[str, Any]) -> RunReport:
    for key in _REQUIRED_REPORT_KEYS:
        if key not in doc:
            raise DataError(f"report missing required key {key!r}")
    llm = doc["llm"]
    if not isinstance(llm, dict) or "provider" not in llm or "model" not in llm:
        raise DataError("report 'llm' must carry provider and model")
    latency = doc["latency_ms"]
    if not isinstance(latency, dict) or "p95" not in latency:
        raise DataError("report 'latency_ms' must carry p95")
    raw_metrics = doc["metrics"]
    if not isinstance(raw_metrics, dict):
        raise DataError("report 'metrics' must be an object")
    metric_values = {}
    for key, value in raw_metrics.items():
        if key not in _METRIC_KEYS:
            continue  # unknown metric keys stay in the source document
        if value is not None:
            metric_values[key] = _number(value, f"metrics.{key}")
    metrics = MetricSet(**metric_values)
    extra = doc.get("extra") or {}
    if not isinstance(extra, dict):
        raise DataError("report 'extra' must be an object")
    known_extra = {k: extra[k] for k in _EXTRA_FIELDS if extra.get(k) is not None}
    report = RunReport(
        run_id=parse_run_id(doc["run_id"]),
        dataset_id=doc["dataset_id"],
        scenario=doc["scenario"],
        provider=llm["provider"],
        model=llm["model"],
        metrics=metrics,
        latency_p95_ms=_number(latency["p95"], "latency_ms.p95"),
        source=copy.deepcopy(doc),
        **known_extra,
    )
    return report


def parse_report(data: bytes | str) -> RunReport:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataError(f"report is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise DataError("report must be a JSON object")
    return report_from_dict(doc)


def _implicit_extra(report: RunReport) -> dict[str, Any]:
    """Values that need not be written because parsing would recover them."""
    return {
        "top_k": report.run_id.top_k,
        "seed": report.run_id.seed,
        "ragas_status": "missing",
        "evaluator_error_count": 0,
    }


def _fmt_rate(value: float) -> float:
    return round(value, 4)


def _fmt_ms(value: float) -> int | float:
    return int(round(value))


def report_to_dict(report: RunReport) -> dict[str, Any]:
    doc: dict[str, Any] = copy.deepcopy(report.source) if report.source else {}
    doc["run_id"] = report.run_id_str
    doc["dataset_id"] = report.dataset_id
    doc["scenario"] = report.scenario
    llm = doc.get("llm") if isinstance(doc.get("llm"), dict) else {}
    llm["provider"] = report.provider
    llm["model"] = report.model
    doc["llm"] = llm

    metrics = doc.get("metrics") if isinstance(doc.get("metrics"), dict) else {}
    for key in _METRIC_KEYS:
        value = getattr(report.metrics, key)
        if value is not None:
            metrics[key] = _fmt_rate(value) if key in RATE_FIELDS else round(value, 6)
        elif key in metrics:
            metrics[key] = None  # explicit null stays null, never 0
    doc["metrics"] = metrics

    latency = doc.get("latency_ms") if isinstance(doc.get("latency_ms"), dict) else {}
    latency["p95"] = _fmt_ms(report.latency_p95_ms)
    doc["latency_ms"] = latency

    implicit = _implicit_extra(report)
    extra = doc.get("extra") if isinstance(doc.get("extra"), dict) else {}
    for key in _EXTRA_FIELDS:
        value = getattr(report, key)
        if value is None or (key in implicit and value == implicit[key] and key not in extra):
            continue
        extra[key] = value
    if extra:
        doc["extra"] = extra
    return doc


def dumps_document(doc: dict[str, Any]) -> str:
    """One top-level key per line, nested values inline (report.json layout)."""
    if not doc:
        return "{}\n"
    lines = [
        f"  {json.dumps(k, ensure_ascii=False)}: "
        f"{json.dumps(v, ensure_ascii=False, separators=(', ', ': '))}"
        for k, v in doc.items()
    ]
    return "{\n" + ",\n".join(lines) + "\n}\n"


def write_report(report: RunReport) -> bytes:
    return dumps_document(report_to_dict(report)).encode("utf-8")


# ---------------------------------------------------------------------------
# summary.csv

SUMMARY_HEADER = "run_id,dataset_id,scenario,top_k,score,faithfulness,answer_relevance,p95_latency_ms"
SUMMARY_COLUMNS = tuple(SUMMARY_HEADER.split(","))
DEFAULT_RATE_DECIMALS = 3


@dataclass
class SummaryRow:
    run_id: str
    dataset_id: str
    scenario: str
    top_k: int | None
    score: float
    faithfulness: float | None
    answer_relevance: float | None
    p95_latency_ms: float
    # decimals used when rendering each rate; parsing records the source's
    decimals: dict[str, int] = field(default_factory=dict, compare=False, repr=False)


class SummaryRowError(DataError):
    def __init__(self, lineno: int, message: str) -> None:
        super().__init__(f"summary.csv line {lineno}: {message}")
        self.lineno = lineno


def _decimals(text: str) -> int:
    return len(text.split(".", 1)[1]) if "." in text else 0


def _parse_float(text: str, column: str, lineno: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise SummaryRowError(lineno, f"{column} {text!r} is not numeric") from None


def parse_summary_csv(
    data: bytes | str, *, diagnostics: list[str] | None = None
) -> list[SummaryRow]:
    """Parse summary.csv. A bad header rejects the file; a bad row is skipped
    with a diagnostic when ``diagnostics`` is given, otherwise it raises."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    lines = text.split("\n")
    if lines[0].rstrip("\r") != SUMMARY_HEADER:
        raise DataError(f"summary.csv header mismatch: {lines[0]!r}")
    rows: list[SummaryRow] = []
    reader = csv.reader(io.StringIO("\n".join(lines[1:])))
    for offset, cells in enumerate(reader):
        lineno = offset + 2
        if not cells:
            continue
        try:
            if len(cells) != len(SUMMARY_COLUMNS):
                raise SummaryRowError(lineno, f"expected {len(SUMMARY_COLUMNS)} fields, got {len(cells)}")
            run_id, dataset_id, scenario, top_k, score, faith, relevance, p95 = cells
            decimals = {}
            for name, raw in (("score", score), ("faithfulness", faith), ("answer_relevance", relevance),
                              ("p95_latency_ms", p95)):
                if raw:
                    decimals[name] = _decimals(raw)
            if top_k and not top_k.isdigit():
                raise SummaryRowError(lineno, f"top_k {top_k!r} is not an integer")
            rows.append(SummaryRow(
                run_id=run_id,
                dataset_id=dataset_id,
                scenario=scenario,
                top_k=int(top_k) if top_k else None,
                score=_parse_float(score, "score", lineno),
                faithfulness=_parse_float(faith, "faithfulness", lineno) if faith else None,
                answer_relevance=_parse_float(relevance, "answer_relevance", lineno) if relevance else None,
                p95_latency_ms=_parse_float(p95, "p95_latency_ms", lineno),
                decimals=decimals,
            ))
        except SummaryRowError as exc:
            if diagnostics is None:
                raise
            diagnostics.append(str(exc))
    return rows


def _fmt_fixed(value: float | None, decimals: int) -> str:
    if value is None:
        return ""
    return f"{value:.{decimals}f}"


def write_summary_csv(rows: Iterable[SummaryRow]) -> bytes:
    buf = io.StringIO()
    buf.write(SUMMARY_HEADER + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        d = row.decimals
        writer.writerow([
            row.run_id,
            row.dataset_id,
            row.scenario,
            "" if row.top_k is None else str(row.top_k),
            _fmt_fixed(row.score, d.get("score", DEFAULT_RATE_DECIMALS)),
            _fmt_fixed(row.faithfulness, d.get("faithfulness", DEFAULT_RATE_DECIMALS)),
            _fmt_fixed(row.answer_relevance, d.get("answer_relevance", DEFAULT_RATE_DECIMALS)),
            _fmt_fixed(row.p95_latency_ms, d.get("p95_latency_ms", 0)),
        ])
    return buf.getvalue().encode("utf-8")


def summary_row_for(report: RunReport, score: float) -> SummaryRow:
    return SummaryRow(
        run_id=report.run_id_str,
        dataset_id=report.dataset_id,
        scenario=report.scenario,
        top_k=report.top_k,
        score=score,
        faithfulness=report.metrics.faithfulness,
        answer_relevance=report.metrics.answer_relevance,
        p95_latency_ms=report.latency_p95_ms,
    )


# ---------------------------------------------------------------------------
# run log records


@dataclass
class RunLogRecord:
    item_id: str
    latency_ms: float
    tokens_in: int
    tokens_out: int
    retrieved_doc_ids: list[str] | None = None
    predicted_label: str | None = None
    gold_label: str | None = None
    should_escalate: bool | None = None
    gold_escalate: bool | None = None
    policy_violations: list[str] = field(default_factory=list)
    faithfulness: float | None = None
    schema_valid: bool = True
    confidence: float | None = None
    trace_id: str | None = None
    error: str | None = None

    def __post_init__(self) -> None:
        if self.latency_ms < 0 or self.tokens_in < 0 or self.tokens_out < 0:
            raise DataError(f"record {self.item_id}: latency and token counts must be non-negative")
        if self.faithfulness is not None and not 0.0 <= self.faithfulness <= 1.0:
            raise DataError(f"record {self.item_id}: faithfulness {self.faithfulness} outside [0, 1]")

    def check_top_k(self, top_k: int | None) -> None:
        if top_k is not None and self.retrieved_doc_ids is not None and len(self.retrieved_doc_ids) > top_k:
            raise DataError(f"record {self.item_id}: {len(self.retrieved_doc_ids)} retrieved ids exceed top_k={top_k}")

    def to_dict(self) -> dict[str, Any]:
        return {k: v for k, v in self.__dict__.items() if v is not None}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunLogRecord:
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        try:
            return cls(**known)
        except TypeError as exc:
            raise DataError(f"bad run log record: {exc}") from None


def dumps_jsonl(rows: Iterable[dict[str, Any]]) -> str:
    return "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in rows)


def write_run_log(records: Iterable[RunLogRecord]) -> bytes:
    ordered = sorted(records, key=lambda r: r.item_id)
    return dumps_jsonl(r.to_dict() for r in ordered).encode("utf-8")


def parse_run_log(data: bytes | str) -> list[RunLogRecord]:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    records = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append(RunLogRecord.from_dict(json.loads(line)))
        except json.JSONDecodeError as exc:
            raise DataError(f"run log line {lineno}: {exc}") from None
    return records


# ---------------------------------------------------------------------------
# manifests


def content_digest(records: Iterable[dict[str, Any]]) -> str:
    return hashlib.sha256(dumps_jsonl(records).encode("utf-8")).hexdigest()


@dataclass
class Manifest:
    source_uri: str
    seed: int
    counts: dict[str, int]
    content_digest: str

    def check(self, dataset_size: int) -> None:
        if sum(self.counts.values()) != dataset_size:
            raise DataError(f"manifest counts sum to {sum(self.counts.values())}, dataset has {dataset_size}")

    def to_json(self) -> str:
        return json.dumps(
            {"source_uri": self.source_uri, "seed": self.seed, "counts": self.counts,
             "content_digest": self.content_digest},
            indent=2,
        ) + "\n"

    @classmethod
    def from_json(cls, data: bytes | str) -> Manifest:
        try:
            doc = json.loads(data)
            return cls(source_uri=doc["source_uri"], seed=int(doc["seed"]),
                       counts={k: int(v) for k, v in doc["counts"].items()},
                       content_digest=doc["content_digest"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad manifest: {exc}") from None


# ---------------------------------------------------------------------------
# filesystem helpers


def atomic_write(path: Path, data: bytes | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class LoadedRuns(NamedTuple):
    reports: list[RunReport]
    diagnostics: list[str]


def load_runs(directory: str | Path) -> LoadedRuns:
    """Load every ``*/report.json`` under ``directory`` (sorted by run id).

    Corrupt reports become diagnostics; they never abort the load.
    """
    root = Path(directory)
    if not root.is_dir():
        raise DataError(f"runs directory {root} is not readable")
    reports: list[RunReport] = []
    diagnostics: list[str] = []
    for path in sorted(root.rglob(REPORT_FILE)):
        try:
            reports.append(parse_report(path.read_bytes()))
        except (DataError, OSError) as exc:
            diagnostics.append(f"{path}: {exc}")
            logger.warning("skipping %s: %s", path, exc)
    reports.sort(key=lambda r: r.run_id_str)
    return LoadedRuns(reports, diagnostics)


def load_run_log(run_dir: str | Path) -> list[RunLogRecord] | None:
    path = Path(run_dir) / RUNLOG_FILE
    if not path.exists():
        return None
    return parse_run_log(path.read_bytes())
