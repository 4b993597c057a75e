"""``readiness`` command line.

Exit codes: 0 success, 1 gate failure (``gate`` only), 2 usage or config
error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import yaml

from . import __version__
from .analysis import filter_latest_valid, mean_std, seed_stats
from .artifacts import (
    REPORT_FILE,
    SCENARIOS,
    Manifest,
    RunReport,
    atomic_write,
    content_digest,
    dumps_jsonl,
    load_run_log,
    load_runs,
    parse_report,
    parse_run_log,
    parse_summary_csv,
)
from .batch import RunPlan, SimEvaluator, SimProvider, execute_plan
from .batch.client import HttpProvider
from .config import HarnessConfig, load_config
from .errors import ConfigError, DataError, HarnessError
from .export import (
    TABLE_KINDS,
    ablation_rows,
    export_coordinates,
    export_table,
    pareto_rows,
    quality_rows,
    regression_rows,
    seed_stat_rows,
)
from .gates import compute_deltas, evaluate, select_baseline
from .metrics import parse_qrels
from .pareto import LATENCY_SCORE, FrontierExport, FrontierPoint, Objective, frontier, parse_coordinates
from .policy import PolicyChecker, validate_routing_output
from .scoring import Scorable, UnscorableRun, score, weight_ablation
from .synth import (
    QuotaSpec,
    audit,
    default_quotas,
    filter_tickets,
    generate,
    stratified_split,
    write_dataset_card,
    write_splits,
)
from .synth.quality import QualityReport, schema_errors

logger = logging.getLogger("readiness")

FORMATS = ("csv", "json", "latex", "coords")
EXIT_OK, EXIT_GATE_FAIL, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3


class UsageError(ConfigError):
    pass


# helpers ------------------------------------------------------------------


def _emit(text: str, out: str | None) -> None:
    if out:
        atomic_write(Path(out), text)
    else:
        sys.stdout.write(text)


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) in (None, "")]
    if missing:
        raise UsageError(f"{args.command}: missing {', '.join(missing)}")


def _check_format(args: argparse.Namespace, allowed: Sequence[str]) -> str:
    fmt = args.format or allowed[0]
    if fmt not in allowed:
        raise UsageError(f"{args.command}: --format must be one of {', '.join(allowed)}")
    return fmt


def _read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


def _read_jsonl(path: str | Path) -> list[dict[str, Any]]:
    rows = []
    for lineno, line in enumerate(_read_text(path).splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: {exc.msg}") from None
        if not isinstance(row, dict):
            raise DataError(f"{path}:{lineno}: expected an object")
        rows.append(row)
    return rows


def _load_reports(args: argparse.Namespace) -> list[RunReport]:
    _require(args, "runs_dir")
    loaded = load_runs(args.runs_dir)
    for note in loaded.diagnostics:
        print(f"warning: {note}", file=sys.stderr)
    reports = loaded.reports
    if args.dataset:
        reports = [r for r in reports if r.dataset_id == args.dataset]
    if args.scenario:
        reports = [r for r in reports if r.scenario == args.scenario]
    if not reports:
        raise DataError(f"no runs found under {args.runs_dir}")
    return reports


def _run_score(cfg: HarnessConfig, report: RunReport, scenario: str | None = None) -> float | None:
    try:
        return score(report.metrics_with_latency(), cfg.scenario_weights(scenario or report.scenario),
                     report.effective_task_kind, cfg.budget_map()).value
    except UnscorableRun:
        return None


def _resolve_run(ref: str, runs_dir: str | None) -> tuple[RunReport, Path | None]:
    path = Path(ref)
    if path.is_dir():
        path = path / REPORT_FILE
    if path.is_file():
        return parse_report(path.read_bytes()), path.parent
    if runs_dir:
        for candidate in sorted(Path(runs_dir).rglob(REPORT_FILE)):
            if candidate.parent.name == ref:
                return parse_report(candidate.read_bytes()), candidate.parent
    raise DataError(f"run {ref!r} not found")


# subcommands --------------------------------------------------------------


def cmd_run(args: argparse.Namespace, cfg: HarnessConfig) -> int:
    _require(args, "items", "dataset", "model", "sample_n")
    items = _read_jsonl(args.items)
    qrels = parse_qrels(_read_text(args.qrels)) if args.qrels else None
    task = args.task or ("retrieval" if args.top_k is not None else "ticket")
    if args.provider == "sim":
        provider: Any = SimProvider(qrels)
        evaluator = SimEvaluator()
    else:
        provider = HttpProvider(cfg.endpoint(args.provider), timeout_s=cfg.timeout_s)
        evaluator = None
    plan = RunPlan(
        suite=args.suite, dataset_id=args.dataset, task_kind=task, scenario=args.scenario or "sla-first",
        seed=args.seed, sample_n=args.sample_n, model=args.model, provider="sim" if args.provider == "sim" else args.provider,
        endpoint=None if args.provider == "sim" else cfg.endpoint(args.provider),
        prompt_version=args.prompt_version, top_k=args.top_k,
        workers=args.workers or cfg.workers, delay_ms=cfg.delay_ms if args.delay_ms is None else args.delay_ms,
        timeout_s=cfg.timeout_s, strata=args.strata, timestamp=args.timestamp,
    )
    try:
        result = execute_plan(
            plan, items, args.runs_dir or "runs", provider=provider, evaluator=evaluator, qrels=qrels,
            prices=cfg.price_table(), budgets=cfg.budget_map(), weights=cfg.scenario_weights(plan.scenario),
            checker=PolicyChecker(cfg.policy_rules(), cfg.schema_mode),
        )
    finally:
        if hasattr(provider, "close"):
            provider.close()
    doc = {"run_dir": str(result.run_dir), "run_id": result.report.run_id_str, "score": result.score,
           "diagnostics": result.diagnostics}
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_score(args: argparse.Namespace, cfg: HarnessConfig) -> int:
    fmt = _check_format(args, ("json", "csv"))
    if args.paths:
        reports = [_resolve_run(p, args.runs_dir)[0] for p in args.paths]
    else:
        reports = _load_reports(args)
    rows = []
    for r in reports:
        scenario = args.scenario or r.scenario
        entry: dict[str, Any] = {"run_id": r.run_id_str, "scenario": scenario}
        try:
            res = score(r.metrics_with_latency(), cfg.scenario_weights(scenario), r.effective_task_kind,
                        cfg.budget_map())
            entry.update(score=round(res.value, cfg.export_precision), present=sorted(res.present),
                         missing=sorted(res.missing))
        except UnscorableRun as exc:
            entry.update(score=None, present=[], missing=[], error=str(exc))
        rows.append(entry)
    if fmt == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        lines = ["run_id,scenario,score,present,missing"]
        for e in rows:
            value = "" if e["score"] is None else f"{e['score']:.{cfg.export_precision}f}"
            lines.append(f"{e['run_id']},{e['scenario']},{value},{' '.join(e['present'])},{' '.join(e['missing'])}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def _frontier_exports(args: argparse.Namespace, cfg: HarnessConfig) -> list[FrontierExport]:
    if args.coords:
        points = parse_coordinates(_read_text(args.coords), "p95_latency_s", "score")
        objectives = (Objective("p95_latency_s", "minimize"), Objective("score", "maximize"))
        return [FrontierExport(objectives, (Path(args.coords).stem,), points, frontier(points, objectives))]
    reports = filter_latest_valid(_load_reports(args)).kept
    groups: dict[tuple, list[FrontierPoint]] = {}
    notes: dict[tuple, list[str]] = {}
    for r in reports:
        group = (r.dataset_id, r.scenario)
        value = _run_score(cfg, r)
        if value is None:
            notes.setdefault(group, []).append(f"{r.run_id_str}: unscorable")
            continue
        groups.setdefault(group, []).append(
            FrontierPoint(r.run_id_str, {"p95_latency_ms": r.latency_p95_ms, "score": value}))
    return [FrontierExport(LATENCY_SCORE, g, pts, frontier(pts, LATENCY_SCORE), notes.get(g, []))
            for g, pts in sorted(groups.items())]


def cmd_frontier(args: argparse.Namespace, cfg: HarnessConfig) -> int:
    fmt = _check_format(args, ("coords", "json", "csv", "latex"))
    exports = _frontier_exports(args, cfg)
    if fmt == "coords":
        x_scale = 1.0 if args.coords else 0.001
        text = export_coordinates(exports, x_scale=x_scale, decimals=cfg.export_precision)
    elif fmt == "json":
        text = json.dumps([e.to_dict() for e in exports], indent=2) + "\n"
    else:
        if args.coords:
            raise UsageError("frontier tables need --runs-dir input")
        by_id = {r.run_id_str: r for r in _load_reports(args)}
        on_front = [p.run_id for e in exports for p in e.frontier]
        scores = {rid: _run_score(cfg, by_id[rid]) for rid in on_front}
        text = export_table("pareto", pareto_rows([by_id[rid] for rid in on_front], scores), fmt,
                            cfg.export_precision)
    _emit(text, args.out)
    return EXIT_OK


def cmd_seed_stats(args: argparse.Namespace, cfg: HarnessConfig) -> int:
    fmt = _check_format(args, ("latex", "csv", "json"))
    if args.values:
        try:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError:
            raise UsageError("--values must be comma-separated numbers") from None
        mean, std = mean_std(values)
        p = cfg.export_precision
        text = json.dumps({"n": len(values), "mean": round(mean, p), "std": None if std is None else round(std, p)}) + "\n"
        _emit(text, args.out)
        return EXIT_OK
    result = filter_latest_valid(_load_reports(args))
    for d in result.dropped:
        print(f"dropped {d.run_id}: {d.reason}", file=sys.stderr)
    scores = {r.run_id_str: s for r in result.kept if (s := _run_score(cfg, r)) is not None}
    stats = {m: seed_stats(result.kept, m, scores=scores)
             for m in ("faithfulness", "retrieval_hit_k", "p95_latency_ms", "score")}
    rows = seed_stat_rows(stats)
    if not rows:
        raise DataError("no runs left after filtering")
    _emit(export_table("seed-stats", rows, fmt, cfg.export_precision) if fmt != "json"
          else json.dumps(rows, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_gate(args: argparse.Namespace, cfg: HarnessConfig) -> int:
    _require(args, "candidate")
    candidate, cand_dir = _resolve_run(args.candidate, args.runs_dir)
    if args.baseline:
        baseline, _ = _resolve_run(args.baseline, args.runs_dir)
    else:
        _require(args, "runs_dir")
        baseline = select_baseline(load_runs(args.runs_dir).reports, candidate.dataset_id)
    records = load_run_log(cand_dir) if cand_dir is not None else None
    deltas = compute_deltas(baseline, candidate, args.variant)
    verdict = evaluate(deltas, candidate, cfg.gate_config(), records)
    _emit(verdict.to_json(deltas), args.out)
    return EXIT_OK if verdict.passed else EXIT_GATE_FAIL


def cmd_ablate(args: argparse.Namespace, cfg: HarnessConfig) -> int:
    fmt = _check_format(args, ("latex", "csv", "json"))
    reports = filter_latest_valid(_load_reports(args)).kept
    runs = [Scorable(r.run_id_str, (r.dataset_id, r.scenario), r.metrics_with_latency(), r.effective_task_kind)
            for r in reports]
    report = weight_ablation(runs, lambda g: cfg.scenario_weights(g[1]), budgets=cfg.budget_map())
    rows = ablation_rows(report)
    if fmt == "json":
        text = json.dumps({"rows": rows, "variants": report.variant_notes}, indent=2) + "\n"
    else:
        text = export_table("weight-ablation", rows, fmt, cfg.export_precision)
    _emit(text, args.out)
    return EXIT_OK


def _load_quotas(path: str | None) -> QuotaSpec:
    if not path:
        return default_quotas()
    text = _read_text(path)
    try:
        doc = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse quotas {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("quota file must be a mapping")
    return QuotaSpec.from_dict(doc)


def cmd_synth(args: argparse.Namespace, cfg: HarnessConfig) -> int:
    _require(args, "out")
    quotas = _load_quotas(args.quotas)
    n = args.sample_n or 4000
    tickets = generate(n, quotas, args.seed, id_prefix=args.id_prefix)
    rules = cfg.policy_rules()
    report = audit(tickets, quotas, rules=rules)
    kept, dropped = filter_tickets(tickets, args.similarity, rules=rules)
    out = Path(args.out)
    manifest = Manifest(source_uri=f"template:{args.id_prefix}", seed=args.seed, counts={"all": len(kept)},
                        content_digest=content_digest(kept))
    atomic_write(out / "tickets.jsonl", dumps_jsonl(kept))
    atomic_write(out / "dropped.jsonl", dumps_jsonl({"ticket_id": d.ticket.get("ticket_id"), "reason": d.reason}
                                                    for d in dropped))
    atomic_write(out / "audit.json", json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    atomic_write(out / "manifest.json", manifest.to_json())
    atomic_write(out / "DATASET_CARD.md", write_dataset_card(manifest, report, quotas))
    print(json.dumps({"generated": n, "kept": len(kept), "dropped": len(dropped),
                      **{k: round(v, 4) for k, v in report.metrics().items()}}))
    return EXIT_OK


def cmd_split(args: argparse.Namespace, cfg: HarnessConfig) -> int:
    _require(args, "input", "out")
    dataset = _read_jsonl(args.input)
    result = stratified_split(dataset, args.seed, label_field=args.label_field,
                              regression_size=args.regression_size, source_uri=str(args.input))
    for name, text in write_splits(result).items():
        atomic_write(Path(args.out) / name, text)
    print(json.dumps({"counts": result.manifest.counts, "regression": len(result.regression),
                      "content_digest": result.manifest.content_digest}))
    return EXIT_OK


def cmd_validate(args: argparse.Namespace, cfg: HarnessConfig) -> int:
    _require(args, "kind")
    errors: list[str] = []
    if args.kind == "config":
        load_config(args.path)
    else:
        text = _read_text(args.path)
        if args.kind == "routing":
            errors = validate_routing_output(text, cfg.schema_mode).errors
        elif args.kind == "report":
            parse_report(text)
        elif args.kind == "summary":
            notes: list[str] = []
            parse_summary_csv(text, notes)
            errors = notes
        elif args.kind == "runlog":
            parse_run_log(text)
        elif args.kind == "ticket":
            for lineno, row in enumerate(_read_jsonl(args.path), 1):
                errors += [f"line {lineno}: {e}" for e in schema_errors(row)]
        elif args.kind == "policy-text":
            errors = [f"policy violation: {v}" for v in PolicyChecker(cfg.policy_rules()).check_text(text)]
    for e in errors:
        print(e)
    if errors:
        return EXIT_DATA
    print("ok")
    return EXIT_OK


def cmd_export(args: argparse.Namespace, cfg: HarnessConfig) -> int:
    _require(args, "table")
    fmt = _check_format(args, ("latex", "csv", "json"))
    p = cfg.export_precision
    if args.table == "quality-comparison":
        if not args.paths:
            raise UsageError("quality-comparison needs audit.json paths")
        reps = []
        for path in args.paths:
            doc = json.loads(_read_text(path))
            doc.pop("q", None)
            reps.append((Path(path).parent.name, QualityReport(**doc)))
        rows = quality_rows(reps)
        _emit(export_table("quality-comparison", rows, fmt, 4 if args.precision is None else args.precision),
              args.out)
        return EXIT_OK
    reports = filter_latest_valid(_load_reports(args)).kept
    if args.table == "pareto":
        scores = {r.run_id_str: s for r in reports if (s := _run_score(cfg, r)) is not None}
        rows = pareto_rows(sorted(reports, key=lambda r: r.run_id_str), scores)
    elif args.table == "seed-stats":
        rows = seed_stat_rows({m: seed_stats(reports, m) for m in ("faithfulness", "retrieval_hit_k",
                                                                   "p95_latency_ms")})
    elif args.table == "ticket-regressions":
        pairs = []
        for r in reports:
            if r.prompt_version in (None, "baseline") or r.effective_task_kind != "ticket":
                continue
            base = select_baseline(reports, r.dataset_id)
            deltas = compute_deltas(base, r)
            pairs.append((deltas, evaluate(deltas, r, cfg.gate_config())))
        rows = regression_rows(pairs)
        p = 2 if args.precision is None else args.precision
    elif args.table == "weight-ablation":
        runs = [Scorable(r.run_id_str, (r.dataset_id, r.scenario), r.metrics_with_latency(),
                         r.effective_task_kind) for r in reports]
        rows = ablation_rows(weight_ablation(runs, lambda g: cfg.scenario_weights(g[1]), budgets=cfg.budget_map()))
    else:
        raise UsageError(f"unknown table {args.table!r}")
    if args.precision is not None:
        p = args.precision
    _emit(export_table(args.table, rows, fmt, p), args.out)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "score": cmd_score,
    "frontier": cmd_frontier,
    "seed-stats": cmd_seed_stats,
    "gate": cmd_gate,
    "ablate": cmd_ablate,
    "synth": cmd_synth,
    "split": cmd_split,
    "validate": cmd_validate,
    "export": cmd_export,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or YAML harness config")
    common.add_argument("--runs-dir", help="directory of run artifact folders")
    common.add_argument("--scenario", choices=SCENARIOS)
    common.add_argument("--dataset", help="dataset id")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--sample-n", type=int)
    common.add_argument("--top-k", type=int)
    common.add_argument("--out", help="output file (or directory for synth/split)")
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="readiness", description="Deployment-readiness harness")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="execute a run plan")
    p.add_argument("--items", help="JSONL dataset items with stable 'id'")
    p.add_argument("--qrels", help="TSV qrels for retrieval tasks")
    p.add_argument("--task", choices=("ticket", "retrieval"))
    p.add_argument("--suite", default="sim_core")
    p.add_argument("--model")
    p.add_argument("--prompt-version", default="baseline")
    p.add_argument("--provider", default="sim", help="'sim' or an endpoint name from the config")
    p.add_argument("--workers", type=int)
    p.add_argument("--delay-ms", type=float)
    p.add_argument("--strata")
    p.add_argument("--timestamp", help="fix the run timestamp (YYYYMMDD_HHMMSS)")

    p = sub.add_parser("score", parents=[common], help="score run artifacts")
    p.add_argument("paths", nargs="*", help="run dirs or report.json files")

    p = sub.add_parser("frontier", parents=[common], help="latency/score Pareto frontier")
    p.add_argument("--coords", help="pgfplots coordinate list (latency s, score) instead of runs")

    p = sub.add_parser("seed-stats", parents=[common], help="mean and sample std across seeds")
    p.add_argument("--values", help="comma-separated values to aggregate directly")

    p = sub.add_parser("gate", parents=[common], help="regression gate; exit 1 on fail")
    p.add_argument("--baseline", help="baseline run id or directory")
    p.add_argument("--candidate", help="candidate run id or directory")
    p.add_argument("--variant", help="label for the candidate in the verdict")

    sub.add_parser("ablate", parents=[common], help="weight ablation against scenario weights")

    p = sub.add_parser("synth", parents=[common], help="generate, audit and filter synthetic tickets")
    p.add_argument("--quotas", help="JSON or YAML quota spec")
    p.add_argument("--similarity", type=float, default=1.0, help="near-duplicate Jaccard threshold")
    p.add_argument("--id-prefix", default="syntpl")

    p = sub.add_parser("split", parents=[common], help="stratified 80/10/10 split")
    p.add_argument("--input")
    p.add_argument("--label-field", default="queue")
    p.add_argument("--regression-size", type=int)

    p = sub.add_parser("validate", parents=[common], help="check one document")
    p.add_argument("kind", choices=("routing", "report", "summary", "runlog", "ticket", "config", "policy-text"))
    p.add_argument("path")

    p = sub.add_parser("export", parents=[common], help="render tables")
    p.add_argument("--table", choices=TABLE_KINDS)
    p.add_argument("--precision", type=int)
    p.add_argument("paths", nargs="*", help="audit.json files for quality-comparison")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
