"""``incident-rag`` command line.

Exit status is 0 on success, 1 on a domain error (bad input, provider
failure, missing reference) and 2 on a usage error. Every invocation writes
a run manifest, by default ``<out>.manifest.json`` next to ``--out`` or
``incident_rag_run.json`` in the working directory.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from ._io import atomic_write_json, atomic_write_text
from .analyzer import (
    WindowReport,
    analyze_incident,
    analyze_no_rag,
    analyze_window,
    index_store,
)
from .config import ConfigError, Scenario, load_scenario, parse_int_list
from .evaluation import (
    FIXTURE_KINDS,
    ReferenceAnswer,
    ScenarioSummary,
    generate_fixture,
    load_references,
    load_window_references,
    match_answer,
    render_window_table,
    score_report,
    score_window,
)
from .events import EventError, EventStore, format_timestamp, ingest_ndjson, sliding_windows
from .llm import LlmError, PricingModel, estimate_cost, format_money, load_registry
from .llm.cost import DEFAULT_CALLS, DEFAULT_INPUT_TOKENS, DEFAULT_OUTPUT_TOKENS
from .llm.registry import BUILTIN_WIRES
from .query import run_library
from .questions import NOT_FOUND
from .rag import HashingEmbedder, RagError, load, persist, serialize_result

SWEEP_K = (1, 3, 5, 7, 9, 11)
DOMAIN_ERRORS = (ValueError, KeyError, OSError, LlmError, RagError, EventError, ConfigError)


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: Optional[str]
    argv: list[str]
    config: dict[str, Any] = field(default_factory=dict)
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    started_at: str = ""
    duration_s: float = 0.0
    exit_status: int = 0
    error: Optional[str] = None
    version: str = __version__

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would call sys.exit(2) itself
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="incident-rag", description="IOC extraction and retrieval-augmented incident analysis")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def command(name: str, help_text: str, *, scenario: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, description=help_text)
        if scenario:
            p.add_argument("--scenario", required=True, help="scenario.yaml or the directory holding it")
        p.add_argument("--out", help="output file (directory for `fixture`)")
        p.add_argument("--manifest", help="where to write the run manifest")
        return p

    def llm_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--provider", help="provider id from the registry (default oracle)")
        p.add_argument("--registry", help="provider registry YAML (default: shipped registry)")

    command("ingest", "parse the scenario's NDJSON events and report counts")
    command("extract", "run the query library and dump aggregation results")
    p = command("index", "build and persist the retrieval index")
    p.add_argument("--index", required=True, help="index file to write")
    p = command("analyze", "answer the forensic questionnaire (incident mode)")
    llm_flags(p)
    p.add_argument("--k", type=int, help="chunks retrieved per question (default 7)")
    p.add_argument("--index", help="prebuilt index to query instead of re-extracting")
    p.add_argument("--parallel", type=int, help="questions analyzed concurrently")
    p = command("windows", "reconstruct attack steps per time window (AD mode)")
    llm_flags(p)
    p.add_argument("--window-minutes", type=int, help="window length (default 5)")
    p.add_argument("--parallel", type=int, help="windows analyzed concurrently")
    p = command("baseline-norag", "answer from the raw chronological prefix that fits a token budget")
    llm_flags(p)
    p.add_argument("--token-budget", type=int, help="context budget in approximate tokens")
    p = command("eval", "score a run against the scenario's reference answers")
    llm_flags(p)
    p.add_argument("--k", type=int)
    p.add_argument("--report", help="score this analyze report instead of running the pipeline")
    p.add_argument("--window-minutes", type=int)
    p = command("sweep-k", "mean recall for several context sizes")
    llm_flags(p)
    p.add_argument("--k-values", default=",".join(map(str, SWEEP_K)), help="comma-separated k values")
    p = command("cost", "estimate per-analysis API cost", scenario=False)
    p.add_argument("--pricing", help="provider id, or IN/OUT prices per million tokens (e.g. 3.00/15.00)")
    p.add_argument("--providers", help="comma-separated provider ids (default: every priced provider)")
    p.add_argument("--registry")
    p.add_argument("--calls", type=int, default=DEFAULT_CALLS)
    p.add_argument("--input-tokens", type=int, default=DEFAULT_INPUT_TOKENS)
    p.add_argument("--output-tokens", type=int, default=DEFAULT_OUTPUT_TOKENS)
    p = command("fixture", "generate a synthetic scenario", scenario=False)
    p.add_argument("--kind", required=True, choices=FIXTURE_KINDS)
    p.add_argument("--seed", type=int)
    return parser


# --- helpers -----------------------------------------------------------------


class _Run:
    def __init__(self, args: argparse.Namespace, manifest: RunManifest, stdout):
        self.args = args
        self.manifest = manifest
        self.stdout = stdout
        self._scenario: Optional[Scenario] = None
        self._store: Optional[EventStore] = None

    def print(self, text: str = "") -> None:
        self.stdout.write(text if text.endswith("\n") else text + "\n")

    @property
    def scenario(self) -> Scenario:
        if self._scenario is None:
            self._scenario = load_scenario(self.args.scenario)
            self.manifest.inputs["scenario"] = str(self._scenario.path)
        return self._scenario

    def setting(self, name: str) -> Any:
        value = self.scenario.setting(name, getattr(self.args, name, None)) if getattr(self.args, "scenario", None) \
            else getattr(self.args, name, None)
        self.manifest.config[name] = value
        return value

    def store(self) -> EventStore:
        if self._store is None:
            path = self.scenario.events_path
            self.manifest.inputs["events"] = str(path)
            self._store = ingest_ndjson(path, self.scenario.scenario_id)
        return self._store

    def provider(self):
        registry = load_registry(self.setting("registry"))
        provider = registry.create(self.setting("provider"))
        self.manifest.config["provider_config"] = provider.config.describe()
        return provider

    def write_json(self, doc: Any, default_name: Optional[str] = None) -> Optional[Path]:
        if not self.args.out:
            return None
        path = Path(self.args.out)
        atomic_write_json(path, doc)
        self.manifest.outputs[default_name or "out"] = str(path)
        return path


def _report_summary(report_doc: dict, refs: Sequence[ReferenceAnswer]) -> ScenarioSummary:
    by_id = {r.question_id: r for r in refs}
    scores = []
    for finding in report_doc["findings"]:
        qid = finding["question_id"]
        if qid not in by_id:
            raise KeyError(f"no reference answer for question {qid!r}")
        value = finding.get("answer")
        answer = NOT_FOUND if value is None else (frozenset(value) if isinstance(value, list) else value)
        scores.append(match_answer(by_id[qid], answer, finding["answer_type"]))
    return ScenarioSummary(report_doc["scenario_id"], str(report_doc["metadata"].get("provider_id", "")), tuple(scores))


def _run_windows(run: _Run) -> list[WindowReport]:
    store = run.store()
    library = run.scenario.library()
    ctx = run.scenario.network()
    provider = run.provider()
    minutes = run.setting("window_minutes")
    windows = sliding_windows(store.span(), minutes)
    workers = max(1, run.setting("parallel") or 1)

    def one(window):
        return analyze_window(store, library, window, ctx, provider)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, windows))
    return [one(w) for w in windows]


def _window_scores(run: _Run, reports: Sequence[WindowReport]):
    path = run.scenario.window_references_path
    if path is None:
        return None
    run.manifest.inputs["window_references"] = str(path)
    refs = load_window_references(path)
    by_start = {r.window.start: r for r in refs}
    out = []
    for report in reports:
        ref = by_start.get(report.window.start)
        if ref is not None:
            out.append(score_window(report, ref))
    return out


def _analyze(run: _Run, k: int):
    return analyze_incident(
        run.store(),
        run.scenario.library(),
        run.scenario.questionnaire(),
        run.scenario.network(),
        run.provider(),
        k,
        workers=max(1, run.setting("parallel") or 1) if hasattr(run.args, "parallel") else 1,
    )


def _references(run: _Run) -> list[ReferenceAnswer]:
    path = run.scenario.references_path
    if path is None:
        raise ConfigError(f"{run.scenario.path}: scenario has no reference answers")
    run.manifest.inputs["references"] = str(path)
    return load_references(path)


# --- commands ----------------------------------------------------------------


def cmd_ingest(run: _Run) -> int:
    store = run.store()
    span = store.span()
    doc = {
        "scenario_id": store.scenario_id,
        "ingested": store.total_ingested,
        "rejected": store.total_rejected,
        "start": format_timestamp(span.start),
        "end": format_timestamp(span.end),
    }
    run.print(f"{store.scenario_id}: {store.total_ingested} events ingested, {store.total_rejected} rejected, "
              f"{doc['start']} .. {doc['end']}")
    run.write_json(doc)
    return 0


def cmd_extract(run: _Run) -> int:
    store = run.store()
    results = run_library(store, run.scenario.library(), store.span())
    docs = [json.loads(serialize_result(r)) for r in results]
    for r in results:
        run.print(f"{r.query_id}: {r.matched_count} matched, "
                  + ", ".join(f"{name}={len(b)}" for name, b in r.buckets.items()))
    run.write_json(docs)
    return 0


def cmd_index(run: _Run) -> int:
    embedder = HashingEmbedder()
    index = index_store(run.store(), run.scenario.library(), embedder)
    persist(index, run.args.index)
    run.manifest.outputs["index"] = str(run.args.index)
    run.print(f"indexed {len(index)} chunks with {index.embedder_id} -> {run.args.index}")
    return 0


def cmd_analyze(run: _Run) -> int:
    k = run.setting("k")
    if run.args.index:
        embedder = HashingEmbedder()
        index = load(run.args.index, expected_embedder_id=embedder.embedder_id)
        run.manifest.inputs["index"] = run.args.index
        report = analyze_incident(
            run.store(), [], run.scenario.questionnaire(), run.scenario.network(), run.provider(), k,
            embedder=embedder, index=index, workers=max(1, run.setting("parallel") or 1),
        )
    else:
        report = _analyze(run, k)
    run.print(report.render_text())
    run.write_json(report.to_dict())
    return 0


def cmd_windows(run: _Run) -> int:
    reports = _run_windows(run)
    for report in reports:
        run.print(f"== {report.window.label()}: {len(report.attack_steps)} steps, "
                  f"defenses [{', '.join(report.defense_codes)}]")
        for i, step in enumerate(report.attack_steps, 1):
            run.print(f"  {i}. {step.text} ({', '.join(step.evidence)})")
    scores = _window_scores(run, reports)
    if scores:
        run.print(render_window_table(scores))
    run.write_json({"windows": [r.to_dict() for r in reports],
                    "scores": [s.to_dict() for s in scores] if scores else None})
    return 0


def cmd_baseline_norag(run: _Run) -> int:
    report = analyze_no_rag(
        run.store(), run.scenario.questionnaire(), run.scenario.network(), run.provider(),
        run.setting("token_budget"),
    )
    meta = report.metadata
    run.print(f"no-RAG context: {meta['events_included']} of {meta['events_total']} events "
              f"({meta['events_percentage']:.1f}%)")
    run.print(report.render_text())
    doc = report.to_dict()
    if run.scenario.references_path is not None:
        summary = score_report(report, _references(run))
        run.print(summary.render_table())
        doc["evaluation"] = summary.to_dict()
    run.write_json(doc)
    return 0


def cmd_eval(run: _Run) -> int:
    if run.scenario.window_references_path is not None and run.scenario.references_path is None:
        reports = _run_windows(run)
        scores = _window_scores(run, reports) or []
        run.print(render_window_table(scores))
        run.write_json({"windows": [s.to_dict() for s in scores]})
        return 0
    refs = _references(run)
    if run.args.report:
        run.manifest.inputs["report"] = run.args.report
        summary = _report_summary(json.loads(Path(run.args.report).read_text(encoding="utf-8")), refs)
    else:
        summary = score_report(_analyze(run, run.setting("k")), refs)
    run.print(summary.render_table())
    run.write_json(summary.to_dict())
    return 0


def cmd_sweep_k(run: _Run) -> int:
    ks = parse_int_list(run.args.k_values)
    run.manifest.config["k_values"] = list(ks)
    refs = _references(run)
    store, library = run.store(), run.scenario.library()
    questionnaire, ctx, provider = run.scenario.questionnaire(), run.scenario.network(), run.provider()
    embedder = HashingEmbedder()
    index = index_store(store, library, embedder)
    rows = []
    for k in ks:
        report = analyze_incident(store, library, questionnaire, ctx, provider, k, embedder=embedder, index=index)
        summary = score_report(report, refs)
        rows.append({"k": k, "mean_recall": summary.mean_recall,
                     "per_question": {s.question_id: s.match_score for s in summary.scores}})
    ids = list(rows[0]["per_question"]) if rows else []
    run.print("  ".join(["k".rjust(3), *(q.rjust(4) for q in ids), "mean".rjust(5)]))
    for row in rows:
        cells = [f"{100 * row['per_question'][q]:.0f}".rjust(4) for q in ids]
        run.print("  ".join([str(row["k"]).rjust(3), *cells, f"{100 * row['mean_recall']:.0f}".rjust(5)]))
    run.write_json({"scenario_id": questionnaire.scenario_id, "provider_id": provider.config.provider_id, "rows": rows})
    return 0


def _pricing_rows(run: _Run) -> list[tuple[str, PricingModel]]:
    args = run.args
    if args.pricing and "/" in args.pricing:
        price_in, price_out = args.pricing.split("/", 1)
        try:
            return [(args.pricing, PricingModel(price_in.strip(), price_out.strip()))]
        except (ValueError, ArithmeticError) as exc:
            raise ConfigError(f"bad --pricing {args.pricing!r}: {exc}") from exc
    registry = load_registry(args.registry)
    if args.pricing:
        ids = [args.pricing]
    elif args.providers:
        ids = [p.strip() for p in args.providers.split(",") if p.strip()]
    else:
        ids = [
            pid for pid, cfg in registry.providers.items()
            if cfg.pricing is not None and cfg.wire not in BUILTIN_WIRES
        ]
    rows = []
    for pid in ids:
        cfg = registry.config(pid)
        if cfg.pricing is None:
            raise ConfigError(f"provider {pid!r} has no pricing")
        rows.append((pid, cfg.pricing))
    return rows


def cmd_cost(run: _Run) -> int:
    args = run.args
    run.manifest.config.update(calls=args.calls, input_tokens=args.input_tokens, output_tokens=args.output_tokens)
    out = []
    for name, pricing in _pricing_rows(run):
        est = estimate_cost(pricing, args.calls, args.input_tokens, args.output_tokens)
        run.print(f"{name}: {est.display()} (in {format_money(pricing.price_in, 2)}/M, "
                  f"out {format_money(pricing.price_out, 2)}/M, {est.n_calls} calls x {est.t_in}+{est.t_out} tokens)")
        out.append({"pricing": name, "price_in": str(pricing.price_in), "price_out": str(pricing.price_out),
                    "calls": est.n_calls, "input_tokens": est.t_in, "output_tokens": est.t_out,
                    "exact": str(est.total), "display": est.display()})
    run.write_json(out)
    return 0


def cmd_fixture(run: _Run) -> int:
    seed = run.args.seed if run.args.seed is not None else 0
    out_dir = Path(run.args.out or f"fixture-{run.args.kind}")
    run.manifest.config.update(kind=run.args.kind, seed=seed)
    files = generate_fixture(run.args.kind, seed, out_dir)
    for name, path in files.items():
        run.manifest.outputs[name] = str(path)
        run.print(str(path))
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "extract": cmd_extract,
    "index": cmd_index,
    "analyze": cmd_analyze,
    "windows": cmd_windows,
    "baseline-norag": cmd_baseline_norag,
    "eval": cmd_eval,
    "sweep-k": cmd_sweep_k,
    "cost": cmd_cost,
    "fixture": cmd_fixture,
}


def _manifest_path(args: Optional[argparse.Namespace]) -> Path:
    if args is not None and getattr(args, "manifest", None):
        return Path(args.manifest)
    if args is not None and getattr(args, "out", None):
        out = Path(args.out)
        if args.command == "fixture":
            return out / "run_manifest.json"
        return out.with_name(out.name + ".manifest.json")
    return Path("incident_rag_run.json")


def run_command(argv: Sequence[str], stdout=None, stderr=None) -> tuple[int, RunManifest]:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    started = time.time()
    manifest = RunManifest(command=None, argv=list(argv),
                           started_at=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)))
    parser = build_parser()
    args: Optional[argparse.Namespace] = None
    try:
        args = parser.parse_args(list(argv))
        if args.command is None:
            raise UsageError(parser.format_usage() + "incident-rag: error: a subcommand is required")
        manifest.command = args.command
        status = COMMANDS[args.command](_Run(args, manifest, stdout))
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        status, manifest.error = 2, str(exc).splitlines()[-1]
    except SystemExit as exc:  # --help / --version
        status = int(exc.code or 0)
    except DOMAIN_ERRORS as exc:
        qid = getattr(exc, "question_id", None)
        where = f" (question {qid})" if qid else ""
        message = f"{type(exc).__name__}{where}: {exc}"
        stderr.write(f"incident-rag: error: {message}\n")
        status, manifest.error = 1, message
    manifest.exit_status = status
    manifest.duration_s = round(time.time() - started, 6)
    try:
        path = _manifest_path(args)
        atomic_write_text(path, json.dumps(manifest.to_dict(), indent=2, default=str) + "\n")
    except OSError as exc:
        stderr.write(f"incident-rag: warning: could not write run manifest: {exc}\n")
    return status, manifest


def main(argv: Optional[Sequence[str]] = None) -> int:
    status, _ = run_command(sys.argv[1:] if argv is None else argv)
    return status


if __name__ == "__main__":
    sys.exit(main())
