"""Command line entry point.

    wrac ingest   --corpus DIR --out DIR
    wrac chunk    --corpus DIR --method wrac-structural --out DIR
    wrac eval     --corpus DIR --method wrac-structural --out DIR
    wrac retrieve --index DIR/index.json --query "..." --k 6
    wrac compare  --run-a DIR --run-b DIR --out DIR
    wrac synth    --out DIR

Exit codes: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .evaluation import (
    CostModel,
    DEFAULT_KS,
    ManifestError,
    UsageLedger,
    aggregate,
    cost_table,
    compute_cost,
    cost_rows,
    efficiency_rows,
    efficiency_table,
    evaluate_queries,
    format_change,
    format_table,
    load_corpus,
    load_queries,
    metrics_table,
    org_usage_table,
    relative_change,
    summarize,
)
from .llm_client import MODES, LLMClient, PlannerUnavailable
from .parse_core import ParseError, dump_units
from .pipeline import METHODS, LLM_METHODS, CorpusRun, parse_sources, run_corpus
from .planner import PlannerConfig
from .resolver import dump_chunks
from .retrieval_index import Index, build_index, retrieve
from .synthetic import bundled_corpus, write_corpus

logger = logging.getLogger("wrac")


class DataError(RuntimeError):
    pass


@dataclass
class RunConfig:
    corpus_root: Path = field(default_factory=bundled_corpus)
    method: str = "wrac-structural"
    mode: str = "replay"
    max_chunk_tokens: int = 512
    ks: tuple[int, ...] = DEFAULT_KS
    prices: CostModel = field(default_factory=CostModel)
    out: Path = Path("wrac_out")
    jobs: int = 1
    cache_dir: Optional[Path] = None
    fixed_size: int = 512
    fixed_overlap: int = 64

    def __post_init__(self):
        self.corpus_root = Path(self.corpus_root)
        self.out = Path(self.out)
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.ks or min(self.ks) < 1:
            raise ValueError("k values must be >= 1")

    def planner_config(self) -> PlannerConfig:
        return PlannerConfig(max_chunk_tokens=self.max_chunk_tokens)

    def client(self):
        if self.method not in LLM_METHODS:
            return None
        return LLMClient.from_env(mode=self.mode, cache_dir=self.cache_dir, max_in_flight=self.jobs)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _jsonl(records) -> str:
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in records)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_ingest(config: RunConfig) -> dict:
    sources, failures = load_corpus(config.corpus_root)
    if not sources and not failures:
        raise DataError(f"no documents under {config.corpus_root / 'docs'}")
    docs, parse_failures = parse_sources(sources, config.jobs)
    media = {s.doc_id: s.media for s in sources}
    for doc in docs:
        _write(config.out / "units" / f"{doc.doc_id}.json", dump_units(doc) + "\n")
    for path, exc in failures:
        logger.error("%s: %s", path, exc)
    for doc_id, err in parse_failures:
        logger.error("%s: %s", doc_id, err)
    by_org: dict[str, dict] = {}
    for doc in docs:
        entry = by_org.setdefault(doc.org, {"files": 0, "total_chars": 0})
        entry["files"] += 1
        entry["total_chars"] += doc.total_chars
    summary = {
        "total_files": len(docs),
        "total_length": sum(d.total_chars for d in docs),
        "units": sum(len(d.units) for d in docs),
        "by_org": by_org,
        "documents": [
            {"doc_id": d.doc_id, "org": d.org, "media": media[d.doc_id], "units": len(d.units),
             "total_chars": d.total_chars}
            for d in docs
        ],
        "failures": [{"path": str(p), "error": str(e)} for p, e in failures]
        + [{"path": d, "error": e} for d, e in parse_failures],
    }
    _write(config.out / "parse_summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def cmd_chunk(config: RunConfig) -> CorpusRun:
    run = run_corpus(config.corpus_root, config.method, config.planner_config(), config.client(),
                     config.jobs, config.fixed_size, config.fixed_overlap)
    if not run.docs:
        raise DataError(f"no documents under {config.corpus_root / 'docs'}")
    _write(config.out / "chunks.jsonl", dump_chunks(run.chunks))
    _write(config.out / "ledger.jsonl", run.ledger.dumps())
    _write(config.out / "runlog.jsonl", _jsonl(r.run_log for r in run.results))
    plans = [r.plan for r in run.results if r.plan is not None]
    if plans:
        _write(config.out / "plans.jsonl", _jsonl(plans))
    return run


def cmd_eval(config: RunConfig) -> dict:
    queries_path = config.corpus_root / "queries.jsonl"
    if not queries_path.exists():
        raise DataError(f"missing {queries_path}")
    queries = load_queries(queries_path)
    run = cmd_chunk(config)
    index = build_index(run.chunks)
    index.save(config.out / "index.json")
    per_query = evaluate_queries(index, run.chunks, queries, config.method, config.ks)
    tables = {by: aggregate(per_query, by) for by in ("org", "category", "overall")}
    _write(config.out / "metrics.jsonl", _jsonl(r.to_record() for r in per_query))
    report = {
        "method": config.method,
        "ks": list(config.ks),
        "rows": {by: [r.to_record() for r in rows] for by, rows in tables.items()},
    }
    _write(config.out / "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    text = [
        f"Retrieval performance: {config.method}",
        "",
        metrics_table(tables["org"], "Organization"),
        metrics_table(tables["category"], "Query Type"),
        metrics_table(tables["overall"], "Scope"),
        org_usage_table(run.ledger),
    ]
    _write(config.out / "report.txt", "\n".join(text))
    return report


def _load_run(run_dir: Path) -> tuple[Optional[UsageLedger], Optional[dict]]:
    ledger = None
    ledger_path = run_dir / "ledger.jsonl"
    if ledger_path.exists():
        ledger = UsageLedger.load(ledger_path)
        if not ledger.rows:
            ledger = None
    report_path = run_dir / "report.json"
    report = json.loads(report_path.read_text(encoding="utf-8")) if report_path.exists() else None
    return ledger, report


def compare(
    ledger_a: Optional[UsageLedger],
    ledger_b: Optional[UsageLedger],
    report_a: Optional[dict],
    report_b: Optional[dict],
    method_a: str,
    method_b: str,
    prices: CostModel = CostModel(),
) -> tuple[dict, str, list[str]]:
    """Token, time, cost and retrieval deltas from ``a`` (before) to ``b`` (after)."""
    warnings: list[str] = []
    result: dict = {"before": method_a, "after": method_b}
    text: list[str] = [f"Comparison: {method_a} -> {method_b}", ""]
    if ledger_a is None or ledger_b is None:
        missing = method_a if ledger_a is None else method_b
        warnings.append(f"no ledger rows for {missing}; token, time and cost sections omitted")
    else:
        sa = summarize(ledger_a.for_method(method_a) or ledger_a.rows, method_a)
        sb = summarize(ledger_b.for_method(method_b) or ledger_b.rows, method_b)
        result["efficiency"] = efficiency_rows(sa, sb)
        text += ["Aggregate Efficiency Summary", efficiency_table(sa, sb)]
        merged = UsageLedger([*(ledger_a.for_method(method_a) or ledger_a.rows),
                              *(ledger_b.for_method(method_b) or ledger_b.rows)])
        costs = compute_cost(merged, prices)
        if method_a in costs and method_b in costs:
            rows = cost_rows(costs, method_a, method_b, prices)
            result["cost"] = [dict(zip(("component", "pricing", "before", "after", "relative_change"), r))
                              for r in rows]
            text += ["Cost Analysis", cost_table(costs, method_a, method_b, prices)]
            total_a, total_b = rows[-1][2], rows[-1][3]
        else:
            total_a = total_b = None
        reductions = [
            ["Time Reduction", format_change(-relative_change(sa.total_time, sb.total_time))],
            ["Output Tokens Reduction", format_change(-relative_change(sa.total_output, sb.total_output))],
        ]
        if total_a is not None:
            reductions.append(["Cost Reduction", format_change(-relative_change(total_a, total_b))])
        text += ["Efficiency Improvements", format_table(["Metric", "Reduction"], reductions)]
    if report_a is None or report_b is None:
        warnings.append("retrieval report missing for one run; metric deltas omitted")
    else:
        ov_a = report_a["rows"]["overall"][0]
        ov_b = report_b["rows"]["overall"][0]
        names = [k for k in ov_a if k not in ("group", "method", "count")]
        deltas = [{"metric": n, "before": ov_a[n], "after": ov_b[n], "delta": ov_b[n] - ov_a[n],
                   "relative_change": relative_change(ov_a[n], ov_b[n])} for n in names]
        result["retrieval"] = deltas
        text += ["Retrieval Deltas", format_table(
            ["Metric", method_a, method_b, "Delta", "Relative Change"],
            [[d["metric"], round(d["before"], 4), round(d["after"], 4), round(d["delta"], 4),
              format_change(d["relative_change"])] for d in deltas])]
    result["warnings"] = warnings
    return result, "\n".join(text), warnings


def cmd_compare(run_a: Path, run_b: Path, out: Optional[Path] = None, prices: CostModel = CostModel()) -> dict:
    ledger_a, report_a = _load_run(Path(run_a))
    ledger_b, report_b = _load_run(Path(run_b))
    if ledger_a is None and report_a is None:
        raise DataError(f"nothing to compare in {run_a}")
    if ledger_b is None and report_b is None:
        raise DataError(f"nothing to compare in {run_b}")

    def method_of(ledger, report, fallback):
        if report is not None:
            return report["method"]
        if ledger is not None:
            return ledger.methods()[0]
        return fallback

    method_a = method_of(ledger_a, report_a, "a")
    method_b = method_of(ledger_b, report_b, "b")
    result, text, warnings = compare(ledger_a, ledger_b, report_a, report_b, method_a, method_b, prices)
    for w in warnings:
        logger.warning(w)
    if out is not None:
        _write(Path(out) / "comparison.json", json.dumps(result, indent=2, sort_keys=True) + "\n")
        _write(Path(out) / "comparison.txt", text)
    return result


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------

def _ks(value: str) -> tuple[int, ...]:
    try:
        ks = tuple(sorted({int(v) for v in value.split(",") if v.strip()}))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid k list {value!r}") from None
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("k values must be >= 1")
    return ks


def _positive(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _add_run_args(p: argparse.ArgumentParser, method: bool = True) -> None:
    p.add_argument("--corpus", type=Path, default=None, help="corpus root holding docs/ and queries.jsonl")
    p.add_argument("--out", type=Path, default=Path("wrac_out"))
    p.add_argument("--jobs", type=_positive, default=1)
    if method:
        p.add_argument("--method", choices=METHODS, default="wrac-structural")
        p.add_argument("--mode", choices=MODES, default=os.environ.get("WRAC_LLM_MODE", "replay"))
        p.add_argument("--cache-dir", type=Path, default=None)
        p.add_argument("--max-chunk-tokens", type=_positive, default=512)
        p.add_argument("--k", type=_ks, default=DEFAULT_KS, help="comma-separated cut-offs, default 3,6")
        p.add_argument("--fixed-size", type=_positive, default=512)
        p.add_argument("--fixed-overlap", type=int, default=64)
        p.add_argument("--price-input", type=float, default=CostModel.price_input)
        p.add_argument("--price-output", type=float, default=CostModel.price_output)
        p.add_argument("--price-cache", type=float, default=CostModel.price_cache)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wrac", description="Retrieval-aware chunking pipeline")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_args(sub.add_parser("ingest", help="parse documents into unit files"), method=False)
    _add_run_args(sub.add_parser("chunk", help="plan and resolve chunks"))
    _add_run_args(sub.add_parser("eval", help="chunk, index and score the query set"))

    p = sub.add_parser("retrieve", help="query a saved index")
    p.add_argument("--index", type=Path, required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--k", type=_positive, default=6)

    p = sub.add_parser("compare", help="compare two run directories")
    p.add_argument("--run-a", type=Path, required=True)
    p.add_argument("--run-b", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("synth", help="write the synthetic demo corpus")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=7)
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    kwargs = dict(
        corpus_root=args.corpus or bundled_corpus(),
        out=args.out,
        jobs=args.jobs,
    )
    if hasattr(args, "method"):
        kwargs.update(
            method=args.method,
            mode=args.mode,
            cache_dir=args.cache_dir,
            max_chunk_tokens=args.max_chunk_tokens,
            ks=args.k,
            fixed_size=args.fixed_size,
            fixed_overlap=args.fixed_overlap,
            prices=CostModel(args.price_input, args.price_output, args.price_cache),
        )
    return RunConfig(**kwargs)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            write_corpus(args.out, args.seed)
            print(f"wrote synthetic corpus to {args.out}")
        elif args.command == "retrieve":
            result = retrieve(Index.load(args.index), args.query, args.k)
            for rank, (cid, score) in enumerate(result.ranked, start=1):
                print(f"{rank}\t{score:.4f}\t{cid}")
        elif args.command == "compare":
            result = cmd_compare(args.run_a, args.run_b, args.out)
            print(json.dumps(result, indent=2, sort_keys=True))
        else:
            try:
                config = _config(args)
            except ValueError as exc:
                parser.error(str(exc))
            if args.command == "ingest":
                summary = cmd_ingest(config)
                print(f"parsed {summary['total_files']} files, {summary['total_length']:,} chars, "
                      f"{summary['units']} units -> {config.out}")
                if summary["failures"]:
                    return 1
            elif args.command == "chunk":
                run = cmd_chunk(config)
                print(f"{len(run.chunks)} chunks from {len(run.docs)} documents -> {config.out}")
            else:
                cmd_eval(config)
                print((config.out / "report.txt").read_text(encoding="utf-8"))
    except (DataError, ManifestError, ParseError, PlannerUnavailable, OSError) as exc:
        logger.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
