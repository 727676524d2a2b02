"""Run one chunking method over a corpus: parse, chunk, account usage."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .baselines import agentic_chunk, fixed_size_chunk_document, structural_chunk
from .evaluation import LedgerRow, UsageLedger, load_corpus
from .parse_core import ParsedDocument, SourceDocument, filter_boilerplate, parse_document
from .planner import ChatClient, PlannerConfig, llm_plan, structural_plan
from .resolver import Chunk, repair_plan, resolve_plan, validate_plan

logger = logging.getLogger(__name__)

METHODS = ("wrac", "wrac-structural", "fixed", "structural", "agentic")
LLM_METHODS = ("wrac", "agentic")


@dataclass(frozen=True)
class DocResult:
    doc_id: str
    chunks: tuple[Chunk, ...]
    ledger: LedgerRow
    run_log: dict
    plan: Optional[dict] = None


@dataclass
class CorpusRun:
    method: str
    docs: list[ParsedDocument] = field(default_factory=list)
    results: list[DocResult] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)

    @property
    def chunks(self) -> list[Chunk]:
        return [c for r in self.results for c in r.chunks]

    @property
    def ledger(self) -> UsageLedger:
        return UsageLedger([r.ledger for r in self.results])


def wrac_chunks(doc: ParsedDocument, plan, method: str = "wrac") -> tuple[list[Chunk], dict]:
    report = validate_plan(plan, doc)
    if not report.ok:
        logger.info("%s: repairing plan (%s)", doc.doc_id, report.summary())
        plan = repair_plan(plan, doc, report)
    return resolve_plan(plan, doc, method=method), {"repaired": not report.ok, "defects": report.summary()}


def chunk_document(
    doc: ParsedDocument,
    method: str,
    cfg: PlannerConfig = PlannerConfig(),
    client: Optional[ChatClient] = None,
    fixed_size: int = 512,
    fixed_overlap: int = 64,
) -> DocResult:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if method in LLM_METHODS and client is None:
        raise ValueError(f"method {method!r} needs a model client")
    input_tokens = output_tokens = cached = 0
    latency_ms = 0.0
    log: dict = {"doc_id": doc.doc_id, "method": method}
    plan_record = None

    if method == "wrac-structural":
        filtered = filter_boilerplate(doc) if cfg.boilerplate_filter else doc
        plan = structural_plan(filtered, cfg)
        chunks, extra = wrac_chunks(filtered, plan, method)
        plan_record = plan.to_record()
        log.update(planner_kind="structural", fallback=False, **extra)
    elif method == "wrac":
        filtered = filter_boilerplate(doc) if cfg.boilerplate_filter else doc
        outcome = llm_plan(filtered, client, cfg)
        chunks, extra = wrac_chunks(filtered, outcome.plan, method)
        plan_record = outcome.plan.to_record()
        u = outcome.usage
        input_tokens, output_tokens, cached = u.input_tokens, u.output_tokens, u.cached_tokens
        latency_ms = outcome.latency_ms
        log.update(outcome.run_log(), **extra)
    elif method == "fixed":
        chunks = fixed_size_chunk_document(doc, fixed_size, fixed_overlap, cfg.boilerplate_filter)
    elif method == "structural":
        chunks = structural_chunk(doc, cfg.max_chunk_tokens, cfg.boilerplate_filter)
    else:
        outcome = agentic_chunk(doc, client, cfg.boilerplate_filter)
        chunks = list(outcome.chunks)
        u = outcome.usage
        input_tokens, output_tokens, cached = u.input_tokens, u.output_tokens, u.cached_tokens
        latency_ms = outcome.latency_ms
        log.update(fidelity=round(outcome.fidelity, 6))

    # model latency only, so replayed runs reproduce the ledger exactly
    wall = round(latency_ms / 1000.0, 6)
    log.update(chunks=len(chunks), wall_seconds=wall)
    row = LedgerRow(doc.org, method, doc.doc_id, input_tokens, output_tokens, cached, wall, doc.total_chars)
    return DocResult(doc.doc_id, tuple(chunks), row, log, plan_record)


def parse_sources(sources: Sequence[SourceDocument], jobs: int = 1) -> tuple[list[ParsedDocument], list[tuple[str, str]]]:
    def one(src: SourceDocument):
        try:
            return parse_document(src), None
        except ValueError as exc:
            return None, (src.doc_id, str(exc))

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(one, sources))
    docs = [d for d, _ in results if d is not None]
    failures = [f for _, f in results if f is not None]
    return docs, failures


def run_corpus(
    corpus_root: Path,
    method: str,
    cfg: PlannerConfig = PlannerConfig(),
    client: Optional[ChatClient] = None,
    jobs: int = 1,
    fixed_size: int = 512,
    fixed_overlap: int = 64,
) -> CorpusRun:
    sources, load_failures = load_corpus(corpus_root)
    docs, parse_failures = parse_sources(sources, jobs)
    run = CorpusRun(method=method, docs=docs)
    run.failures = [(str(p), str(e)) for p, e in load_failures] + parse_failures

    def one(doc: ParsedDocument) -> DocResult:
        return chunk_document(doc, method, cfg, client, fixed_size, fixed_overlap)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        run.results = list(pool.map(one, docs))
    return run
