"""Retrieval metrics, aggregation and token/time/cost accounting.

Relevance is judged per (chunk, gold citation): the chunk must come from
the cited document and contain the cited evidence after case, whitespace
and heading-marker folding. Metrics are computed from a rank-by-gold
boolean matrix so they can be checked against brute-force oracles.
"""

from __future__ import annotations

import json
import logging
import math
import re
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .parse_core import SourceDocument, iter_corpus, load_document
from .resolver import Chunk
from .retrieval_index import Index, retrieve

logger = logging.getLogger(__name__)

CATEGORIES = ("Descriptive", "Analytical", "Comparative", "Boolean", "Temporal", "Procedural", "Open-Ended")
DEFAULT_KS = (3, 6)


class ManifestError(ValueError):
    pass


# --------------------------------------------------------------------------
# Corpus and queries
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GoldItem:
    doc_id: str
    evidence: str


@dataclass(frozen=True)
class QueryRecord:
    query_id: str
    text: str
    category: str
    org: str
    gold: tuple[GoldItem, ...]

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ManifestError(f"{self.query_id}: unknown category {self.category!r}")
        if not self.gold:
            raise ManifestError(f"{self.query_id}: gold citations must not be empty")

    def to_record(self) -> dict:
        return {
            "query_id": self.query_id,
            "text": self.text,
            "category": self.category,
            "org": self.org,
            "gold": [asdict(g) for g in self.gold],
        }

    @classmethod
    def from_record(cls, record: dict) -> "QueryRecord":
        try:
            return cls(
                query_id=str(record["query_id"]),
                text=record["text"],
                category=record["category"],
                org=record.get("org", ""),
                gold=tuple(GoldItem(g["doc_id"], g["evidence"]) for g in record["gold"]),
            )
        except (KeyError, TypeError) as exc:
            raise ManifestError(f"malformed query record: {exc}") from None


def load_queries(path: Union[str, Path]) -> list[QueryRecord]:
    queries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: {exc}") from None
        queries.append(QueryRecord.from_record(record))
    return queries


def dump_queries(queries: Iterable[QueryRecord]) -> str:
    return "".join(json.dumps(q.to_record(), ensure_ascii=False) + "\n" for q in queries)


def doc_id_for(path: Path, docs_root: Path) -> str:
    return path.relative_to(docs_root).with_suffix("").as_posix()


def org_for(path: Path, docs_root: Path) -> str:
    parts = path.relative_to(docs_root).parts
    return parts[0] if len(parts) > 1 else ""


def load_corpus(root: Union[str, Path]) -> tuple[list[SourceDocument], list[tuple[Path, Exception]]]:
    """Read ``<root>/docs/**``; the first directory level names the org.

    Returns the loaded documents and per-file failures.
    """
    docs_root = Path(root) / "docs"
    if not docs_root.is_dir():
        raise ManifestError(f"no docs/ directory under {root}")
    docs, failures = [], []
    for path in iter_corpus(docs_root):
        try:
            docs.append(load_document(path, doc_id_for(path, docs_root), org_for(path, docs_root)))
        except (OSError, ValueError) as exc:
            failures.append((path, exc))
    return docs, failures


# --------------------------------------------------------------------------
# Relevance and metrics
# --------------------------------------------------------------------------

_HEADING_MARK_RE = re.compile(r"(?m)^[ \t]*#{1,6}[ \t]+")


def normalize(text: str) -> str:
    return " ".join(_HEADING_MARK_RE.sub("", text).casefold().split())


def judge_relevance(chunk: Chunk, gold: GoldItem) -> bool:
    if chunk.doc_id != gold.doc_id:
        return False
    evidence = normalize(gold.evidence)
    return bool(evidence) and evidence in normalize(chunk.body)


@dataclass(frozen=True)
class Judged:
    """Relevance of a ranked list: ``hits[rank][gold]``.

    ``n_relevant`` counts every chunk in the collection that judges
    relevant to some gold item; it sizes the ideal ranking for NDCG.
    """

    hits: tuple[tuple[bool, ...], ...]
    n_gold: int
    n_relevant: int

    def relevant_at(self, rank: int) -> bool:
        return rank < len(self.hits) and any(self.hits[rank])


def judge_ranking(ranked: Sequence[Chunk], gold: Sequence[GoldItem],
                  pool: Optional[Iterable[Chunk]] = None) -> Judged:
    hits = tuple(tuple(judge_relevance(c, g) for g in gold) for c in ranked)
    pool = ranked if pool is None else list(pool)
    n_relevant = sum(1 for c in pool if any(judge_relevance(c, g) for g in gold))
    return Judged(hits, len(gold), max(n_relevant, sum(1 for row in hits if any(row))))


def recall_at_k(judged: Judged, k: int) -> float:
    """Share of gold citations supported by at least one top-k chunk."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if judged.n_gold == 0:
        raise ValueError("recall is undefined for an empty gold set")
    top = judged.hits[:k]
    found = sum(1 for g in range(judged.n_gold) if any(row[g] for row in top))
    return found / judged.n_gold


def precision_at_k(judged: Judged, k: int) -> float:
    """Relevant chunks in the top k over k; missing ranks count as misses."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return sum(1 for r in range(min(k, len(judged.hits))) if judged.relevant_at(r)) / k


def mrr(judged: Judged) -> float:
    for r in range(len(judged.hits)):
        if judged.relevant_at(r):
            return 1.0 / (r + 1)
    return 0.0


def ndcg_at_k(judged: Judged, k: int) -> float:
    """Binary-gain NDCG with log2(rank + 1) discounts."""
    if k < 1:
        raise ValueError("k must be >= 1")
    dcg = sum(1.0 / math.log2(r + 2) for r in range(min(k, len(judged.hits))) if judged.relevant_at(r))
    ideal = sum(1.0 / math.log2(r + 2) for r in range(min(k, judged.n_relevant)))
    return dcg / ideal if ideal > 0 else 0.0


def metric_names(ks: Sequence[int] = DEFAULT_KS) -> list[str]:
    desc = sorted(set(ks), reverse=True)
    return [f"recall@{k}" for k in desc] + [f"precision@{k}" for k in desc] + ["mrr"] + [f"ndcg@{k}" for k in desc]


def all_metrics(judged: Judged, ks: Sequence[int] = DEFAULT_KS) -> dict[str, float]:
    out = {}
    for name in metric_names(ks):
        if name == "mrr":
            out[name] = mrr(judged)
            continue
        metric, k = name.split("@")
        fn = {"recall": recall_at_k, "precision": precision_at_k, "ndcg": ndcg_at_k}[metric]
        out[name] = fn(judged, int(k))
    return out


@dataclass(frozen=True)
class QueryMetrics:
    query_id: str
    org: str
    category: str
    method: str
    values: dict

    def to_record(self) -> dict:
        return {"query_id": self.query_id, "org": self.org, "category": self.category,
                "method": self.method, **self.values}


def evaluate_queries(index: Index, chunks: Sequence[Chunk], queries: Sequence[QueryRecord],
                     method: str, ks: Sequence[int] = DEFAULT_KS) -> list[QueryMetrics]:
    by_id = {c.chunk_id: c for c in chunks}
    by_doc: dict[str, list[Chunk]] = defaultdict(list)
    for c in chunks:
        by_doc[c.doc_id].append(c)
    depth = max(ks)
    rows = []
    for q in queries:
        if not q.gold:
            logger.warning("query %s has no gold citations; skipped", q.query_id)
            continue
        ranked = [by_id[cid] for cid in retrieve(index, q.text, depth).chunk_ids]
        pool = [c for d in dict.fromkeys(g.doc_id for g in q.gold) for c in by_doc.get(d, ())]
        judged = judge_ranking(ranked, q.gold, pool)
        rows.append(QueryMetrics(q.query_id, q.org, q.category, method, all_metrics(judged, ks)))
    return rows


@dataclass(frozen=True)
class MetricsRow:
    group: str
    method: str
    values: dict
    count: int

    def to_record(self) -> dict:
        return {"group": self.group, "method": self.method, **self.values, "count": self.count}


def aggregate(rows: Sequence[QueryMetrics], by: str = "overall") -> list[MetricsRow]:
    """Unweighted mean of every metric per (group, method).

    ``by`` is ``org``, ``category`` or ``overall``.
    """
    if by not in ("org", "category", "overall"):
        raise ValueError(f"cannot group by {by!r}")
    buckets: dict[tuple[str, str], list[QueryMetrics]] = defaultdict(list)
    for r in rows:
        key = "Overall" if by == "overall" else getattr(r, by)
        buckets[(key, r.method)].append(r)
    out = []
    for (group, method), members in sorted(buckets.items(), key=lambda kv: _group_order(kv[0], by)):
        names = list(members[0].values)
        values = {n: sum(m.values[n] for m in members) / len(members) for n in names}
        out.append(MetricsRow(group, method, values, len(members)))
    return out


def _group_order(key: tuple[str, str], by: str):
    group, method = key
    if by == "category" and group in CATEGORIES:
        return (CATEGORIES.index(group), group, method)
    return (0, group, method)


_COLUMN_TITLES = {"recall": "Avg Recall", "precision": "Avg Precision", "ndcg": "Avg NDCG"}


def column_title(name: str) -> str:
    if name == "mrr":
        return "Avg MRR"
    metric, k = name.split("@")
    return f"{_COLUMN_TITLES[metric]}@{k}"


def format_table(headers: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    """Aligned plain-text table: first columns left, numbers right."""
    cells = [[str(h) for h in headers]] + [[_fmt(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    numeric = [all(isinstance(row[i], (int, float)) for row in rows) if rows else False for i in range(len(headers))]
    lines = []
    for n, row in enumerate(cells):
        parts = [c.rjust(w) if numeric[i] else c.ljust(w) for i, (c, w) in enumerate(zip(row, widths))]
        lines.append("  ".join(parts).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _fmt(value: object) -> str:
    if isinstance(value, float):
        return f"{value:.2f}"
    if isinstance(value, int):
        return f"{value:,}"
    return str(value)


def metrics_table(rows: Sequence[MetricsRow], group_title: str) -> str:
    if not rows:
        return ""
    names = list(rows[0].values)
    headers = [group_title, "Method", *[column_title(n) for n in names], "Count"]
    body = [[r.group, r.method, *[round(r.values[n], 4) for n in names], r.count] for r in rows]
    return format_table(headers, body)


# --------------------------------------------------------------------------
# Usage ledger and cost
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LedgerRow:
    org: str
    method: str
    file: str
    input_tokens: int = 0
    output_tokens: int = 0
    cached_tokens: int = 0
    wall_seconds: float = 0.0
    chars: int = 0

    def __post_init__(self):
        if min(self.input_tokens, self.output_tokens, self.cached_tokens, self.wall_seconds, self.chars) < 0:
            raise ValueError("ledger counts must be >= 0")


@dataclass
class UsageLedger:
    rows: list[LedgerRow] = field(default_factory=list)

    def add(self, row: LedgerRow) -> None:
        self.rows.append(row)

    def extend(self, rows: Iterable[LedgerRow]) -> None:
        self.rows.extend(rows)

    def __add__(self, other: "UsageLedger") -> "UsageLedger":
        return UsageLedger([*self.rows, *other.rows])

    def methods(self) -> list[str]:
        return list(dict.fromkeys(r.method for r in self.rows))

    def for_method(self, method: str) -> list[LedgerRow]:
        return [r for r in self.rows if r.method == method]

    def dumps(self) -> str:
        return "".join(json.dumps(asdict(r), sort_keys=True) + "\n" for r in self.rows)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "UsageLedger":
        rows = [LedgerRow(**json.loads(line)) for line in Path(path).read_text(encoding="utf-8").splitlines()
                if line.strip()]
        return cls(rows)


@dataclass(frozen=True)
class CostModel:
    price_input: float = 0.000002
    price_output: float = 0.000008
    price_cache: float = 0.0000005

    def __post_init__(self):
        if min(self.price_input, self.price_output, self.price_cache) < 0:
            raise ValueError("prices must be >= 0")


@dataclass(frozen=True)
class MethodCost:
    method: str
    input_tokens: int
    output_tokens: int
    cached_tokens: int
    input_cost: float
    output_cost: float
    cache_cost: float

    @property
    def total(self) -> float:
        return self.input_cost + self.output_cost + self.cache_cost


def compute_cost(ledger: UsageLedger, model: CostModel = CostModel()) -> dict[str, MethodCost]:
    out = {}
    for method in ledger.methods():
        rows = ledger.for_method(method)
        i = sum(r.input_tokens for r in rows)
        o = sum(r.output_tokens for r in rows)
        c = sum(r.cached_tokens for r in rows)
        out[method] = MethodCost(method, i, o, c, i * model.price_input, o * model.price_output, c * model.price_cache)
    return out


def relative_change(before: float, after: float) -> float:
    """Percentage change from ``before`` to ``after``; 0 when both are 0."""
    if before == 0:
        if after == 0:
            return 0.0
        return math.copysign(math.inf, after)
    return (after - before) / before * 100.0


def format_change(pct: float) -> str:
    if math.isinf(pct):
        return "n/a"
    return f"{pct:+.2f}%" if round(pct, 2) != 0 else "0.00%"


def cents(value: float) -> float:
    return round(value + 0.0, 2)


def cost_rows(costs: dict[str, MethodCost], before: str, after: str, model: CostModel = CostModel()) -> list[list]:
    """Cost comparison rows; relative change is taken on cent-rounded cells."""
    a, b = costs[before], costs[after]
    rows = []
    for name, price, x, y in (
        ("Input Tokens", model.price_input, a.input_cost, b.input_cost),
        ("Cache Tokens", model.price_cache, a.cache_cost, b.cache_cost),
        ("Output Tokens", model.price_output, a.output_cost, b.output_cost),
        ("Total Cost", None, a.total, b.total),
    ):
        rows.append([name, "--" if price is None else f"{price:.7f}".rstrip("0"), cents(x), cents(y),
                     format_change(relative_change(cents(x), cents(y)))])
    return rows


def cost_table(costs: dict[str, MethodCost], before: str, after: str, model: CostModel = CostModel()) -> str:
    headers = ["Component", "Pricing ($/token)", f"{before} Cost ($)", f"{after} Cost ($)", "Relative Change"]
    return format_table(headers, cost_rows(costs, before, after, model))


def _percentile(values: Sequence[float], q: float) -> float:
    return float(np.percentile(values, q)) if len(values) else 0.0


@dataclass(frozen=True)
class EfficiencySummary:
    method: str
    files: int
    total_chars: int
    total_input: int
    total_output: int
    total_cached: int
    total_time: float
    p90_time: float
    p95_time: float

    @property
    def avg_input(self) -> float:
        return self.total_input / self.files if self.files else 0.0

    @property
    def avg_output(self) -> float:
        return self.total_output / self.files if self.files else 0.0

    @property
    def avg_time(self) -> float:
        return self.total_time / self.files if self.files else 0.0


def summarize(rows: Sequence[LedgerRow], method: str) -> EfficiencySummary:
    times = [r.wall_seconds for r in rows]
    return EfficiencySummary(
        method=method,
        files=len(rows),
        total_chars=sum(r.chars for r in rows),
        total_input=sum(r.input_tokens for r in rows),
        total_output=sum(r.output_tokens for r in rows),
        total_cached=sum(r.cached_tokens for r in rows),
        total_time=sum(times),
        p90_time=_percentile(times, 90),
        p95_time=_percentile(times, 95),
    )


EFFICIENCY_METRICS = (
    ("Total Input Tokens", "total_input"),
    ("Total Output Tokens", "total_output"),
    ("Average Input Tokens per File", "avg_input"),
    ("Average Output Tokens per File", "avg_output"),
    ("Total Processing Time (s)", "total_time"),
    ("Average Time per File (s)", "avg_time"),
    ("P90 Time (s)", "p90_time"),
    ("P95 Time (s)", "p95_time"),
)


def efficiency_rows(a: EfficiencySummary, b: EfficiencySummary) -> list[dict]:
    out = []
    for label, attr in EFFICIENCY_METRICS:
        x, y = getattr(a, attr), getattr(b, attr)
        out.append({"metric": label, "before": x, "after": y, "relative_change": relative_change(x, y)})
    return out


def efficiency_table(a: EfficiencySummary, b: EfficiencySummary) -> str:
    rows = [[r["metric"], r["before"], r["after"], format_change(r["relative_change"])] for r in efficiency_rows(a, b)]
    return format_table(["Metric", a.method, b.method, "Relative Change"], rows)


def org_usage_table(ledger: UsageLedger) -> str:
    """Per-organization token and runtime breakdown."""
    headers = ["Organization", "Method", "Total Length", "Input Tokens", "Output Tokens", "Time (s)",
               "Total Files", "Avg Input Tokens", "Avg Output Tokens", "Avg Time (s)", "P90 Time (s)",
               "P95 Time (s)"]
    groups: dict[tuple[str, str], list[LedgerRow]] = defaultdict(list)
    for r in ledger.rows:
        groups[(r.org, r.method)].append(r)
    body = []
    for (org, method), rows in sorted(groups.items()):
        s = summarize(rows, method)
        body.append([org, method, s.total_chars, s.total_input, s.total_output, s.total_time, s.files,
                     s.avg_input, s.avg_output, s.avg_time, s.p90_time, s.p95_time])
    return format_table(headers, body)
