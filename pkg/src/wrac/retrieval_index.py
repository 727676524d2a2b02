"""Lexical BM25 index over chunks, with an optional dense ranking hook."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

from .resolver import Chunk

INDEX_VERSION = 1
K1 = 1.2
B = 0.75
TRAIL_WEIGHT = 2

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class IndexBuildError(ValueError):
    pass


@dataclass(frozen=True)
class IndexedChunk:
    body: str
    heading_trail: tuple[str, ...]
    doc_id: str
    method: str


@dataclass
class Index:
    chunks: dict[str, IndexedChunk] = field(default_factory=dict)
    postings: dict[str, dict[str, int]] = field(default_factory=dict)
    doc_lengths: dict[str, int] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.chunks)

    @property
    def avg_len(self) -> float:
        return sum(self.doc_lengths.values()) / self.n if self.n else 0.0

    def to_record(self) -> dict:
        return {
            "version": INDEX_VERSION,
            "params": {"k1": K1, "b": B, "trail_weight": TRAIL_WEIGHT},
            "chunks": {
                cid: {"body": c.body, "heading_trail": list(c.heading_trail), "doc_id": c.doc_id, "method": c.method}
                for cid, c in sorted(self.chunks.items())
            },
        }

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_record(), ensure_ascii=False, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Index":
        record = json.loads(Path(path).read_text(encoding="utf-8"))
        if record.get("version") != INDEX_VERSION:
            raise IndexBuildError(f"unsupported index version {record.get('version')!r}")
        chunks = [
            Chunk(
                chunk_id=cid,
                doc_id=c["doc_id"],
                unit_ids=(),
                heading_trail=tuple(c["heading_trail"]),
                body=c["body"],
                token_count=0,
                method=c["method"],
            )
            for cid, c in record["chunks"].items()
        ]
        return build_index(chunks)


@dataclass(frozen=True)
class RetrievalResult:
    ranked: tuple[tuple[str, float], ...]

    @property
    def chunk_ids(self) -> list[str]:
        return [cid for cid, _ in self.ranked]


def build_index(chunks: Iterable[Chunk]) -> Index:
    """Index chunk bodies plus heading trails; trail terms count twice.

    Raises:
        IndexBuildError: empty input or a repeated chunk_id.
    """
    index = Index()
    for chunk in chunks:
        if chunk.chunk_id in index.chunks:
            raise IndexBuildError(f"duplicate chunk_id {chunk.chunk_id!r}")
        index.chunks[chunk.chunk_id] = IndexedChunk(chunk.body, tuple(chunk.heading_trail), chunk.doc_id, chunk.method)
        tf = Counter(tokenize(chunk.body))
        for heading in chunk.heading_trail:
            for term in tokenize(heading):
                tf[term] += TRAIL_WEIGHT
        index.doc_lengths[chunk.chunk_id] = sum(tf.values())
        for term, count in tf.items():
            index.postings.setdefault(term, {})[chunk.chunk_id] = count
    if not index.chunks:
        raise IndexBuildError("cannot build an index from zero chunks")
    return index


def idf(n: int, df: int) -> float:
    return math.log((n - df + 0.5) / (df + 0.5) + 1.0)


def score_all(index: Index, query_text: str) -> dict[str, float]:
    terms = list(dict.fromkeys(tokenize(query_text)))
    n, avg = index.n, index.avg_len
    scores: dict[str, float] = {}
    for term in terms:
        posting = index.postings.get(term)
        if not posting:
            continue
        w = idf(n, len(posting))
        for cid, tf in posting.items():
            norm = K1 * (1 - B + B * index.doc_lengths[cid] / avg)
            scores[cid] = scores.get(cid, 0.0) + w * tf * (K1 + 1) / (tf + norm)
    return scores


def retrieve(index: Index, query_text: str, k: int) -> RetrievalResult:
    """Top-``k`` chunks by BM25, ties broken by ascending chunk_id.

    Chunks that share no term with the query are never returned.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = score_all(index, query_text)
    ranked = sorted(((cid, s) for cid, s in scores.items() if s > 0), key=lambda p: (-p[1], p[0]))
    return RetrievalResult(tuple(ranked[:k]))


Embedder = Callable[[str], Sequence[float]]


def retrieve_dense(index: Index, query_text: str, k: int, embed: Embedder,
                   cache: Optional[dict[str, Sequence[float]]] = None) -> RetrievalResult:
    """Cosine ranking with a caller-supplied embedding function."""
    if k < 1:
        raise ValueError("k must be >= 1")
    cache = {} if cache is None else cache

    def unit(v: Sequence[float]) -> list[float]:
        norm = math.sqrt(sum(x * x for x in v))
        return [x / norm for x in v] if norm else [0.0 for _ in v]

    q = unit(embed(query_text))
    scored = []
    for cid, c in index.chunks.items():
        if cid not in cache:
            cache[cid] = unit(embed(" ".join([*c.heading_trail, c.body])))
        scored.append((cid, sum(a * b for a, b in zip(q, cache[cid]))))
    scored.sort(key=lambda p: (-p[1], p[0]))
    return RetrievalResult(tuple(scored[:k]))
