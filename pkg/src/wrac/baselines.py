"""Comparison chunkers: fixed-size windows, per-section rules, and agentic.

The agentic chunker hands the whole Markdown to a model and parses
``[HEAD]a > b > c[/HEAD]`` blocks out of the reply; it is the only baseline
whose output text can drift from the source.
"""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass
from typing import Optional, Sequence

from .llm_client import ChatExchange, TransportError, PlannerUnavailable, Usage
from .parse_core import ParsedDocument, filter_boilerplate
from .planner import ChatClient, Outline, _pack
from .prompts import AGENTIC_SYSTEM_PROMPT
from .resolver import Chunk
from .tokens import count_tokens

DEFAULT_FIXED_SIZE = 512
DEFAULT_FIXED_OVERLAP = 64


class AgenticParseError(ValueError):
    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


def render_markdown(doc: ParsedDocument) -> str:
    """Markdown text of the (possibly filtered) units, headings with their level."""
    blocks = []
    for u in doc.units:
        if u.is_heading:
            blocks.append("#" * (u.heading_level or 1) + " " + u.text)
        else:
            blocks.append(u.text)
    return "\n\n".join(blocks)


_WORD_RE = re.compile(r"\S+")


def fixed_size_chunk(
    text: str,
    size_tokens: int = DEFAULT_FIXED_SIZE,
    overlap_tokens: int = DEFAULT_FIXED_OVERLAP,
    doc_id: str = "doc",
    org: str = "",
) -> list[Chunk]:
    """Slide a window of ``size_tokens`` words with stride ``size - overlap``.

    Tokens here are whitespace-delimited words, so windows always end on a
    whitespace boundary. Each chunk body is the verbatim source slice from
    its first to its last word. The final window may be short.
    """
    if not size_tokens > overlap_tokens >= 0:
        raise ValueError("fixed-size chunking needs size_tokens > overlap_tokens >= 0")
    spans = [m.span() for m in _WORD_RE.finditer(text)]
    stride = size_tokens - overlap_tokens
    chunks = []
    for n, start in enumerate(range(0, len(spans), stride), start=1):
        window = spans[start : start + size_tokens]
        body = text[window[0][0] : window[-1][1]]
        chunks.append(
            Chunk(
                chunk_id=f"{doc_id}#{n}",
                doc_id=doc_id,
                unit_ids=(),
                heading_trail=(),
                body=body,
                token_count=count_tokens(body),
                method="fixed",
                org=org,
            )
        )
    return chunks


def fixed_size_chunk_document(
    doc: ParsedDocument,
    size_tokens: int = DEFAULT_FIXED_SIZE,
    overlap_tokens: int = DEFAULT_FIXED_OVERLAP,
    boilerplate_filter: bool = True,
) -> list[Chunk]:
    if boilerplate_filter:
        doc = filter_boilerplate(doc)
    return fixed_size_chunk(render_markdown(doc), size_tokens, overlap_tokens, doc.doc_id, doc.org)


def structural_chunk(doc: ParsedDocument, budget: int = 512, boilerplate_filter: bool = True) -> list[Chunk]:
    """One chunk per heading section: the heading plus its direct content.

    Oversized sections split at unit boundaries and every part repeats the
    heading. There is no ancestor trail, no parent duplication and no
    procedure detection.
    """
    if boilerplate_filter:
        doc = filter_boilerplate(doc)
    outline = Outline.of(doc)
    units = outline.units
    sections: list[tuple[Optional[str], list[str]]] = [(None, outline.direct[None])]
    sections += [(h, outline.direct[h]) for h in outline.headings]
    chunks = []
    for heading, content in sections:
        if not content:
            continue
        for part in _pack(content, units, budget):
            blocks = [units[i].text for i in part]
            trail: tuple[str, ...] = ()
            ids = list(part)
            if heading is not None:
                blocks.insert(0, f"# {units[heading].text}")
                trail = (units[heading].text,)
                ids.insert(0, heading)
            body = "\n\n".join(blocks)
            chunks.append(
                Chunk(
                    chunk_id=f"{doc.doc_id}#{len(chunks) + 1}",
                    doc_id=doc.doc_id,
                    unit_ids=tuple(ids),
                    heading_trail=trail,
                    body=body,
                    token_count=count_tokens(body),
                    method="structural",
                    org=doc.org,
                )
            )
    return chunks


def build_agentic_prompt(markdown: str) -> str:
    if not markdown:
        return AGENTIC_SYSTEM_PROMPT
    return f"{AGENTIC_SYSTEM_PROMPT}\n{markdown}"


@dataclass(frozen=True)
class AgenticEntry:
    heading_trail: tuple[str, ...]
    body: str


@dataclass(frozen=True)
class AgenticResponse:
    raw: str
    parsed: tuple[AgenticEntry, ...]


_HEAD_RE = re.compile(r"\[HEAD\](.*?)\[/HEAD\]", re.DOTALL)


def parse_agentic_response(text: str) -> AgenticResponse:
    """Split a ``[HEAD]...[/HEAD]`` formatted reply into (trail, body) entries.

    Entries with an empty body are dropped.

    Raises:
        AgenticParseError: the reply has no ``[HEAD]`` markers.
    """
    marks = list(_HEAD_RE.finditer(text))
    if not marks:
        raise AgenticParseError("no [HEAD] markers in agentic response", text)
    entries = []
    for i, m in enumerate(marks):
        end = marks[i + 1].start() if i + 1 < len(marks) else len(text)
        body = text[m.end() : end].strip()
        trail = tuple(p.strip() for p in m.group(1).split(">") if p.strip())
        if body:
            entries.append(AgenticEntry(trail[:3], body))
    return AgenticResponse(raw=text, parsed=tuple(entries))


def fidelity_ratio(chunks: Sequence[Chunk], source: str) -> float:
    """Similarity of the joined agentic bodies to the source, in [0, 1].

    A diagnostic only: 1.0 means the model reproduced the text exactly.
    """
    joined = " ".join(" ".join(c.body.split()) for c in chunks)
    return difflib.SequenceMatcher(None, joined, " ".join(source.split()), autojunk=False).ratio()


@dataclass(frozen=True)
class AgenticOutcome:
    chunks: tuple[Chunk, ...]
    usage: Usage
    latency_ms: float
    fidelity: float


def agentic_chunk(doc: ParsedDocument, client: ChatClient, boilerplate_filter: bool = True) -> AgenticOutcome:
    if boilerplate_filter:
        doc = filter_boilerplate(doc)
    markdown = render_markdown(doc)
    try:
        exchange: ChatExchange = client.complete(client.request(AGENTIC_SYSTEM_PROMPT, markdown, 0.0))
    except TransportError as exc:
        raise PlannerUnavailable(str(exc)) from exc
    response = parse_agentic_response(exchange.response_text)
    chunks = []
    for n, entry in enumerate(response.parsed, start=1):
        head = "\n".join(f"# {h}" for h in entry.heading_trail)
        body = f"{head}\n\n{entry.body}" if head else entry.body
        chunks.append(
            Chunk(
                chunk_id=f"{doc.doc_id}#{n}",
                doc_id=doc.doc_id,
                unit_ids=(),
                heading_trail=entry.heading_trail,
                body=body,
                token_count=count_tokens(body),
                method="agentic",
                org=doc.org,
            )
        )
    return AgenticOutcome(tuple(chunks), exchange.usage, exchange.latency_ms, fidelity_ratio(chunks, markdown))
