"""Chunk planning over unit IDs.

A plan is an ordered list of ID groups. It is produced either by the
deterministic structural planner below or by a language model that sees
the unit array and answers with ``{"chunks": [[...], ...]}``.
"""

from __future__ import annotations

import json
import logging
import re
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Protocol, Sequence

from .llm_client import ChatExchange, ChatRequest, PlannerUnavailable, TransportError, Usage
from .parse_core import DocumentUnit, ParsedDocument, filter_boilerplate
from .prompts import PLANNER_RETRY_INSTRUCTION, PLANNER_SYSTEM_PROMPT

logger = logging.getLogger(__name__)

STEP_HEADING_RE = re.compile(r"^\d+[.)]\s")


class PlanParseError(ValueError):
    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class PlanShapeError(PlanParseError):
    pass


@dataclass(frozen=True)
class PlannerConfig:
    max_chunk_tokens: int = 512
    hierarchy_levels: int = 3
    include_unit_text_in_payload: bool = True
    boilerplate_filter: bool = True
    # accepted for configuration compatibility; they do not change plans
    entity_density: bool = False
    semantic_cohesion: bool = False

    def __post_init__(self):
        if self.max_chunk_tokens <= 0:
            raise ValueError("max_chunk_tokens must be > 0")
        if self.hierarchy_levels != 3:
            raise ValueError("hierarchy_levels is fixed at 3")


@dataclass(frozen=True)
class ChunkPlan:
    doc_id: str
    groups: tuple[tuple[str, ...], ...]
    planner_kind: str = "structural"
    raw_response: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps({"chunks": [list(g) for g in self.groups]})

    def to_record(self) -> dict:
        return {"doc_id": self.doc_id, "chunks": [list(g) for g in self.groups]}


class ChatClient(Protocol):
    def request(self, system: str, user: str, temperature: float = 0.0) -> ChatRequest: ...

    def complete(self, request: ChatRequest) -> ChatExchange: ...


# --------------------------------------------------------------------------
# Payload
# --------------------------------------------------------------------------

def payload_records(doc: ParsedDocument, cfg: PlannerConfig = PlannerConfig()) -> list[dict]:
    records = []
    for u in doc.units:
        if cfg.include_unit_text_in_payload:
            records.append({"id": u.id, "type": u.kind, "text": u.text, "parent_heading": u.parent_heading})
        else:
            records.append({
                "id": u.id,
                "type": u.kind,
                "parent_heading": u.parent_heading,
                "token_count": u.token_count,
                "heading_level": u.heading_level,
            })
    return records


def planner_messages(doc: ParsedDocument, cfg: PlannerConfig = PlannerConfig()) -> tuple[str, str]:
    """(system, user) pair sent to the model."""
    return PLANNER_SYSTEM_PROMPT, json.dumps(payload_records(doc, cfg), ensure_ascii=False, indent=2)


def build_planner_payload(doc: ParsedDocument, cfg: PlannerConfig = PlannerConfig()) -> str:
    system, user = planner_messages(doc, cfg)
    return f"{system}\n{user}"


# --------------------------------------------------------------------------
# Structural planner
# --------------------------------------------------------------------------

@dataclass
class Outline:
    """Heading tree of a parsed document, keyed by unit ID."""

    units: dict[str, DocumentUnit]
    order: list[str]
    parent: dict[str, Optional[str]] = field(default_factory=dict)
    children: dict[str, list[str]] = field(default_factory=dict)
    direct: dict[Optional[str], list[str]] = field(default_factory=dict)
    section: dict[str, Optional[str]] = field(default_factory=dict)

    @classmethod
    def of(cls, doc: ParsedDocument) -> "Outline":
        out = cls(units={u.id: u for u in doc.units}, order=[u.id for u in doc.units])
        stack: list[DocumentUnit] = []
        out.direct[None] = []
        for u in doc.units:
            if u.is_heading:
                level = u.heading_level or 1
                while stack and (stack[-1].heading_level or 1) >= level:
                    stack.pop()
                p = stack[-1].id if stack else None
                out.parent[u.id] = p
                out.children.setdefault(u.id, [])
                out.direct.setdefault(u.id, [])
                if p is not None:
                    out.children[p].append(u.id)
                stack.append(u)
            else:
                s = stack[-1].id if stack else None
                out.section[u.id] = s
                out.direct[s].append(u.id)
        return out

    @property
    def headings(self) -> list[str]:
        return [i for i in self.order if self.units[i].is_heading]

    def chain(self, heading_id: str) -> list[str]:
        chain = [heading_id]
        while self.parent.get(chain[-1]) is not None:
            chain.append(self.parent[chain[-1]])
        return chain[::-1]

    def trail(self, heading_id: Optional[str]) -> list[str]:
        """L1/L2/L3 heading IDs for content under ``heading_id``, deduplicated."""
        if heading_id is None:
            first = self.headings[:1]
            return first
        chain = self.chain(heading_id)
        root = chain[0]
        if (self.units[root].heading_level or 1) == 1:
            l1 = root
        else:
            l1 = self.headings[0]
        l3 = heading_id
        l2 = chain[-2] if len(chain) >= 2 else l1
        return self.sort({l1, l2, l3})

    def sort(self, ids) -> list[str]:
        return sorted(ids, key=lambda i: self.units[i].ordinal)

    def subtree(self, heading_id: str) -> list[str]:
        """All unit IDs below ``heading_id`` (excluding it), in document order."""
        out: list[str] = []
        stack = list(reversed(self.children[heading_id]))
        out.extend(self.direct[heading_id])
        while stack:
            h = stack.pop()
            out.append(h)
            out.extend(self.direct[h])
            stack.extend(reversed(self.children[h]))
        return self.sort(out)

    def step_children(self, heading_id: str) -> list[str]:
        return [c for c in self.children[heading_id] if STEP_HEADING_RE.match(self.units[c].text)]

    def is_procedure(self, heading_id: str) -> bool:
        return len(self.step_children(heading_id)) >= 2


def _pack(unit_ids: Sequence[str], units: dict[str, DocumentUnit], budget: int) -> list[list[str]]:
    """Greedy split at unit boundaries so each part stays within ``budget``."""
    parts: list[list[str]] = []
    current: list[str] = []
    used = 0
    for uid in unit_ids:
        cost = units[uid].token_count
        if current and used + cost > budget:
            parts.append(current)
            current, used = [], 0
        current.append(uid)
        used += cost
    if current:
        parts.append(current)
    return parts


def procedure_runs(doc: ParsedDocument) -> list[list[str]]:
    """Member IDs of every detected procedure: its heading, step headings and step content."""
    outline = Outline.of(doc)
    runs = []
    for h in outline.headings:
        if outline.is_procedure(h):
            members = [h, *outline.direct[h]]
            for step in outline.step_children(h):
                members.append(step)
                members.extend(outline.subtree(step))
            runs.append(outline.sort(set(members)))
    return runs


def structural_plan(doc: ParsedDocument, cfg: PlannerConfig = PlannerConfig()) -> ChunkPlan:
    """Deterministic plan following the heading-trail and procedure rules.

    Procedures (a heading with two or more numbered step headings) become a
    single group. Other sections group a heading's direct content under its
    three-level trail, split at unit boundaries when over budget. Content
    before the first heading is packed up to the budget and anchored to the
    first heading, if the document has one.
    """
    if cfg.boilerplate_filter:
        doc = filter_boilerplate(doc)
    outline = Outline.of(doc)
    units = outline.units
    budget = cfg.max_chunk_tokens
    groups: list[list[str]] = []
    consumed: set[str] = set()

    for h in outline.headings:
        if h in consumed:
            continue
        if outline.is_procedure(h):
            members = set(outline.direct[h])
            for step in outline.step_children(h):
                members.add(step)
                members.update(outline.subtree(step))
            consumed |= members
            groups.append(outline.sort(set(outline.trail(h)) | members))
            continue
        content = [u for u in outline.direct[h] if u not in consumed]
        if not content:
            continue
        trail = outline.trail(h)
        for part in _pack(content, units, budget):
            groups.append(outline.sort(set(trail) | set(part)))

    orphans = outline.direct[None]
    if orphans:
        anchor = outline.trail(None)
        for part in _pack(orphans, units, budget):
            groups.append(outline.sort(set(anchor) | set(part)))

    def first_content(group: list[str]) -> int:
        return min((units[i].ordinal for i in group if not units[i].is_heading), default=0)

    groups.sort(key=first_content)
    return ChunkPlan(doc_id=doc.doc_id, groups=tuple(tuple(g) for g in groups), planner_kind="structural")


# --------------------------------------------------------------------------
# Model responses
# --------------------------------------------------------------------------

_FENCE_RE = re.compile(r"^\s*```[A-Za-z0-9_-]*\s*\n?(.*?)\n?\s*```\s*$", re.DOTALL)


def parse_plan_response(text: str, doc_id: str = "") -> ChunkPlan:
    """Parse ``{"chunks": [[id, ...], ...]}``, tolerating code fences.

    Raises:
        PlanParseError: the text is not a JSON object.
        PlanShapeError: the object lacks a list-of-lists-of-strings ``chunks``.
    """
    body = text.strip()
    fenced = _FENCE_RE.match(body)
    if fenced:
        body = fenced.group(1).strip()
    try:
        data = json.loads(body)
    except json.JSONDecodeError:
        start, end = body.find("{"), body.rfind("}")
        try:
            if start < 0 or end <= start:
                raise ValueError
            data = json.loads(body[start : end + 1])
        except ValueError:
            raise PlanParseError("plan response is not valid JSON", text) from None
    if not isinstance(data, dict) or "chunks" not in data:
        raise PlanShapeError("plan response must be an object with a 'chunks' key", text)
    chunks = data["chunks"]
    if not isinstance(chunks, list) or not all(
        isinstance(g, list) and all(isinstance(i, str) for i in g) for g in chunks
    ):
        raise PlanShapeError("'chunks' must be a list of lists of ID strings", text)
    return ChunkPlan(doc_id=doc_id, groups=tuple(tuple(g) for g in chunks), planner_kind="llm", raw_response=text)


@dataclass(frozen=True)
class PlanOutcome:
    plan: ChunkPlan
    usage: Usage
    latency_ms: float
    attempts: int
    fallback: bool = False

    def run_log(self) -> dict:
        return {
            "doc_id": self.plan.doc_id,
            "planner_kind": self.plan.planner_kind,
            "usage": {
                "input_tokens": self.usage.input_tokens,
                "output_tokens": self.usage.output_tokens,
                "cached_tokens": self.usage.cached_tokens,
            },
            "wall_seconds": round(self.latency_ms / 1000.0, 6),
            "attempts": self.attempts,
            "fallback": self.fallback,
        }


def llm_plan(doc: ParsedDocument, client: ChatClient, cfg: PlannerConfig = PlannerConfig()) -> PlanOutcome:
    """Ask the model for a plan; one corrective retry, then structural fallback.

    ``wall_seconds`` in the run log is the summed model latency, which in
    replay mode comes from the recorded exchanges and is reproducible.

    Raises:
        PlannerUnavailable: no response could be obtained at all.
    """
    if cfg.boilerplate_filter:
        doc = filter_boilerplate(doc)
    system, user = planner_messages(doc, cfg)
    usage = Usage()
    latency = 0.0
    attempts = 0
    for prompt in (user, f"{user}\n\n{PLANNER_RETRY_INSTRUCTION}"):
        attempts += 1
        try:
            exchange = client.complete(client.request(system, prompt, 0.0))
        except TransportError as exc:
            raise PlannerUnavailable(str(exc)) from exc
        usage = usage + exchange.usage
        latency += exchange.latency_ms
        try:
            plan = parse_plan_response(exchange.response_text, doc.doc_id)
        except PlanParseError as exc:
            logger.warning("%s: unusable plan response (attempt %d): %s", doc.doc_id, attempts, exc)
            continue
        return PlanOutcome(plan=plan, usage=usage, latency_ms=latency, attempts=attempts)
    logger.warning("%s: falling back to structural plan", doc.doc_id)
    plan = replace(structural_plan(doc, replace(cfg, boilerplate_filter=False)), planner_kind="structural")
    return PlanOutcome(plan=plan, usage=usage, latency_ms=latency, attempts=attempts, fallback=True)
