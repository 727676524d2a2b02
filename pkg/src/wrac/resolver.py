"""Check chunk plans against their document and resolve IDs to text."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .parse_core import ParsedDocument
from .planner import ChunkPlan, Outline
from .tokens import count_tokens


class PlanIdentityError(ValueError):
    pass


class InvalidPlanError(ValueError):
    def __init__(self, report: "ValidationReport"):
        super().__init__(f"plan does not validate: {report.summary()}")
        self.report = report


@dataclass(frozen=True)
class ValidationReport:
    unknown_ids: tuple[str, ...] = ()
    duplicate_text_ids: tuple[str, ...] = ()
    uncovered_ids: tuple[str, ...] = ()
    empty_groups: int = 0

    @property
    def ok(self) -> bool:
        return not (self.unknown_ids or self.duplicate_text_ids or self.uncovered_ids or self.empty_groups)

    def summary(self) -> str:
        return (
            f"unknown={list(self.unknown_ids)} duplicate={list(self.duplicate_text_ids)} "
            f"uncovered={list(self.uncovered_ids)} empty_groups={self.empty_groups}"
        )


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    unit_ids: tuple[str, ...]
    heading_trail: tuple[str, ...]
    body: str
    token_count: int
    method: str = "wrac"
    org: str = ""

    def to_record(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "doc_id": self.doc_id,
            "method": self.method,
            "heading_trail": list(self.heading_trail),
            "unit_ids": list(self.unit_ids),
            "body": self.body,
            "token_count": self.token_count,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Chunk":
        return cls(
            chunk_id=record["chunk_id"],
            doc_id=record["doc_id"],
            unit_ids=tuple(record.get("unit_ids", ())),
            heading_trail=tuple(record.get("heading_trail", ())),
            body=record["body"],
            token_count=record.get("token_count", count_tokens(record["body"])),
            method=record.get("method", "wrac"),
            org=record.get("org", ""),
        )


def dump_chunks(chunks: Iterable[Chunk]) -> str:
    return "".join(json.dumps(c.to_record(), ensure_ascii=False) + "\n" for c in chunks)


def _check_identity(plan: ChunkPlan, doc: ParsedDocument) -> None:
    if plan.doc_id and plan.doc_id != doc.doc_id:
        raise PlanIdentityError(f"plan is for {plan.doc_id!r}, document is {doc.doc_id!r}")


def validate_plan(plan: ChunkPlan, doc: ParsedDocument) -> ValidationReport:
    """Report unknown, duplicated and uncovered IDs.

    Heading IDs repeating across groups are expected (parents are copied
    into each child group) and are not reported.
    """
    _check_identity(plan, doc)
    units = doc.by_id()
    unknown: list[str] = []
    seen: dict[str, int] = {}
    duplicates: list[str] = []
    for group in plan.groups:
        for uid in dict.fromkeys(group):
            unit = units.get(uid)
            if unit is None:
                if uid not in unknown:
                    unknown.append(uid)
                continue
            if unit.is_heading:
                continue
            seen[uid] = seen.get(uid, 0) + 1
            if seen[uid] == 2:
                duplicates.append(uid)
    uncovered = [u.id for u in doc.content_units if u.id not in seen]
    empty = sum(1 for g in plan.groups if not g)
    return ValidationReport(tuple(unknown), tuple(duplicates), tuple(uncovered), empty)


def repair_plan(plan: ChunkPlan, doc: ParsedDocument, report: Optional[ValidationReport] = None) -> ChunkPlan:
    """Fix a plan so that it validates.

    Unknown IDs are dropped, a duplicated text ID is kept only at its first
    occurrence, and each uncovered content unit joins the group holding its
    nearest preceding sibling (same parent heading) that the original plan
    covered. Units without such a sibling get their own group under their
    heading trail. Empty groups are removed.
    """
    if report is None:
        report = validate_plan(plan, doc)
    if report.ok:
        return plan
    _check_identity(plan, doc)
    units = doc.by_id()
    outline = Outline.of(doc)

    groups: list[list[str]] = []
    placed: set[str] = set()
    for group in plan.groups:
        kept: list[str] = []
        for uid in dict.fromkeys(group):
            unit = units.get(uid)
            if unit is None:
                continue
            if not unit.is_heading:
                if uid in placed:
                    continue
                placed.add(uid)
            kept.append(uid)
        groups.append(kept)

    home = {uid: gi for gi, g in enumerate(groups) for uid in g if not units[uid].is_heading}
    originally_covered = set(home)
    content = doc.content_units
    for idx, unit in enumerate(content):
        if unit.id in originally_covered:
            continue
        target = None
        for prev in reversed(content[:idx]):
            if prev.parent_heading == unit.parent_heading and prev.id in originally_covered:
                target = home[prev.id]
                break
        if target is not None:
            groups[target].append(unit.id)
        else:
            trail = outline.trail(outline.section.get(unit.id))
            groups.append([*trail, unit.id])
            target = len(groups) - 1
        home[unit.id] = target

    # a group left with headings only carried dropped or duplicate text
    cleaned = [
        outline.sort(set(g))
        for g in groups
        if g and any(not units[i].is_heading for i in g)
    ]
    return ChunkPlan(doc_id=doc.doc_id, groups=tuple(tuple(g) for g in cleaned),
                     planner_kind=plan.planner_kind, raw_response=plan.raw_response)


def _trail(heading_texts: Sequence[str]) -> tuple[str, ...]:
    if len(heading_texts) <= 3:
        return tuple(heading_texts)
    return (heading_texts[0], heading_texts[-2], heading_texts[-1])


def resolve_plan(plan: ChunkPlan, doc: ParsedDocument, method: str = "wrac") -> list[Chunk]:
    """Assemble chunk bodies from unit text.

    Units render in document order: headings as ``# <text>`` lines,
    everything else verbatim, blocks separated by one blank line. The
    leading run of headings gives the chunk's heading trail.

    Raises:
        InvalidPlanError: the plan does not validate.
    """
    report = validate_plan(plan, doc)
    if not report.ok:
        raise InvalidPlanError(report)
    units = doc.by_id()
    chunks = []
    for ordinal, group in enumerate(plan.groups, start=1):
        ordered = sorted(dict.fromkeys(group), key=lambda i: units[i].ordinal)
        leading: list[str] = []
        for uid in ordered:
            if not units[uid].is_heading:
                break
            leading.append(units[uid].text)
        blocks: list[str] = []
        trail_lines: list[str] = []
        for pos, uid in enumerate(ordered):
            u = units[uid]
            if u.is_heading and pos < len(leading):
                trail_lines.append(f"# {u.text}")
            elif u.is_heading:
                blocks.append(f"# {u.text}")
            else:
                blocks.append(u.text)
        if trail_lines:
            blocks.insert(0, "\n".join(trail_lines))
        body = "\n\n".join(blocks)
        chunks.append(
            Chunk(
                chunk_id=f"{doc.doc_id}#{ordinal}",
                doc_id=doc.doc_id,
                unit_ids=tuple(ordered),
                heading_trail=_trail(leading),
                body=body,
                token_count=count_tokens(body),
                method=method,
                org=doc.org,
            )
        )
    return chunks
