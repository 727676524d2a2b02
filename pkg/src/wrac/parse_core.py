"""Deterministic parsing of stored HTML/Markdown into ID-addressable units.

HTML is first converted to Markdown; the Markdown is then split into
headings, paragraphs, tables, list items and code fences. Every unit gets
an ID ``<kind>_<n>`` where ``n`` is a single document-order counter shared
by all kinds, so ``heading_1, heading_2, text_3`` interleave.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from bs4 import BeautifulSoup, NavigableString, Tag
from bs4.element import Comment, Declaration, Doctype, ProcessingInstruction

from .tokens import count_tokens

UNIT_KINDS = ("heading", "text", "table", "list_item", "code")
UNIT_ID_RE = re.compile(r"^(heading|text|table|list_item|code)_([0-9]+)$")

DEFAULT_BOILERPLATE = (
    "cookie",
    "accept all",
    "sign in",
    "log in",
    "navigation",
    "skip to content",
)

MEDIA_BY_SUFFIX = {
    ".html": "html",
    ".htm": "html",
    ".md": "markdown",
    ".markdown": "markdown",
}


class ParseError(ValueError):
    pass


class NoUnitsError(ParseError):
    def __init__(self, doc_id: str = ""):
        super().__init__(f"no units{f' in {doc_id}' if doc_id else ''}")
        self.doc_id = doc_id


class EncodingError(ParseError):
    def __init__(self, offset: int, source: str = ""):
        where = f" in {source}" if source else ""
        super().__init__(f"invalid UTF-8 at byte offset {offset}{where}")
        self.offset = offset


@dataclass(frozen=True)
class SourceDocument:
    doc_id: str
    origin_path: str
    media: str
    raw: str
    org: str = ""
    byte_len: int = 0


@dataclass(frozen=True)
class DocumentUnit:
    id: str
    kind: str
    text: str
    line: int
    parent_heading: Optional[str] = None
    heading_level: Optional[int] = None
    token_count: int = 0

    @property
    def ordinal(self) -> int:
        return int(self.id.rsplit("_", 1)[1])

    @property
    def is_heading(self) -> bool:
        return self.kind == "heading"

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, record: dict) -> "DocumentUnit":
        return cls(**{k: record.get(k) for k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class ParsedDocument:
    doc_id: str
    units: tuple[DocumentUnit, ...]
    title: Optional[str] = None
    total_chars: int = 0
    markdown: str = ""
    org: str = ""
    media: str = "markdown"
    dropped: tuple[str, ...] = ()

    def unit(self, unit_id: str) -> DocumentUnit:
        return self.by_id()[unit_id]

    def by_id(self) -> dict[str, DocumentUnit]:
        return {u.id: u for u in self.units}

    @property
    def headings(self) -> list[DocumentUnit]:
        return [u for u in self.units if u.is_heading]

    @property
    def content_units(self) -> list[DocumentUnit]:
        return [u for u in self.units if not u.is_heading]

    def to_records(self) -> list[dict]:
        return [u.to_record() for u in self.units]


def dump_units(doc: ParsedDocument) -> str:
    return json.dumps(doc.to_records(), ensure_ascii=False, indent=2)


# --------------------------------------------------------------------------
# Loading
# --------------------------------------------------------------------------

def decode_utf8(data: bytes, source: str = "") -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError(exc.start, source) from None


def media_for(path: Union[str, Path]) -> str:
    suffix = Path(path).suffix.lower()
    try:
        return MEDIA_BY_SUFFIX[suffix]
    except KeyError:
        raise ParseError(f"unsupported file type {suffix!r}: {path}") from None


def load_document(path: Union[str, Path], doc_id: str = "", org: str = "") -> SourceDocument:
    path = Path(path)
    media = media_for(path)
    data = path.read_bytes()
    raw = decode_utf8(data, str(path))
    return SourceDocument(
        doc_id=doc_id or path.stem,
        origin_path=str(path),
        media=media,
        raw=raw,
        org=org,
        byte_len=len(data),
    )


def iter_corpus(docs_root: Union[str, Path]) -> Iterable[Path]:
    """Yield supported files under ``docs_root`` in sorted order."""
    root = Path(docs_root)
    for path in sorted(root.rglob("*")):
        if path.is_file() and path.suffix.lower() in MEDIA_BY_SUFFIX:
            yield path


# --------------------------------------------------------------------------
# HTML -> Markdown
# --------------------------------------------------------------------------

_DROP_TAGS = {
    "script", "style", "noscript", "template", "head", "svg", "iframe",
    "canvas", "object", "embed", "button", "input", "select", "textarea",
}
_HEADING_TAGS = {f"h{i}": i for i in range(1, 7)}
_BLOCK_TAGS = {
    "p", "div", "section", "article", "main", "header", "footer", "nav",
    "aside", "blockquote", "figure", "figcaption", "form", "fieldset",
    "address", "details", "summary", "dl", "dt", "dd", "body", "html",
    "ul", "ol", "li", "table", "pre", "hr", "tr", "td", "th", "thead",
    "tbody", "tfoot", "caption",
} | set(_HEADING_TAGS)
_SKIP_STRINGS = (Comment, Declaration, Doctype, ProcessingInstruction)
_WS_RE = re.compile(r"[ \t\r\f\v\n\xa0\u2000-\u200b\u3000]+")


def _collapse(text: str) -> str:
    # <br> survives as "\n"; everything else folds to single spaces.
    parts = [_WS_RE.sub(" ", piece).strip() for piece in text.split("\x00")]
    return "\n".join(p for p in parts if p)


def _has_block(tag: Tag) -> bool:
    return any(isinstance(d, Tag) and d.name in _BLOCK_TAGS for d in tag.descendants)


def _inline(node: Tag, skip: frozenset = frozenset()) -> str:
    out: list[str] = []

    def walk(n):
        for child in n.children:
            if isinstance(child, _SKIP_STRINGS):
                continue
            if isinstance(child, NavigableString):
                out.append(str(child))
            elif isinstance(child, Tag):
                if child.name in _DROP_TAGS or child.name in skip:
                    continue
                if child.name == "br":
                    out.append("\x00")
                elif child.name in _BLOCK_TAGS:
                    out.append(" ")
                    walk(child)
                    out.append(" ")
                else:
                    walk(child)

    walk(node)
    return _collapse("".join(out))


def _list_lines(tag: Tag, depth: int) -> list[str]:
    lines: list[str] = []
    ordered = tag.name == "ol"
    try:
        number = int(tag.get("start", 1))
    except (TypeError, ValueError):
        number = 1
    for li in tag.find_all("li", recursive=False):
        marker = f"{number}." if ordered else "-"
        number += 1
        text = _inline(li, skip=frozenset({"ul", "ol"})).replace("\n", " ")
        if text:
            lines.append("  " * depth + f"{marker} {text}")
        for nested in li.find_all(["ul", "ol"]):
            # only lists whose nearest list ancestor is this li
            if nested.find_parent("li") is li:
                lines.extend(_list_lines(nested, depth + 1))
    return lines


def _table_lines(tag: Tag) -> list[str]:
    rows: list[list[str]] = []
    for tr in tag.find_all("tr"):
        if tr.find_parent("table") is not tag:
            continue
        cells = [
            _inline(c).replace("\n", " ").replace("|", "\\|")
            for c in tr.find_all(["td", "th"], recursive=False)
        ]
        if any(cells):
            rows.append(cells)
    if not rows:
        return []
    width = max(len(r) for r in rows)
    lines = []
    for i, row in enumerate(rows):
        row = row + [""] * (width - len(row))
        lines.append("| " + " | ".join(row) + " |")
        if i == 0:
            lines.append("| " + " | ".join(["---"] * width) + " |")
    return lines


def _blocks(node: Tag) -> list[str]:
    blocks: list[str] = []
    buf: list[str] = []

    def flush():
        text = _collapse("".join(buf))
        buf.clear()
        if text:
            blocks.append(text)

    for child in node.children:
        if isinstance(child, _SKIP_STRINGS):
            continue
        if isinstance(child, NavigableString):
            buf.append(str(child))
            continue
        if not isinstance(child, Tag):
            continue
        name = child.name
        if name in _DROP_TAGS:
            continue
        if name == "br":
            buf.append("\x00")
        elif name in _HEADING_TAGS:
            flush()
            text = _inline(child).replace("\n", " ")
            if text:
                blocks.append("#" * _HEADING_TAGS[name] + " " + text)
        elif name in ("ul", "ol"):
            flush()
            lines = _list_lines(child, 0)
            if lines:
                blocks.append("\n".join(lines))
        elif name == "table":
            flush()
            lines = _table_lines(child)
            if lines:
                blocks.append("\n".join(lines))
        elif name == "pre":
            flush()
            code = child.get_text().strip("\n")
            if code.strip():
                blocks.append("```\n" + code + "\n```")
        elif name == "hr":
            flush()
        elif name in _BLOCK_TAGS or _has_block(child):
            flush()
            blocks.extend(_blocks(child))
        else:
            buf.append(_inline_raw(child))
    flush()
    return blocks


def _inline_raw(tag: Tag) -> str:
    out: list[str] = []
    for d in tag.descendants:
        if isinstance(d, _SKIP_STRINGS):
            continue
        if isinstance(d, NavigableString):
            if any(p.name in _DROP_TAGS for p in d.parents if isinstance(p, Tag)):
                continue
            out.append(str(d))
        elif isinstance(d, Tag) and d.name == "br":
            out.append("\x00")
    return "".join(out)


def html_to_markdown(html: Union[str, bytes]) -> str:
    """Convert HTML to Markdown, keeping text verbatim.

    Headings map to ATX markers, lists and tables keep their rows, and
    script/style contents are dropped. Malformed markup is handled on a
    best-effort basis by the stdlib HTML parser.

    Raises:
        EncodingError: ``html`` is bytes that are not valid UTF-8.
    """
    if isinstance(html, bytes):
        html = decode_utf8(html)
    soup = BeautifulSoup(html, "html.parser")
    return "\n\n".join(_blocks(soup))


# --------------------------------------------------------------------------
# Markdown -> units
# --------------------------------------------------------------------------

_ATX_RE = re.compile(r"^ {0,3}(#{1,6})(?:[ \t]+(.*?))?[ \t]*$")
_ATX_CLOSE_RE = re.compile(r"(?:^|[ \t]+)#+[ \t]*$")
_FENCE_RE = re.compile(r"^ {0,3}(`{3,}|~{3,})")
_HR_RE = re.compile(r"^ {0,3}([-*_])(?:[ \t]*\1){2,}[ \t]*$")
_SETEXT_RE = re.compile(r"^ {0,3}(=+|-+)[ \t]*$")
_LIST_RE = re.compile(r"^(\s*)([-*+]|\d{1,9}[.)])[ \t]+\S")
_TABLE_RE = re.compile(r"^\s*\|")


def _heading_match(line: str):
    m = _ATX_RE.match(line)
    if not m:
        return None
    text = _ATX_CLOSE_RE.sub("", m.group(2) or "").strip()
    return len(m.group(1)), text


def _block_start(line: str) -> bool:
    return bool(
        _ATX_RE.match(line)
        or _FENCE_RE.match(line)
        or _TABLE_RE.match(line)
        or _HR_RE.match(line)
        or _LIST_RE.match(line)
    )


def _indent(line: str) -> int:
    return len(line) - len(line.lstrip(" \t"))


@dataclass
class _Builder:
    units: list[DocumentUnit] = field(default_factory=list)
    stack: list[tuple[int, str]] = field(default_factory=list)

    def add(self, kind: str, text: str, line: int, level: Optional[int] = None) -> None:
        text = text.rstrip()
        if not text.strip():
            return
        if kind == "heading":
            while self.stack and self.stack[-1][0] >= level:
                self.stack.pop()
        parent = self.stack[-1][1] if self.stack else None
        self.units.append(
            DocumentUnit(
                id=f"{kind}_{len(self.units) + 1}",
                kind=kind,
                text=text,
                line=line,
                parent_heading=parent,
                heading_level=level if kind == "heading" else None,
                token_count=count_tokens(text),
            )
        )
        if kind == "heading":
            self.stack.append((level, text))


def _split_list(lines: Sequence[str], start: int) -> tuple[list[tuple[int, list[str]]], bool, int]:
    """Collect a list block beginning at ``start``.

    Returns the top-level items as ``(line_index, lines)``, whether the list
    is ordered, and the index just past the block.
    """
    first = _LIST_RE.match(lines[start])
    base = len(first.group(1))
    ordered = first.group(2)[0].isdigit()
    items: list[tuple[int, list[str]]] = []
    i = start
    n = len(lines)
    while i < n:
        line = lines[i]
        m = _LIST_RE.match(line)
        if not line.strip():
            # a blank line ends the block unless the list continues after it
            j = i + 1
            while j < n and not lines[j].strip():
                j += 1
            if j < n and items:
                nxt = lines[j]
                mm = _LIST_RE.match(nxt)
                if (mm and len(mm.group(1)) <= base + 1 and mm.group(2)[0].isdigit() == ordered) or (
                    not mm and _indent(nxt) > base and not _block_start(nxt)
                ) or (mm and len(mm.group(1)) > base):
                    items[-1][1].extend([""] * (j - i))
                    i = j
                    continue
            break
        if m and len(m.group(1)) <= base:
            if m.group(2)[0].isdigit() != ordered:
                break
            items.append((i, [line]))
        elif m or _indent(line) > base:
            items[-1][1].append(line)
        elif _block_start(line):
            break
        else:
            # lazy continuation of the previous item
            items[-1][1].append(line)
        i += 1
    return items, ordered, i


def parse_markdown(markdown: str, doc_id: str = "doc", org: str = "", media: str = "markdown") -> ParsedDocument:
    """Split Markdown into ordered, ID-addressable units.

    Line numbers are 1-based positions in ``markdown``. Numbered lists are
    kept whole as one ``list_item`` unit; bullet lists yield one unit per
    top-level item.

    Raises:
        NoUnitsError: nothing but whitespace or markup was found.
    """
    lines = markdown.splitlines()
    b = _Builder()
    i, n = 0, len(lines)

    # YAML front matter is metadata, not content
    if n and lines[0].strip() == "---":
        for j in range(1, n):
            if lines[j].strip() in ("---", "..."):
                i = j + 1
                break

    while i < n:
        line = lines[i]
        if not line.strip():
            i += 1
            continue

        fence = _FENCE_RE.match(line)
        if fence:
            marker = fence.group(1)
            j = i + 1
            while j < n and not lines[j].lstrip().startswith(marker[0] * len(marker)):
                j += 1
            end = min(j, n - 1)
            b.add("code", "\n".join(lines[i : end + 1]), i + 1)
            i = end + 1
            continue

        heading = _heading_match(line)
        if heading:
            level, text = heading
            b.add("heading", text, i + 1, level)
            i += 1
            continue

        if _HR_RE.match(line):
            i += 1
            continue

        if _TABLE_RE.match(line):
            j = i
            while j < n and _TABLE_RE.match(lines[j]):
                j += 1
            b.add("table", "\n".join(lines[i:j]), i + 1)
            i = j
            continue

        if _LIST_RE.match(line):
            items, ordered, j = _split_list(lines, i)
            if ordered:
                b.add("list_item", "\n".join(sum((it[1] for it in items), [])), i + 1)
            else:
                for start, item_lines in items:
                    b.add("list_item", "\n".join(item_lines), start + 1)
            i = j
            continue

        # setext heading: a single line underlined with === or ---
        if i + 1 < n and _SETEXT_RE.match(lines[i + 1]):
            level = 1 if lines[i + 1].strip().startswith("=") else 2
            b.add("heading", line.strip(), i + 1, level)
            i += 2
            continue

        j = i + 1
        while j < n and lines[j].strip() and not _block_start(lines[j]):
            j += 1
        para = lines[i:j]
        b.add("text", "\n".join(para), i + 1)
        i = j

    if not b.units:
        raise NoUnitsError(doc_id)
    title = next((u.text for u in b.units if u.is_heading and u.heading_level == 1), None)
    return ParsedDocument(
        doc_id=doc_id,
        units=tuple(b.units),
        title=title,
        total_chars=len(markdown),
        markdown=markdown,
        org=org,
        media=media,
    )


def parse_document(source: SourceDocument) -> ParsedDocument:
    markdown = html_to_markdown(source.raw) if source.media == "html" else source.raw
    return parse_markdown(markdown, doc_id=source.doc_id, org=source.org, media=source.media)


def is_boilerplate(text: str, lexicon: Sequence[str] = DEFAULT_BOILERPLATE) -> bool:
    folded = text.casefold()
    return any(stem.casefold() in folded for stem in lexicon)


def filter_boilerplate(doc: ParsedDocument, lexicon: Sequence[str] = DEFAULT_BOILERPLATE) -> ParsedDocument:
    """Drop cookie banners, login prompts and navigation units.

    Surviving units keep their IDs. Units whose parent heading was dropped
    are re-parented to that heading's own parent.
    """
    kept: list[DocumentUnit] = []
    dropped: list[str] = list(doc.dropped)
    alias: dict[str, Optional[str]] = {}

    def resolve(parent: Optional[str]) -> Optional[str]:
        seen = set()
        while parent in alias and parent not in seen:
            seen.add(parent)
            parent = alias[parent]
        return parent

    for unit in doc.units:
        if is_boilerplate(unit.text, lexicon):
            dropped.append(unit.id)
            if unit.is_heading:
                alias[unit.text] = resolve(unit.parent_heading)
            continue
        parent = resolve(unit.parent_heading)
        kept.append(unit if parent == unit.parent_heading else replace(unit, parent_heading=parent))
    if len(kept) == len(doc.units):
        return doc
    title = next((u.text for u in kept if u.is_heading and u.heading_level == 1), None)
    return replace(doc, units=tuple(kept), title=title, dropped=tuple(dropped))
