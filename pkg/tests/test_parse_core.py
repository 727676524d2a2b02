import json

import pytest

from wrac.parse_core import (
    EncodingError,
    NoUnitsError,
    decode_utf8,
    dump_units,
    filter_boilerplate,
    html_to_markdown,
    is_boilerplate,
    load_document,
    parse_document,
    parse_markdown,
)
from wrac.tokens import approx_tokens, count_tokens, set_tokenizer


# html_to_markdown

def test_html_heading_and_paragraph():
    assert html_to_markdown("<h1>Main Title</h1><p>Body.</p>") == "# Main Title\n\nBody."


def test_html_h2():
    assert html_to_markdown("<h2>Section Title</h2>") == "## Section Title"


def test_html_drops_script():
    assert html_to_markdown("<script>x=1</script><p>Keep</p>") == "Keep"


def test_html_all_heading_levels():
    html = "".join(f"<h{i}>T{i}</h{i}>" for i in range(1, 7))
    lines = [line for line in html_to_markdown(html).split("\n") if line]
    assert lines == [f"{'#' * i} T{i}" for i in range(1, 7)]


def test_html_lists_and_tables():
    md = html_to_markdown(
        "<ul><li>one</li><li>two</li></ul><ol><li>first</li><li>second</li></ol>"
        "<table><tr><th>a</th><th>b</th></tr><tr><td>1</td><td>2</td></tr></table>"
    )
    assert "- one\n- two" in md
    assert "1. first\n2. second" in md
    assert "| a | b |" in md and "| 1 | 2 |" in md


def test_html_style_and_head_dropped():
    md = html_to_markdown("<html><head><title>X</title><style>p{}</style></head><body><p>Hi</p></body></html>")
    assert md == "Hi"


def test_html_bytes_invalid_utf8_names_offset():
    with pytest.raises(EncodingError, match="byte offset 3"):
        html_to_markdown(b"<p>\xff</p>")


def test_decode_utf8_offset():
    with pytest.raises(EncodingError) as err:
        decode_utf8(b"abc\xc3(")
    assert err.value.offset == 3


# parse_markdown

def test_heading_ids_and_parent():
    doc = parse_markdown("# Main Title\n\nIntro.\n\n\n## Section Title\n")
    second = [u for u in doc.units if u.kind == "heading"][1]
    assert second.to_record()["id"] == "heading_3"
    assert second.line == 6
    assert second.parent_heading == "Main Title"


def test_parent_heading_and_line_numbers():
    doc = parse_markdown("# Main Title\n\n\n\n## Section Title\n")
    u = doc.units[1]
    assert (u.id, u.text, u.line, u.parent_heading) == ("heading_2", "Section Title", 5, "Main Title")


def test_single_paragraph():
    doc = parse_markdown("Hello.")
    assert len(doc.units) == 1
    rec = doc.units[0].to_record()
    assert rec["id"] == "text_1"
    assert rec["parent_heading"] is None


def test_example2_parent_chain(example2):
    expected = [
        ("heading_1", None), ("heading_2", "How to Change a Tyre"),
        ("heading_3", "Steps to Change a Tyre"), ("text_4", "1. Park Safely"),
        ("heading_5", "Steps to Change a Tyre"), ("text_6", "2. Gather Tools"),
        ("heading_7", "Steps to Change a Tyre"), ("text_8", "3. Remove the Wheel Cover"),
        ("heading_9", "Steps to Change a Tyre"), ("text_10", "4. Loosen the Lug Nuts"),
    ]
    assert [(u.id, u.parent_heading) for u in example2.units] == expected


def test_empty_document_has_no_units():
    with pytest.raises(NoUnitsError, match="no units"):
        parse_markdown("   \n\n")


def test_kinds():
    md = "# T\n\n| a | b |\n| - | - |\n| 1 | 2 |\n\n```\ncode here\n```\n\n1. one\n2. two\n\n- x\n- y\n"
    kinds = [u.kind for u in parse_markdown(md).units]
    assert kinds == ["heading", "table", "code", "list_item", "list_item", "list_item"]


def test_setext_heading():
    doc = parse_markdown("Title\n=====\n\nBody text.\n")
    assert doc.units[0].kind == "heading" and doc.units[0].heading_level == 1
    assert doc.units[1].parent_heading == "Title"


def test_ids_unique_and_ordinals_increase():
    doc = parse_markdown("# A\n\nx\n\n## B\n\n- one\n- two\n\ny\n")
    ids = [u.id for u in doc.units]
    assert len(set(ids)) == len(ids)
    assert [u.ordinal for u in doc.units] == list(range(1, len(ids) + 1))


def test_dump_units_is_deterministic():
    md = "# A\n\ntext\n"
    assert dump_units(parse_markdown(md)) == dump_units(parse_markdown(md))
    json.loads(dump_units(parse_markdown(md)))


def test_html_and_markdown_sources(tmp_path):
    (tmp_path / "a.html").write_text("<h1>A</h1><p>alpha</p>", encoding="utf-8")
    (tmp_path / "b.md").write_text("# B\n\nbeta\n", encoding="utf-8")
    a = parse_document(load_document(tmp_path / "a.html", "a"))
    b = parse_document(load_document(tmp_path / "b.md", "b"))
    assert a.media == "html" and b.media == "markdown"
    assert [u.text for u in a.units] == ["A", "alpha"]


# tokens

@pytest.mark.parametrize("text,expected", [("", 0), ("Section Title", 4), ("x" * 4000, 1000)])
def test_approx_tokens(text, expected):
    assert approx_tokens(text) == expected


def test_tokenizer_override():
    set_tokenizer(lambda t: len(t.split()))
    try:
        assert count_tokens("a b c") == 3
    finally:
        set_tokenizer(None)
    assert count_tokens("a b c") == 2


# boilerplate

def test_cookie_unit_removed(example1):
    assert is_boilerplate("We use cookies to improve your experience.")
    filtered = filter_boilerplate(example1)
    assert "text_5" not in [u.id for u in filtered.units]


def test_real_heading_kept(example1):
    assert not is_boilerplate("EXCESS BAGGAGE CHARGES")
    assert filter_boilerplate(example1).units[0].text == "EXCESS BAGGAGE CHARGES"


def test_clean_document_is_fixpoint(example2):
    assert filter_boilerplate(example2).units == example2.units


def test_dropped_heading_reparents_children():
    doc = parse_markdown("# Top\n\n## Sign in to continue\n\nbody\n")
    filtered = filter_boilerplate(doc)
    body = [u for u in filtered.units if u.text == "body"][0]
    assert body.parent_heading == "Top"
    assert body.id == "text_3"
