import json

import pytest

from wrac.llm_client import PlannerUnavailable, StubClient, TransportError
from wrac.parse_core import parse_markdown
from wrac.planner import (
    PlannerConfig,
    PlanParseError,
    PlanShapeError,
    build_planner_payload,
    llm_plan,
    parse_plan_response,
    planner_messages,
    structural_plan,
)

TWO_GROUPS = '{"chunks": [["heading_1","heading_2","text_3","text_4"],["heading_1","heading_5","text_6"]]}'


# payload

def test_payload_matches_example_input(example1):
    _, user = planner_messages(example1)
    records = json.loads(user)
    assert records[:4] == [
        {"id": "heading_1", "type": "heading", "text": "EXCESS BAGGAGE CHARGES", "parent_heading": None},
        {"id": "heading_2", "type": "heading", "text": "Packing heavy?", "parent_heading": "EXCESS BAGGAGE CHARGES"},
        {"id": "text_3", "type": "text", "text": "Fly without baggage worries...", "parent_heading": "Packing heavy?"},
        {"id": "text_4", "type": "text", "text": "Fees apply per kg.", "parent_heading": "Packing heavy?"},
    ]


def test_metadata_only_payload(example1):
    payload = build_planner_payload(example1, PlannerConfig(include_unit_text_in_payload=False))
    assert "heading_1" in payload
    _, user = planner_messages(example1, PlannerConfig(include_unit_text_in_payload=False))
    assert "heading_1" in user and "Fly without baggage worries" not in user


def test_single_unit_payload():
    _, user = planner_messages(parse_markdown("Hello."))
    assert len(json.loads(user)) == 1


# structural planner

def test_example1_golden(example1):
    assert structural_plan(example1).to_json() == '{"chunks": [["heading_1", "heading_2", "text_3", "text_4"]]}'


def test_example2_golden(example2):
    plan = structural_plan(example2)
    assert [list(g) for g in plan.groups] == [[
        "heading_1", "heading_2", "heading_3", "text_4", "heading_5", "text_6",
        "heading_7", "text_8", "heading_9", "text_10",
    ]]


def test_parent_heading_repeated_in_sibling_groups():
    doc = parse_markdown("# Guide\n\n## Fares\n\nFare text.\n\n## Routes\n\nRoute text.\n")
    groups = structural_plan(doc).groups
    assert len(groups) == 2
    assert all("heading_1" in g for g in groups)


def test_budget_split_keeps_trail():
    paras = "\n\n".join("word " * 60 for _ in range(4))
    doc = parse_markdown(f"# Top\n\n## Sub\n\n{paras}\n")
    groups = structural_plan(doc, PlannerConfig(max_chunk_tokens=100)).groups
    assert len(groups) > 1
    assert all(g[:2] == ("heading_1", "heading_2") for g in groups)


def test_orphans_anchor_to_first_heading():
    doc = parse_markdown("Lead paragraph.\n\n# Title\n\nBody.\n")
    groups = structural_plan(doc).groups
    assert groups[0] == ("text_1", "heading_2")


def test_hierarchy_levels_validated():
    with pytest.raises(ValueError):
        PlannerConfig(hierarchy_levels=4)


# parse_plan_response

def test_parse_two_groups():
    assert len(parse_plan_response(TWO_GROUPS).groups) == 2


def test_parse_fenced():
    assert parse_plan_response('```json\n{"chunks": [["heading_1"]]}\n```').groups == (("heading_1",),)


def test_parse_prose_wrapped():
    assert parse_plan_response('Here is the plan: {"chunks": [["text_1"]]} done').groups == (("text_1",),)


def test_parse_wrong_shape():
    with pytest.raises(PlanShapeError):
        parse_plan_response('{"chunks": "heading_1"}')
    with pytest.raises(PlanShapeError):
        parse_plan_response('{"groups": []}')


def test_parse_garbage_keeps_raw():
    with pytest.raises(PlanParseError) as err:
        parse_plan_response("not json")
    assert err.value.raw == "not json"


# llm_plan

def test_llm_plan_uses_model_answer(example1):
    client = StubClient(lambda req: TWO_GROUPS)
    outcome = llm_plan(example1, client)
    assert len(outcome.plan.groups) == 2 and not outcome.fallback
    assert outcome.attempts == 1 and outcome.usage.input_tokens > 0


def test_llm_plan_retries_then_succeeds(example1):
    answers = iter(["garbage", TWO_GROUPS])
    client = StubClient(lambda req: next(answers))
    outcome = llm_plan(example1, client)
    assert outcome.attempts == 2 and not outcome.fallback
    assert "chunks" in client.calls[1].user


def test_llm_plan_double_failure_falls_back(example1):
    client = StubClient(lambda req: "garbage")
    outcome = llm_plan(example1, client)
    assert outcome.fallback and outcome.plan.planner_kind == "structural"
    assert outcome.plan.groups == structural_plan(example1).groups
    assert outcome.run_log()["fallback"] is True
    assert len(client.calls) == 2


def test_transport_failure_is_planner_unavailable(example1):
    def boom(req):
        raise TransportError("down", 503)

    with pytest.raises(PlannerUnavailable):
        llm_plan(example1, StubClient(boom))


# properties over random documents

def random_filtered_docs(n=150, seed=3):
    import random

    from wrac.parse_core import filter_boilerplate
    from wrac.synthetic import random_markdown

    rng = random.Random(seed)
    return [filter_boilerplate(parse_markdown(random_markdown(rng), doc_id=f"r{i}")) for i in range(n)]


def test_token_budget_respected():
    from wrac.planner import procedure_runs

    cfg = PlannerConfig(max_chunk_tokens=60)
    for doc in random_filtered_docs():
        units = doc.by_id()
        procedures = [set(r) for r in procedure_runs(doc)]
        for group in structural_plan(doc, cfg).groups:
            content = [i for i in group if not units[i].is_heading]
            if len(content) <= 1 or any(set(content) <= p for p in procedures):
                continue
            assert sum(units[i].token_count for i in content) <= cfg.max_chunk_tokens


def test_heading_trail_prefix():
    from wrac.planner import procedure_runs

    for doc in random_filtered_docs():
        units = doc.by_id()
        if not doc.headings:
            continue
        procedures = [set(r) for r in procedure_runs(doc)]
        for group in structural_plan(doc).groups:
            if any({i for i in group if not units[i].is_heading} & p for p in procedures):
                # a procedure carries its step headings along with the trail
                continue
            lead = 0
            while lead < len(group) and units[group[lead]].is_heading:
                lead += 1
            if lead == 0:
                # content before the first heading, anchored to it afterwards
                assert all(units[i].parent_heading is None for i in group if not units[i].is_heading)
                continue
            assert 1 <= lead <= 3


def test_structural_plan_validates():
    from wrac.resolver import validate_plan

    for doc in random_filtered_docs():
        if doc.content_units:
            assert validate_plan(structural_plan(doc), doc).ok
