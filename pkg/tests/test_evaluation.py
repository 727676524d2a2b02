import json
import math

import pytest

from wrac.evaluation import (
    CATEGORIES,
    CostModel,
    GoldItem,
    Judged,
    LedgerRow,
    ManifestError,
    QueryMetrics,
    QueryRecord,
    UsageLedger,
    aggregate,
    compute_cost,
    cost_rows,
    format_change,
    judge_relevance,
    load_corpus,
    load_queries,
    metric_names,
    mrr,
    ndcg_at_k,
    precision_at_k,
    recall_at_k,
    relative_change,
    summarize,
)
from wrac.resolver import Chunk
from wrac.synthetic import bundled_corpus


def judged(ranks, n_gold=1, n_relevant=None, length=None):
    """Relevance at the given 1-based ranks, each hit supporting gold item 0."""
    length = length or max([*ranks, 3])
    hits = tuple((r + 1 in ranks,) + (False,) * (n_gold - 1) for r in range(length))
    return Judged(hits, n_gold, len(ranks) if n_relevant is None else n_relevant)


def chunk(body, doc_id="baggage"):
    return Chunk(chunk_id=f"{doc_id}#1", doc_id=doc_id, unit_ids=(), heading_trail=(), body=body, token_count=0)


EXAMPLE1_BODY = ("# EXCESS BAGGAGE CHARGES\n# Packing heavy?\n\n"
                 "Fly without baggage worries...\n\nFees apply per kg.")


# relevance

def test_relevance_exact():
    assert judge_relevance(chunk(EXAMPLE1_BODY), GoldItem("baggage", "Fees apply per kg."))


def test_relevance_other_doc():
    assert not judge_relevance(chunk(EXAMPLE1_BODY, "other"), GoldItem("baggage", "Fees apply per kg."))


def test_relevance_normalized():
    assert judge_relevance(chunk(EXAMPLE1_BODY), GoldItem("baggage", "FEES  apply per kg"))


def test_relevance_across_heading_marker():
    gold = GoldItem("baggage", "Packing heavy? Fly without baggage worries")
    assert judge_relevance(chunk(EXAMPLE1_BODY), gold)


# metrics

def test_recall_cases():
    both = Judged(((True, False), (False, True), (False, False)), 2, 2)
    one = Judged(((True, False), (False, False), (False, False)), 2, 1)
    assert recall_at_k(both, 3) == 1.0
    assert recall_at_k(one, 3) == 0.5
    assert recall_at_k(judged([]), 3) == 0.0


def test_precision_cases():
    assert precision_at_k(judged([1, 3]), 3) == pytest.approx(2 / 3)
    assert precision_at_k(judged([1, 2, 3]), 3) == 1.0
    assert precision_at_k(judged([1], length=2), 6) == pytest.approx(1 / 6)


def test_mrr_cases():
    assert mrr(judged([1])) == 1.0
    assert mrr(judged([2])) == 0.5
    assert mrr(judged([])) == 0.0


def test_ndcg_cases():
    assert ndcg_at_k(judged([1, 3], n_relevant=2), 3) == pytest.approx(1.5 / (1 + 1 / math.log2(3)), abs=1e-12)
    assert ndcg_at_k(judged([1, 3], n_relevant=2), 3) == pytest.approx(0.91972, abs=1e-4)
    assert ndcg_at_k(judged([1]), 3) == 1.0
    assert ndcg_at_k(judged([], n_relevant=1), 3) == 0.0


def test_bad_k():
    with pytest.raises(ValueError):
        precision_at_k(judged([1]), 0)


def test_metric_names_order():
    assert metric_names((3, 6)) == ["recall@6", "recall@3", "precision@6", "precision@3", "mrr", "ndcg@6", "ndcg@3"]


# aggregation

def qm(qid, category, p3, org="o"):
    return QueryMetrics(qid, org, category, "m", {"precision@3": p3})


def test_mean():
    [row] = aggregate([qm("a", "Boolean", 1.0), qm("b", "Boolean", 0.5)], "overall")
    assert row.values["precision@3"] == 0.75 and row.count == 2


def test_category_partition():
    rows = [qm(str(i), CATEGORIES[i % 7], 1.0) for i in range(30)]
    groups = aggregate(rows, "category")
    assert sum(g.count for g in groups) == 30
    assert [g.group for g in groups] == list(CATEGORIES)


def test_single_query_group():
    [row] = aggregate([qm("a", "Temporal", 0.25)], "category")
    assert row.values == {"precision@3": 0.25}


# manifests

def test_query_record_validation():
    with pytest.raises(ManifestError):
        QueryRecord("q", "text", "Funny", "o", (GoldItem("d", "e"),))
    with pytest.raises(ManifestError):
        QueryRecord("q", "text", "Boolean", "o", ())


def test_load_queries_bad_line(tmp_path):
    p = tmp_path / "q.jsonl"
    p.write_text("{not json}\n")
    with pytest.raises(ManifestError):
        load_queries(p)


def test_bundled_corpus_loads():
    docs, failures = load_corpus(bundled_corpus())
    assert len(docs) == 12 and not failures
    queries = load_queries(bundled_corpus() / "queries.jsonl")
    assert {q.category for q in queries} == set(CATEGORIES)


# cost and relative change

def ledger(method, inp, out, cached=0, seconds=0.0):
    return [LedgerRow("org", method, "f", inp, out, cached, seconds)]


def test_output_costs():
    costs = compute_cost(UsageLedger(ledger("agentic", 573954, 343891) + ledger("wrac", 861691, 52816)))
    assert costs["agentic"].output_cost == pytest.approx(2.75, abs=0.005)
    assert costs["wrac"].output_cost == pytest.approx(0.42, abs=0.005)


def test_empty_ledger_costs():
    assert compute_cost(UsageLedger()) == {}
    s = summarize([], "x")
    assert s.total_input == 0 and s.avg_time == 0.0


def test_relative_changes():
    assert relative_change(343891, 52816) == pytest.approx(-84.64, abs=0.005)
    assert relative_change(573954, 861691) == pytest.approx(50.13, abs=0.005)
    assert format_change(relative_change(7, 7)) == "0.00%"


def test_cost_rows_on_cents():
    costs = compute_cost(UsageLedger(ledger("agentic", 1, 343891) + ledger("wrac", 1, 52816)))
    out = [r for r in cost_rows(costs, "agentic", "wrac") if r[0] == "Output Tokens"][0]
    assert out[2:] == [2.75, 0.42, "-84.73%"]


def test_ledger_roundtrip(tmp_path):
    led = UsageLedger(ledger("wrac", 10, 2, 1, 0.5))
    led.save(tmp_path / "l.jsonl")
    assert UsageLedger.load(tmp_path / "l.jsonl") == led
    assert json.loads(led.dumps())["input_tokens"] == 10


def test_negative_price_rejected():
    with pytest.raises(ValueError):
        CostModel(price_input=-1)
