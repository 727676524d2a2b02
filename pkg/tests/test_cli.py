import json

import pytest

from wrac.cli import DataError, RunConfig, cmd_chunk, cmd_compare, cmd_eval, cmd_ingest, main
from wrac.evaluation import LedgerRow, UsageLedger
from wrac.synthetic import bundled_corpus


def mini_corpus(root):
    docs = root / "docs" / "acme"
    docs.mkdir(parents=True)
    (docs / "a.md").write_text("# Fares\n\nPeak fares apply before nine.\n", encoding="utf-8")
    (docs / "b.html").write_text("<h1>Refunds</h1><p>Refunds take five days.</p>", encoding="utf-8")
    (docs / "c.md").write_text("# Lost property\n\nItems are kept for a month.\n", encoding="utf-8")
    return root


def test_ingest_three_docs(tmp_path):
    root = mini_corpus(tmp_path / "corpus")
    summary = cmd_ingest(RunConfig(corpus_root=root, out=tmp_path / "out"))
    assert summary["total_files"] == 3
    assert summary["total_length"] == sum(d["total_chars"] for d in summary["documents"])
    assert sorted(p.name for p in (tmp_path / "out" / "units" / "acme").iterdir()) == ["a.json", "b.json", "c.json"]
    assert {d["media"] for d in summary["documents"]} == {"html", "markdown"}


def test_ingest_empty_corpus(tmp_path):
    (tmp_path / "docs").mkdir()
    with pytest.raises(DataError, match="no documents"):
        cmd_ingest(RunConfig(corpus_root=tmp_path, out=tmp_path / "out"))
    assert main(["ingest", "--corpus", str(tmp_path), "--out", str(tmp_path / "out")]) == 1


def test_eval_on_bundled_corpus(tmp_path):
    report = cmd_eval(RunConfig(method="wrac-structural", out=tmp_path))
    overall = report["rows"]["overall"][0]
    for name in ("recall@3", "recall@6", "precision@3", "precision@6", "ndcg@3", "ndcg@6", "mrr"):
        assert 0.0 <= overall[name] <= 1.0
    assert len(report["rows"]["category"]) == 7
    text = (tmp_path / "report.txt").read_text()
    assert "Avg Recall@3" in text and "Avg Recall@6" in text
    for name in ("chunks.jsonl", "index.json", "metrics.jsonl", "ledger.jsonl", "plans.jsonl", "runlog.jsonl"):
        assert (tmp_path / name).exists()


def test_unknown_method_is_usage_error(capsys):
    with pytest.raises(SystemExit) as err:
        main(["eval", "--method", "nope"])
    assert err.value.code == 2


def test_bad_k_is_usage_error():
    with pytest.raises(SystemExit) as err:
        main(["eval", "--k", "0"])
    assert err.value.code == 2


def write_run(path, method, inp, out, seconds, report=None):
    path.mkdir(parents=True)
    UsageLedger([LedgerRow("org", method, "f", inp, out, 0, seconds)]).save(path / "ledger.jsonl")
    if report:
        (path / "report.json").write_text(json.dumps(report))


def test_compare_seeded_totals(tmp_path):
    write_run(tmp_path / "a", "agentic", 573954, 343891, 2167.52)
    write_run(tmp_path / "b", "wrac", 861691, 52816, 875.42)
    result = cmd_compare(tmp_path / "a", tmp_path / "b", tmp_path / "cmp")
    eff = {r["metric"]: r["relative_change"] for r in result["efficiency"]}
    assert eff["Total Output Tokens"] == pytest.approx(-84.64, abs=0.005)
    assert eff["Total Processing Time (s)"] == pytest.approx(-59.61, abs=0.005)
    assert eff["Total Input Tokens"] == pytest.approx(50.13, abs=0.005)
    assert (tmp_path / "cmp" / "comparison.txt").exists()


def test_compare_identical(tmp_path):
    write_run(tmp_path / "a", "wrac", 10, 5, 1.0)
    write_run(tmp_path / "b", "wrac", 10, 5, 1.0)
    result = cmd_compare(tmp_path / "a", tmp_path / "b")
    assert all(r["relative_change"] == 0 for r in result["efficiency"])


def test_compare_partial_when_ledger_missing(tmp_path):
    report = {"method": "fixed", "rows": {"overall": [{"group": "Overall", "method": "fixed", "mrr": 0.5,
                                                       "count": 1}]}}
    (tmp_path / "a").mkdir()
    (tmp_path / "a" / "report.json").write_text(json.dumps(report))
    write_run(tmp_path / "b", "wrac", 10, 5, 1.0, {**report, "method": "wrac"})
    result = cmd_compare(tmp_path / "a", tmp_path / "b")
    assert result["warnings"] and "efficiency" not in result
    assert result["retrieval"][0]["metric"] == "mrr"


def test_synth_and_retrieve(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "queries.jsonl").read_text() == (bundled_corpus() / "queries.jsonl").read_text()
    assert main(["chunk", "--corpus", str(tmp_path / "c"), "--method", "fixed", "--out", str(tmp_path / "o")]) == 0
    assert main(["eval", "--corpus", str(tmp_path / "c"), "--method", "fixed", "--out", str(tmp_path / "o")]) == 0
    capsys.readouterr()
    assert main(["retrieve", "--index", str(tmp_path / "o" / "index.json"), "--query", "refund", "--k", "2"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert 1 <= len(lines) <= 2 and lines[0].startswith("1\t")


def test_wrac_replay_miss_is_data_error(tmp_path, monkeypatch):
    monkeypatch.delenv("WRAC_LLM_ENDPOINT", raising=False)
    code = main(["chunk", "--method", "wrac", "--mode", "replay", "--cache-dir", str(tmp_path / "empty"),
                 "--out", str(tmp_path / "o")])
    assert code == 1


def test_wrac_record_then_replay(tmp_path, monkeypatch, chat_server):
    root = mini_corpus(tmp_path / "corpus")
    monkeypatch.setenv("WRAC_LLM_ENDPOINT", chat_server.url)
    cache = tmp_path / "cache"
    rec = RunConfig(corpus_root=root, method="wrac", mode="record", cache_dir=cache, out=tmp_path / "r1")
    cmd_chunk(rec)
    assert chat_server.calls == 3
    monkeypatch.delenv("WRAC_LLM_ENDPOINT")
    rep = RunConfig(corpus_root=root, method="wrac", mode="replay", cache_dir=cache, out=tmp_path / "r2")
    cmd_chunk(rep)
    assert chat_server.calls == 3
    for name in ("chunks.jsonl", "ledger.jsonl", "plans.jsonl", "runlog.jsonl"):
        assert (tmp_path / "r2" / name).read_bytes() == (tmp_path / "r1" / name).read_bytes()
