import json

import pytest

from pipeline import full_pipeline, output_bytes, read_jsonl, run, write_config
from eventline.cli import AGGREGATE_ID, judge_sample
from eventline.config import load_config
from eventline.corpusgen import read_corpus
from eventline.gateway import FunctionBackend
from eventline.ledger import BatchLedger
from eventline.simulate import SimulatedAgent


@pytest.fixture(autouse=True)
def fixed_epoch(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")


def test_generate_and_stats(tmp_path, capsys):
    config = write_config(tmp_path)
    assert run(config, "generate", "--n", "4") == 0
    records = read_corpus(tmp_path / "out" / "corpus.jsonl")
    assert [r.id for r in records] == [f"doc-0000{i}" for i in range(4)]
    assert [r.generator_tag for r in records] == ["gen-a", "gen-a", "gen-b", "gen-b"]
    assert records[0].created_at == "2023-11-14T22:13:20Z"
    capsys.readouterr()
    assert run(config, "stats") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["n_records"] == 4 and set(report["by_generator"]) == {"gen-a", "gen-b"}


def test_generate_refuses_to_overwrite(tmp_path):
    config = write_config(tmp_path)
    assert run(config, "generate", "--n", "2") == 0
    assert run(config, "generate", "--n", "2") == 1
    assert json.loads((tmp_path / "out" / "error_report.json").read_text())["error_type"] == "Refused"


def test_kill_and_resume(tmp_path):
    clean = write_config(tmp_path / "clean")
    assert run(clean, "generate", "--n", "6") == 0

    config = write_config(tmp_path / "crashy")
    cfgs = load_config(config).backends.generation
    calls = [0]

    def killer(agent):
        def respond(request):
            calls[0] += 1
            if calls[0] > 4:
                raise RuntimeError("process killed")
            return agent.complete_once(request).text
        return FunctionBackend(respond)

    crashing = [(c.label, killer(c.build())) for c in cfgs]
    assert run(config, "generate", "--n", "6", backends={"generation": crashing}) == 1
    corpus = tmp_path / "crashy" / "out" / "corpus.jsonl"
    assert len(read_corpus(corpus)) == 2
    with open(corpus, "a") as f:
        f.write('{"id": "doc-00002", "categ')  # torn write
    assert run(config, "generate", "--n", "6", "--resume") == 0
    ids = [r.id for r in read_corpus(corpus)]
    assert len(ids) == len(set(ids)) == 6
    assert corpus.read_bytes() == (tmp_path / "clean" / "out" / "corpus.jsonl").read_bytes()


def test_resume_with_different_n_refused(tmp_path):
    config = write_config(tmp_path)
    assert run(config, "generate", "--n", "2") == 0
    assert run(config, "generate", "--n", "3", "--resume") == 1


def test_bad_config_key(tmp_path, capsys):
    config = write_config(tmp_path, refinement={"max_iters": 5})
    assert run(config, "stats") == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error_type"] == "ConfigError" and "max_iters" in err["message"]


def test_extract_partial_failure(tmp_path):
    config = write_config(tmp_path)
    assert run(config, "generate", "--n", "3") == 0
    doomed = read_corpus(tmp_path / "out" / "corpus.jsonl")[1]
    agent = SimulatedAgent("x", "sim-extractor")

    def extractor(request):
        if doomed.judgment_text in request.user_prompt:
            return "I refuse."
        return agent.complete_once(request).text

    assert run(config, "extract", backends={"extraction": FunctionBackend(extractor)}) == 2
    ledger = BatchLedger(tmp_path / "out" / "ledger_extract.jsonl")
    assert ledger.status(doomed.id) == "failed"
    assert sorted(p.stem for p in (tmp_path / "out" / "timelines").iterdir()) == ["doc-00000", "doc-00002"]
    manifest = json.loads((tmp_path / "out" / "manifests" / "doc-00000.json").read_text())
    assert manifest["stop_reason"] in {"tolerance", "patience", "max_iterations"}

    # without --resume the existing ledger is not touched
    assert run(config, "extract") == 1
    # --resume retries only the failed document (still failing -> still partial)
    assert run(config, "extract", "--resume", backends={"extraction": FunctionBackend(extractor)}) == 2
    assert BatchLedger(tmp_path / "out" / "ledger_extract.jsonl").attempts(doomed.id) == 2


def test_concurrency_does_not_change_outputs(tmp_path):
    serial = output_bytes(full_pipeline(tmp_path / "serial", n=6, sample=3, concurrency=1))
    parallel = output_bytes(full_pipeline(tmp_path / "parallel", n=6, sample=3, concurrency=4))
    assert serial == parallel


def test_score_self_match(tmp_path):
    config = write_config(tmp_path)
    assert run(config, "generate", "--n", "3") == 0
    gold = tmp_path / "gold"
    gold.mkdir()
    for r in read_corpus(tmp_path / "out" / "corpus.jsonl"):
        (gold / f"{r.id}.json").write_text(json.dumps(r.timeline.to_json()))
    assert run(config, "score", "--predictions", str(gold)) == 0
    lines = read_jsonl(tmp_path / "out" / "scores.jsonl")
    assert lines[-1]["id"] == AGGREGATE_ID
    assert abs(lines[-1]["f1"] - 1.0) <= 1e-9


def test_score_missing_prediction(tmp_path, caplog):
    config = write_config(tmp_path)
    assert run(config, "generate", "--n", "3") == 0
    assert run(config, "extract") == 0
    (tmp_path / "out" / "timelines" / "doc-00001.json").unlink()
    assert run(config, "score") == 2
    assert "doc-00001" in caplog.text
    lines = read_jsonl(tmp_path / "out" / "scores.jsonl")
    per_doc, agg = lines[:-1], lines[-1]
    assert [line["id"] for line in per_doc] == ["doc-00000", "doc-00002"]
    assert agg["missing"] == ["doc-00001"] and agg["n"] == 2
    for key in ("precision", "recall", "f1"):
        assert abs(agg[key] - sum(line[key] for line in per_doc) / 2) <= 1e-12


def test_judge_consistent(tmp_path):
    config = write_config(tmp_path)
    assert run(config, "generate", "--n", "4") == 0

    def judge(request):
        a_part = request.user_prompt.split("Summary A:")[1].split("Summary B:")[0]
        return "WINNER: " + ("A" if a_part.strip().startswith("[structured]") else "B")

    def summarizer(request):
        tag = "[structured]" if request.task == "summary:structured" else "[plain]"
        return f"{tag} summary"

    overrides = {"judge": FunctionBackend(judge), "summarizer": FunctionBackend(summarizer)}
    assert run(config, "judge", "--sample", "2", backends=overrides) == 0
    tally = json.loads((tmp_path / "out" / "preference_tally.json").read_text())
    assert (tally["structured_wins"], tally["unstructured_wins"], tally["inconsistent"]) == (2, 0, 0)
    assert len(read_jsonl(tmp_path / "out" / "verdicts.jsonl")) == 2


def test_judge_sample_stable_and_sized(tmp_path):
    config = write_config(tmp_path)
    assert run(config, "generate", "--n", "6") == 0
    cfg = load_config(config)
    records = read_corpus(cfg.corpus_file)
    first = [r.id for r in judge_sample(cfg, records, 3)]
    assert first == [r.id for r in judge_sample(cfg, records, 3)]
    assert run(config, "judge", "--sample", "3") == 0
    tally = json.loads((tmp_path / "out" / "preference_tally.json").read_text())
    assert tally["total"] == 3
    assert sorted(v["judgment_id"] for v in read_jsonl(tmp_path / "out" / "verdicts.jsonl")) == sorted(first)


def test_judge_pool_test_split(tmp_path):
    config = write_config(tmp_path, evaluation={"judge_pool": "test"})
    assert run(config, "generate", "--n", "10") == 0
    cfg = load_config(config)
    chosen = judge_sample(cfg, read_corpus(cfg.corpus_file), 2)
    assert all(r.id in {"doc-00008", "doc-00009"} for r in chosen)
    assert run(config, "judge", "--sample", "3") == 1


@pytest.mark.parametrize("name", ["simulated.json", "openai_compatible.json"])
def test_shipped_configs_load(name, monkeypatch):
    from pathlib import Path

    monkeypatch.setenv("OPENAI_API_KEY", "unused")
    cfg = load_config(Path(__file__).parent.parent / "configs" / name)
    assert len(cfg.backends.generation) == 2
    assert set(cfg.templates()) >= {"extraction", "refinement", "feedback", "judge", "summary"}


def test_resume_never_redoes_done_work(tmp_path):
    config = write_config(tmp_path)
    assert run(config, "generate", "--n", "3") == 0
    assert run(config, "extract") == 0
    before = output_bytes(tmp_path / "out")

    def untouchable(request):
        raise AssertionError("done document was re-run")

    boom = {"extraction": FunctionBackend(untouchable), "feedback": FunctionBackend(untouchable),
            "generation": FunctionBackend(untouchable)}
    assert run(config, "extract", "--resume", backends=boom) == 0
    assert run(config, "generate", "--n", "3", "--resume", backends=boom) == 0
    assert output_bytes(tmp_path / "out") == before
