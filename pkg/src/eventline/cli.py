"""Command line: ``eventline {generate,extract,score,judge,stats}``.

Exit codes: 0 when nothing failed, 2 when some documents failed but others
succeeded, 1 on a fatal error (bad config, aborted run, nothing succeeded).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import random
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Mapping

from . import corpusgen, evalkit
from .config import ConfigError, RunConfig, load_config
from .gateway import Gateway, RetryPolicy
from .ledger import DONE, FAILED, BatchLedger
from .refinery import AgentSettings, run_refinement
from .schema import EventTimeline

log = logging.getLogger("eventline")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2
AGGREGATE_ID = "__aggregate__"


class Refused(RuntimeError):
    """Existing outputs would be touched without --resume."""


def _dump(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


class Backends:
    """Builds one shared gateway per role, unless the caller injected a backend."""

    def __init__(self, config: RunConfig, overrides: Mapping[str, Any] | None = None):
        self.config = config
        self.overrides = dict(overrides or {})
        self._cache: dict[str, Any] = {}
        self._lock = threading.Lock()

    def _wrap(self, backend, cfg):
        if isinstance(backend, Gateway):
            return backend
        return Gateway(backend, cfg.policy() if cfg else RetryPolicy(base_backoff=0.0))

    def get(self, role: str):
        with self._lock:
            if role not in self._cache:
                cfg = getattr(self.config.backends, role, None)
                if role in self.overrides:
                    self._cache[role] = self._wrap(self.overrides[role], cfg)
                else:
                    self._cache[role] = self._wrap(self.config.backend(role).build(), cfg)
            return self._cache[role]

    def settings(self, role: str) -> AgentSettings:
        cfg = getattr(self.config.backends, role, None)
        return cfg.settings() if cfg else AgentSettings()

    def generation_settings(self) -> dict[str, AgentSettings]:
        return {c.label: c.settings() for c in self.config.backends.generation}

    def generators(self) -> list[tuple[str, Any]]:
        if "generation" in self.overrides:
            value = self.overrides["generation"]
            pairs = value if isinstance(value, (list, tuple)) else [("generation", value)]
            return [(tag, self._wrap(b, None)) for tag, b in pairs]
        cfgs = self.config.backends.generation
        if not cfgs:
            raise ConfigError("no backend configured for role 'generation'")
        return [(c.label, self._wrap(c.build(), c)) for c in cfgs]


def _documents(config: RunConfig, corpus_path: Path | None = None) -> list[corpusgen.CorpusRecord]:
    return corpusgen.read_corpus(corpus_path or config.corpus_file)


def _exit_code(done: int, failed: int) -> int:
    if failed == 0:
        return EXIT_OK
    return EXIT_PARTIAL if done else EXIT_FATAL


def _run_batch(ids, work, ledger: BatchLedger, concurrency: int) -> None:
    todo = [i for i in ids if ledger.should_run(i)]

    def guarded(doc_id):
        try:
            work(doc_id)
        except Exception as e:  # per-document failure; the batch continues
            log.warning("%s failed: %s: %s", doc_id, type(e).__name__, e)
            ledger.mark_failed(doc_id, f"{type(e).__name__}: {e}")
        else:
            ledger.mark_done(doc_id)

    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        list(pool.map(guarded, todo))


def _ledger(config: RunConfig, name: str, resume: bool) -> BatchLedger:
    path = config.output_dir / f"ledger_{name}.jsonl"
    if path.exists() and not resume:
        raise Refused(f"{path} exists; pass --resume to continue that run")
    return BatchLedger(path, config.ledger_max_attempts)


def cmd_generate(config: RunConfig, n: int, backends: Backends, resume: bool = False) -> int:
    corpus_path = config.corpus_file
    state_path = config.output_dir / "generate_state.json"
    state = {"n": n, "seed": config.seed}
    done_ids: set[str] = set()
    if corpus_path.exists():
        if not resume:
            raise Refused(f"{corpus_path} exists; pass --resume to continue that run")
        if state_path.exists() and json.loads(state_path.read_text()) != state:
            raise Refused(f"{corpus_path} was started with {state_path.read_text().strip()}, not {state}")
        existing = corpusgen.read_corpus(corpus_path, tolerate_partial_tail=True)
        corpusgen.write_corpus(existing, corpus_path)  # drops a cut-off tail line
        done_ids = {r.id for r in existing}
    else:
        corpus_path.parent.mkdir(parents=True, exist_ok=True)
        corpus_path.write_text("", encoding="utf-8")
    _write(state_path, _dump(state))

    skip = [i for i in range(n) if f"doc-{i:05d}" in done_ids]
    lock = threading.Lock()

    def append(_, record):
        with lock, open(corpus_path, "a", encoding="utf-8") as f:
            f.write(corpusgen.dumps_record(record) + "\n")

    templates = config.templates()
    corpusgen.build_corpus(
        n, backends.generators(), templates, config.seed,
        failure_ceiling=config.generation.failure_ceiling, skip=skip, on_record=append,
        concurrency=config.concurrency, settings=backends.generation_settings() or corpusgen.GENERATION_SETTINGS,
        retry_limit=config.generation.retry_limit,
    )
    records = corpusgen.read_corpus(corpus_path)
    _write_stats(config, records)
    print(json.dumps({"command": "generate", "records": len(records), "corpus": str(corpus_path)}))
    return EXIT_OK


def _write_stats(config: RunConfig, records) -> dict:
    report = corpusgen.corpus_stats(records).to_json()
    by_tag: dict[str, list] = {}
    for r in records:
        by_tag.setdefault(r.generator_tag, []).append(r)
    report["by_generator"] = {tag: corpusgen.corpus_stats(rs).to_json() for tag, rs in sorted(by_tag.items())}
    _write(config.output_dir / "corpus_stats.json", _dump(report))
    return report


def cmd_stats(config: RunConfig, corpus_path: Path | None = None) -> int:
    report = _write_stats(config, _documents(config, corpus_path))
    print(_dump(report), end="")
    return EXIT_OK


def cmd_extract(config: RunConfig, backends: Backends, corpus_path: Path | None = None,
                resume: bool = False) -> int:
    records = _documents(config, corpus_path)
    ledger = _ledger(config, "extract", resume)
    templates = config.templates()
    extractor, critic = backends.get("extraction"), backends.get("feedback")
    by_id = {r.id: r for r in records}

    def work(doc_id: str) -> None:
        result = run_refinement(by_id[doc_id].as_document(), extractor, critic, templates, config.refinement,
                                backends.settings("extraction"), backends.settings("feedback"))
        _write(config.output_dir / "timelines" / f"{doc_id}.json", _dump(result.selected_timeline.to_json()))
        _write(config.output_dir / "manifests" / f"{doc_id}.json", _dump(result.manifest(doc_id, config.refinement)))

    _run_batch(list(by_id), work, ledger, config.concurrency)
    counts = ledger.counts(by_id)
    print(json.dumps({"command": "extract", **counts}))
    return _exit_code(counts[DONE], counts[FAILED])


def cmd_score(config: RunConfig, backends: Backends, predictions_dir: Path | None = None,
              corpus_path: Path | None = None) -> int:
    records = _documents(config, corpus_path)
    predictions_dir = predictions_dir or config.output_dir / "timelines"
    embedder = backends.get("embedder")
    present, missing = [], []
    for r in records:
        (present if (predictions_dir / f"{r.id}.json").is_file() else missing).append(r)
    for r in missing:
        log.warning("no prediction for %s; skipped", r.id)

    def score(r):
        predicted = EventTimeline.from_json(json.loads((predictions_dir / f"{r.id}.json").read_text(encoding="utf-8")))
        return evalkit.score_timeline(predicted, r.timeline, embedder)

    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        scores = list(pool.map(score, present))
    lines = [json.dumps({"id": r.id, **s.to_json()}) for r, s in zip(present, scores)]
    if scores:
        agg = evalkit.mean_score(scores)
        lines.append(json.dumps({"id": AGGREGATE_ID, **agg.to_json(), "n": len(scores),
                                 "missing": [r.id for r in missing]}))
    _write(config.output_dir / "scores.jsonl", "".join(line + "\n" for line in lines))
    print(json.dumps({"command": "score", "scored": len(scores), "missing": len(missing)}))
    if not scores:
        return EXIT_FATAL
    return EXIT_PARTIAL if missing else EXIT_OK


def judge_sample(config: RunConfig, records, k: int) -> list[corpusgen.CorpusRecord]:
    pool = records
    if config.evaluation.judge_pool == "test":
        _, pool = corpusgen.split_corpus(records, config.evaluation.n_test, config.evaluation.test_fraction)
    if k > len(pool):
        raise ConfigError(f"sample of {k} requested from a pool of {len(pool)} judgments")
    chosen = set(random.Random(f"judge/{config.seed}").sample([r.id for r in pool], k))
    return [r for r in pool if r.id in chosen]


def cmd_judge(config: RunConfig, backends: Backends, sample: int, corpus_path: Path | None = None,
              resume: bool = False) -> int:
    records = _documents(config, corpus_path)
    chosen = judge_sample(config, records, sample)
    ledger = _ledger(config, "judge", resume)
    templates = config.templates()
    summarizer, judge = backends.get("summarizer"), backends.get("judge")
    by_id = {r.id: r for r in chosen}
    summarizer_tag = config.backends.summarizer.label if config.backends.summarizer else "summarizer"

    def work(doc_id: str) -> None:
        record = by_id[doc_id]
        document = record.as_document()
        timeline = record.timeline
        if config.evaluation.structured_source == "predicted":
            path = config.output_dir / "timelines" / f"{doc_id}.json"
            timeline = EventTimeline.from_json(json.loads(path.read_text(encoding="utf-8")))
        settings = backends.settings("summarizer")
        unstructured = evalkit.summarize(document, summarizer, templates["summary"], settings)
        structured = evalkit.summarize(timeline, summarizer, templates["summary"], settings)
        pair = evalkit.SummaryPair(doc_id, unstructured.text, structured.text, summarizer_tag)
        verdict = evalkit.pairwise_judge(document, pair, judge, templates["judge"], backends.settings("judge"),
                                         swap=config.evaluation.judge_swap,
                                         retry_limit=config.evaluation.judge_retry_limit)
        _write(config.output_dir / "summaries" / f"{doc_id}.json", _dump(pair.to_json()))
        _write(config.output_dir / "verdicts" / f"{doc_id}.json", _dump(verdict.to_json()))

    _run_batch(list(by_id), work, ledger, config.concurrency)
    verdicts = []
    for doc_id in by_id:
        if ledger.status(doc_id) == DONE:
            path = config.output_dir / "verdicts" / f"{doc_id}.json"
            verdicts.append(evalkit.JudgeVerdict.from_json(json.loads(path.read_text(encoding="utf-8"))))
    _write(config.output_dir / "verdicts.jsonl", "".join(json.dumps(v.to_json(), ensure_ascii=False) + "\n"
                                                         for v in verdicts))
    tally = evalkit.tally_preferences(verdicts)
    _write(config.output_dir / "preference_tally.json", _dump(tally.to_json()))
    counts = ledger.counts(by_id)
    print(json.dumps({"command": "judge", **tally.to_json(), "failed": counts[FAILED]}))
    return _exit_code(counts[DONE], counts[FAILED])


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="run config JSON")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--corpus", type=Path, help="override paths.corpus_file")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="eventline", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("generate", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--n", type=int, required=True, help="number of records")
    p.add_argument("--resume", action="store_true")
    p = sub.add_parser("extract", parents=[common], help="run the refinement loop on every document")
    p.add_argument("--resume", action="store_true")
    p = sub.add_parser("score", parents=[common], help="score predicted timelines against gold")
    p.add_argument("--predictions", type=Path, help="directory of <id>.json timelines")
    p = sub.add_parser("judge", parents=[common], help="pairwise-judge structured vs unstructured summaries")
    p.add_argument("--sample", type=int, default=200, help="number of judgments to sample")
    p.add_argument("--resume", action="store_true")
    sub.add_parser("stats", parents=[common], help="corpus statistics")
    return parser


def main(argv=None, backends: Mapping[str, Any] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config = None
    try:
        config = load_config(args.config, seed=args.seed)
        pool = Backends(config, backends)
        if args.command == "generate":
            if args.corpus:
                config = _with_corpus(config, args.corpus)
            return cmd_generate(config, args.n, pool, args.resume)
        if args.command == "extract":
            return cmd_extract(config, pool, args.corpus, args.resume)
        if args.command == "score":
            return cmd_score(config, pool, args.predictions, args.corpus)
        if args.command == "judge":
            return cmd_judge(config, pool, args.sample, args.corpus, args.resume)
        return cmd_stats(config, args.corpus)
    except Exception as e:  # noqa: BLE001 - every failure becomes a report and exit 1
        report = {"command": args.command, "error_type": type(e).__name__, "message": str(e)}
        print(json.dumps(report), file=sys.stderr)
        if config is not None:
            try:
                _write(config.output_dir / "error_report.json", _dump(report))
            except OSError:
                pass
        return EXIT_FATAL


def _with_corpus(config: RunConfig, corpus: Path) -> RunConfig:
    return dataclasses.replace(config, paths=dataclasses.replace(config.paths, corpus_file=str(corpus)))


if __name__ == "__main__":
    sys.exit(main())
