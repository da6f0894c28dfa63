"""Synthetic corpus generation: category -> gold timeline -> judgment text.

Each record ``i`` draws from its own random stream seeded by ``(seed, i)``,
so records can be generated in any order, in parallel, or across resumed
runs and still come out identical.
"""

from __future__ import annotations

import json
import logging
import math
import os
import random
import string
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .gateway import ChatRequest, as_gateway
from .parsing import ParseDiagnostics, ParseError, read_timeline
from .refinery import AgentSettings
from .schema import (
    CASE_CATEGORIES,
    NOT_APPLICABLE,
    CaseCategory,
    EventTimeline,
    JudgmentDocument,
    canonical_render,
    validate_event,
)
from .templates import PromptTemplate

log = logging.getLogger(__name__)

GENERATION_SETTINGS = AgentSettings(temperature=0.7, max_output_tokens=4096)
_PUNCT = string.punctuation + "\u201c\u201d\u2018\u2019\u2013\u2014\u2026\u00ab\u00bb"


class GenerationFailed(RuntimeError):
    pass


class CorpusAborted(RuntimeError):
    pass


def sample_category(rng: int | str | random.Random) -> CaseCategory:
    """Uniform draw from the 25 case categories."""
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    return CaseCategory(CASE_CATEGORIES[rng.randrange(len(CASE_CATEGORIES))])


def record_stream(seed: int, index: int) -> random.Random:
    return random.Random(f"corpus/{seed}/{index}")


def default_clock() -> str:
    """UTC now, or ``SOURCE_DATE_EPOCH`` when set (reproducible outputs)."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    moment = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return moment.isoformat(timespec="seconds").replace("+00:00", "Z")


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    category: CaseCategory
    timeline: EventTimeline
    judgment_text: str
    generator_tag: str
    created_at: str

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "category": self.category.name,
            "timeline": self.timeline.to_json(),
            "judgment_text": self.judgment_text,
            "generator_tag": self.generator_tag,
            "created_at": self.created_at,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "CorpusRecord":
        return cls(
            id=obj["id"],
            category=CaseCategory(obj["category"]),
            timeline=EventTimeline.from_json(obj["timeline"]),
            judgment_text=obj["judgment_text"],
            generator_tag=obj["generator_tag"],
            created_at=obj["created_at"],
        )

    def as_document(self) -> JudgmentDocument:
        return JudgmentDocument(self.id, self.judgment_text, self.category)


def dumps_record(record: CorpusRecord) -> str:
    return json.dumps(record.to_json(), ensure_ascii=False)


def write_corpus(records: Iterable[CorpusRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(dumps_record(r) + "\n")


def read_corpus(path: str | Path, tolerate_partial_tail: bool = False) -> list[CorpusRecord]:
    """Load a JSONL corpus.

    With ``tolerate_partial_tail`` a final line cut off mid-write (no trailing
    newline, not valid JSON) is ignored instead of raising.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    out = []
    for n, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except ValueError:
            if tolerate_partial_tail and n == len(lines) - 1:
                log.warning("%s: ignoring truncated last line", path)
                break
            raise
        out.append(CorpusRecord.from_json(obj))
    return out


def split_corpus(records: Sequence[CorpusRecord], n_test: int | None = None,
                 test_fraction: float = 0.2) -> tuple[list[CorpusRecord], list[CorpusRecord]]:
    """Leading records train, trailing ``n_test`` records test (default last 20%)."""
    if n_test is None:
        n_test = round(len(records) * test_fraction)
    n_test = max(0, min(n_test, len(records)))
    cut = len(records) - n_test
    return list(records[:cut]), list(records[cut:])


def _request(template: PromptTemplate, settings: AgentSettings, task: str, extra: str = "", **values) -> ChatRequest:
    system, user = template.render(**values)
    return ChatRequest(system, user + extra, settings.temperature, settings.max_output_tokens,
                       settings.model_name, task)


def generate_timeline(category: CaseCategory, backend, template: PromptTemplate,
                      settings: AgentSettings = GENERATION_SETTINGS,
                      retry_limit: int = 2) -> tuple[EventTimeline, ParseDiagnostics]:
    """Ask the generator for a gold timeline of the given category."""
    gw = as_gateway(backend)
    extra = ""
    for attempt in range(retry_limit + 1):
        text = gw.complete(_request(template, settings, "timeline_generation", extra, category=category.name)).text
        try:
            timeline, diag = read_timeline(text)
        except ParseError as e:
            log.info("timeline generation attempt %d unusable: %s", attempt + 1, e)
            extra = f"\n\nYour previous answer could not be used ({e}). Return ONLY the JSON array."
            continue
        diag.retries = attempt
        return timeline, diag
    raise GenerationFailed(f"no valid timeline for {category.name} after {retry_limit + 1} attempts")


def generate_judgment(timeline: EventTimeline, backend, template: PromptTemplate, *,
                      doc_id: str, category: CaseCategory | None = None,
                      settings: AgentSettings = GENERATION_SETTINGS,
                      retry_limit: int = 2) -> JudgmentDocument:
    """Ask the generator to write the judgment that the timeline describes."""
    gw = as_gateway(backend)
    request = _request(template, settings, "judgment_generation", timeline=canonical_render(timeline))
    for _ in range(retry_limit + 1):
        text = gw.complete(request).text
        if text.strip():
            return JudgmentDocument(doc_id, text, category)
    raise GenerationFailed(f"{doc_id}: empty judgment after {retry_limit + 1} attempts")


@dataclass
class _FailureBudget:
    limit: int
    used: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)

    def spend(self, what: str) -> None:
        with self.lock:
            self.used += 1
            if self.used > self.limit:
                raise CorpusAborted(f"{self.used} failed generations exceed the budget of {self.limit} ({what})")


def failure_budget(n: int, ceiling: float) -> int:
    """Most failures allowed so that failures / attempts stays <= ceiling."""
    if not 0 <= ceiling < 1:
        raise ValueError("failure ceiling must be in [0, 1)")
    return math.floor(ceiling / (1 - ceiling) * n + 1e-9)


def generator_for(index: int, n: int, k: int) -> int:
    """Contiguous equal split of ``n`` indices over ``k`` generators."""
    return index * k // n


def generate_record(index: int, n: int, backends: Sequence[tuple[str, object]],
                    templates: Mapping[str, PromptTemplate], seed: int, *,
                    budget: _FailureBudget | None = None, id_prefix: str = "doc",
                    clock: Callable[[], str] = default_clock,
                    settings: AgentSettings | Mapping[str, AgentSettings] = GENERATION_SETTINGS,
                    retry_limit: int = 2) -> CorpusRecord:
    tag, backend = backends[generator_for(index, n, len(backends))]
    if not isinstance(settings, AgentSettings):
        settings = settings.get(tag, GENERATION_SETTINGS)
    rng = record_stream(seed, index)
    doc_id = f"{id_prefix}-{index:05d}"
    while True:
        # A failed generation redraws the category from the same stream.
        category = sample_category(rng)
        try:
            timeline, _ = generate_timeline(category, backend, templates["timeline_generation"], settings, retry_limit)
            document = generate_judgment(timeline, backend, templates["judgment_generation"], doc_id=doc_id,
                                         category=category, settings=settings, retry_limit=retry_limit)
        except GenerationFailed as e:
            log.warning("%s: %s", doc_id, e)
            if budget is not None:
                budget.spend(str(e))
            continue
        assert all(not validate_event(ev) for ev in timeline)
        return CorpusRecord(doc_id, category, timeline, document.text, tag, clock())


def build_corpus(n: int, backends, templates: Mapping[str, PromptTemplate], rng_seed: int, *,
                 failure_ceiling: float = 0.2, skip: Iterable[int] = (),
                 on_record: Callable[[int, CorpusRecord], None] | None = None,
                 concurrency: int = 1, **record_kwargs) -> list[CorpusRecord]:
    """Generate exactly ``n`` records (minus any indices in ``skip``).

    ``backends`` is either one backend or a sequence of ``(tag, backend)``
    pairs splitting the corpus into equal contiguous shares.  ``on_record``
    is called in index order, whatever the concurrency.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not isinstance(backends, (list, tuple)):
        backends = [(getattr(backends, "name", "generation"), backends)]
    backends = [(tag, as_gateway(b)) for tag, b in backends]
    budget = _FailureBudget(failure_budget(n, failure_ceiling))
    skip = set(skip)
    todo = [i for i in range(n) if i not in skip]

    def work(i: int) -> CorpusRecord:
        return generate_record(i, n, backends, templates, rng_seed, budget=budget, **record_kwargs)

    out = []
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        for i, record in zip(todo, pool.map(work, todo)):
            if on_record is not None:
                on_record(i, record)
            out.append(record)
    return out


@dataclass(frozen=True)
class CorpusStats:
    avg_judgment_length: float
    avg_events_per_case: float
    avg_precedents_per_case: float
    unique_vocab_size: int
    n_records: int = 0
    per_category: Mapping[str, int] = field(default_factory=dict, compare=False)

    def key(self) -> tuple[float, float, float, int]:
        return (self.avg_judgment_length, self.avg_events_per_case,
                self.avg_precedents_per_case, self.unique_vocab_size)

    def to_json(self) -> dict:
        return {
            "avg_judgment_length": self.avg_judgment_length,
            "avg_events_per_case": self.avg_events_per_case,
            "avg_precedents_per_case": self.avg_precedents_per_case,
            "unique_vocab_size": self.unique_vocab_size,
            "n_records": self.n_records,
            "per_category": dict(sorted(self.per_category.items())),
        }


def vocab_tokens(text: str) -> set[str]:
    tokens = (t.strip(_PUNCT).lower() for t in text.split())
    return {t for t in tokens if t}


def corpus_stats(corpus: Sequence[CorpusRecord]) -> CorpusStats:
    """Length, event, precedent and vocabulary statistics over a corpus.

    Tokens are whitespace-delimited; vocabulary tokens are lowercased with
    surrounding punctuation stripped.  A precedent is counted per event whose
    precedent field is neither ``"N/A"`` nor blank.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    n = len(corpus)
    words = events = precedents = 0
    vocab: set[str] = set()
    for r in corpus:
        words += len(r.judgment_text.split())
        events += len(r.timeline)
        precedents += sum(1 for e in r.timeline if e.precedent.strip() not in ("", NOT_APPLICABLE))
        vocab |= vocab_tokens(r.judgment_text)
    return CorpusStats(
        avg_judgment_length=words / n,
        avg_events_per_case=events / n,
        avg_precedents_per_case=precedents / n,
        unique_vocab_size=len(vocab),
        n_records=n,
        per_category=Counter(r.category.name for r in corpus),
    )
