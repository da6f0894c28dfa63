"""Timeline scoring (greedy embedding match) and pairwise summary judging."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .gateway import ChatRequest, DimensionMismatch, as_gateway, embed
from .refinery import AgentSettings
from .schema import EventTimeline, JudgmentDocument, canonical_render
from .templates import PromptTemplate

log = logging.getLogger(__name__)

_WINNER = re.compile(r"^\W*winner\W*:\s*\W*([ab])\b", re.I | re.M)


class UnparseableVerdict(ValueError):
    pass


@dataclass(frozen=True)
class SemanticScore:
    precision: float
    recall: float
    f1: float

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


def f1_of(precision: float, recall: float) -> float:
    total = precision + recall
    return 0.0 if total == 0 else 2 * precision * recall / total


def greedy_semantic_score(candidate: np.ndarray, reference: np.ndarray) -> SemanticScore:
    """Greedy max-cosine matching between two sets of unit token vectors.

    Precision averages, over candidate tokens, the best similarity to any
    reference token; recall does the same from the reference side.  Inputs
    are ``(n_tokens, dim)`` arrays of unit-norm rows.
    """
    candidate = np.asarray(candidate, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if candidate.ndim != 2 or reference.ndim != 2 or not len(candidate) or not len(reference):
        raise ValueError("both token sequences must be non-empty 2-d arrays")
    if candidate.shape[1] != reference.shape[1]:
        raise DimensionMismatch(f"embedding dims differ: {candidate.shape[1]} vs {reference.shape[1]}")
    sim = candidate @ reference.T
    precision = float(sim.max(axis=1).mean())
    recall = float(sim.max(axis=0).mean())
    return SemanticScore(precision, recall, f1_of(precision, recall))


def timeline_tokens(timeline: EventTimeline) -> list[str]:
    return canonical_render(timeline).split()


def score_timeline(predicted: EventTimeline, gold: EventTimeline, embed_backend) -> SemanticScore:
    """Render, whitespace-tokenize, embed and greedily match two timelines.

    Both sides go through a single embed call so per-call embedders (like the
    one-hot identity embedder) share one vector space.
    """
    cand, ref = timeline_tokens(predicted), timeline_tokens(gold)
    vectors = embed(embed_backend, cand + ref)
    return greedy_semantic_score(vectors[: len(cand)], vectors[len(cand):])


def mean_score(scores: Iterable[SemanticScore]) -> SemanticScore:
    scores = list(scores)
    if not scores:
        raise ValueError("no scores to aggregate")
    return SemanticScore(
        float(np.mean([s.precision for s in scores])),
        float(np.mean([s.recall for s in scores])),
        float(np.mean([s.f1 for s in scores])),
    )


class Variant(str, Enum):
    UNSTRUCTURED = "unstructured"
    STRUCTURED = "structured"


@dataclass(frozen=True)
class Summary:
    text: str
    variant: Variant


def summarize(source: JudgmentDocument | EventTimeline, backend, template: PromptTemplate,
              settings: AgentSettings = AgentSettings(temperature=0.0, max_output_tokens=1024)) -> Summary:
    """Summarize either the raw judgment or its rendered timeline with the same template."""
    if isinstance(source, JudgmentDocument):
        variant, material = Variant.UNSTRUCTURED, source.text
    elif isinstance(source, EventTimeline):
        variant, material = Variant.STRUCTURED, canonical_render(source)
    else:
        raise TypeError(f"cannot summarize {type(source).__name__}")
    if not material.strip():
        raise ValueError("summary input is empty")
    system, user = template.render(input=material)
    request = ChatRequest(system, user, settings.temperature, settings.max_output_tokens,
                          settings.model_name, f"summary:{variant.value}")
    return Summary(as_gateway(backend).complete(request).text, variant)


@dataclass(frozen=True)
class SummaryPair:
    judgment_id: str
    unstructured_summary: str
    structured_summary: str
    summarizer_tag: str = ""

    def to_json(self) -> dict:
        return {
            "judgment_id": self.judgment_id,
            "unstructured_summary": self.unstructured_summary,
            "structured_summary": self.structured_summary,
            "summarizer_tag": self.summarizer_tag,
        }


@dataclass(frozen=True)
class JudgeVerdict:
    judgment_id: str
    winner: str  # "structured" | "unstructured" | "inconsistent"
    rationale: str
    orderings_agreed: bool

    def to_json(self) -> dict:
        return {
            "judgment_id": self.judgment_id,
            "winner": self.winner,
            "rationale": self.rationale,
            "orderings_agreed": self.orderings_agreed,
        }

    @classmethod
    def from_json(cls, obj) -> "JudgeVerdict":
        return cls(obj["judgment_id"], obj["winner"], obj.get("rationale", ""), bool(obj["orderings_agreed"]))


def parse_winner(text: str) -> str | None:
    """Slot named on the last ``WINNER: A|B`` line, upper-cased, or None."""
    found = _WINNER.findall(text)
    return found[-1].upper() if found else None


def _judge_once(gateway, judgment: JudgmentDocument, first: str, second: str,
                template: PromptTemplate, settings: AgentSettings, retry_limit: int) -> tuple[str, str]:
    system, user = template.render(judgment=judgment.text, summary_a=first, summary_b=second)
    extra = ""
    for _ in range(retry_limit + 1):
        request = ChatRequest(system, user + extra, settings.temperature, settings.max_output_tokens,
                              settings.model_name, "judge")
        text = gateway.complete(request).text
        slot = parse_winner(text)
        if slot is not None:
            return slot, text
        extra = '\n\nYour answer must end with a line that is exactly "WINNER: A" or "WINNER: B".'
    raise UnparseableVerdict(f"{judgment.id}: judge gave no WINNER line in {retry_limit + 1} attempts")


def pairwise_judge(judgment: JudgmentDocument, pair: SummaryPair, judge_backend, checklist_template: PromptTemplate,
                   settings: AgentSettings = AgentSettings(temperature=0.0, max_output_tokens=2048),
                   swap: bool = True, retry_limit: int = 2) -> JudgeVerdict:
    """Judge a summary pair, by default in both presentation orders.

    The first call shows the unstructured summary as A; the second swaps the
    slots.  A winner is reported only if both orders pick the same summary.
    With ``swap=False`` only the first order is judged.
    """
    gateway = as_gateway(judge_backend)
    slots = {"A": Variant.UNSTRUCTURED, "B": Variant.STRUCTURED}
    slot, text = _judge_once(gateway, judgment, pair.unstructured_summary, pair.structured_summary,
                             checklist_template, settings, retry_limit)
    first_choice = slots[slot]
    if not swap:
        return JudgeVerdict(pair.judgment_id, first_choice.value, text, True)

    swapped = {"A": Variant.STRUCTURED, "B": Variant.UNSTRUCTURED}
    slot2, text2 = _judge_once(gateway, judgment, pair.structured_summary, pair.unstructured_summary,
                               checklist_template, settings, retry_limit)
    second_choice = swapped[slot2]
    rationale = f"[order 1: unstructured=A, structured=B]\n{text}\n\n[order 2: structured=A, unstructured=B]\n{text2}"
    if first_choice is second_choice:
        return JudgeVerdict(pair.judgment_id, first_choice.value, rationale, True)
    return JudgeVerdict(pair.judgment_id, "inconsistent", rationale, False)


@dataclass(frozen=True)
class PreferenceTally:
    structured_wins: int = 0
    unstructured_wins: int = 0
    inconsistent: int = 0

    @property
    def total(self) -> int:
        return self.structured_wins + self.unstructured_wins + self.inconsistent

    @property
    def structured_share(self) -> float:
        return self.structured_wins / self.total if self.total else 0.0

    def to_json(self) -> dict:
        return {
            "structured_wins": self.structured_wins,
            "unstructured_wins": self.unstructured_wins,
            "inconsistent": self.inconsistent,
            "total": self.total,
            "structured_share": self.structured_share,
        }


def tally_preferences(verdicts: Sequence[JudgeVerdict]) -> PreferenceTally:
    counts = {"structured": 0, "unstructured": 0, "inconsistent": 0}
    for v in verdicts:
        if v.winner not in counts:
            raise ValueError(f"unknown verdict winner {v.winner!r}")
        counts[v.winner] += 1
    return PreferenceTally(counts["structured"], counts["unstructured"], counts["inconsistent"])
