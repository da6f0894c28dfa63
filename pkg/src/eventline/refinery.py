"""Extract / critique / refine loop with patience and tolerance stopping."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

from .gateway import ChatRequest, as_gateway
from .parsing import (
    FeedbackReport,
    ParseDiagnostics,
    ParseError,
    parse_feedback,
    quantize,
    read_timeline,
    render_feedback,
)
from .schema import EventTimeline, JudgmentDocument, canonical_render
from .templates import PromptTemplate

log = logging.getLogger(__name__)

TIMELINE_REPAIR_SUFFIX = (
    "\n\nYour previous answer could not be used ({error}). "
    "Reply again with ONLY the JSON array of event objects and nothing else."
)
FEEDBACK_REPAIR_SUFFIX = (
    "\n\nYour previous answer could not be used ({error}). "
    "Reply again with ONLY the JSON object of scores and critique and nothing else."
)


class AgentFailure(RuntimeError):
    """An agent never produced a usable completion within the retry limit."""


class StopReason(str, Enum):
    CONTINUE = "continue"
    TOLERANCE = "tolerance"
    PATIENCE = "patience"
    MAX_ITERATIONS = "max_iterations"
    AGENT_FAILURE = "agent_failure"


@dataclass(frozen=True)
class RefinementConfig:
    max_iterations: int = 10
    patience_window: int = 3
    tolerance_window: int = 3
    parse_retry_limit: int = 2

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.patience_window < 1:
            raise ValueError("patience_window must be >= 1")
        if self.tolerance_window < 2:
            raise ValueError("tolerance_window must be >= 2")
        if self.parse_retry_limit < 0:
            raise ValueError("parse_retry_limit must be >= 0")


@dataclass(frozen=True)
class AgentSettings:
    """Decoding parameters for one agent role."""

    temperature: float = 0.0
    max_output_tokens: int = 4096
    model_name: str = ""


@dataclass(frozen=True)
class IterationRecord:
    index: int
    timeline: EventTimeline
    feedback: FeedbackReport
    diagnostics: ParseDiagnostics = field(default_factory=ParseDiagnostics, compare=False)

    @property
    def confidence(self) -> float:
        return self.feedback.confidence


@dataclass
class RefinementState:
    history: list[IterationRecord] = field(default_factory=list)
    best_score: float | None = None
    best_index: int | None = None  # position in history
    no_improve_count: int = 0
    iterations_run: int = 0

    def observe(self, record: IterationRecord) -> None:
        self.iterations_run += 1
        self.history.append(record)
        if self.best_score is None or record.confidence > self.best_score:
            self.best_score = record.confidence
            self.best_index = len(self.history) - 1
            self.no_improve_count = 0
        else:
            self.no_improve_count += 1

    def observe_unscorable(self) -> None:
        """An iteration whose critique never parsed: no signal, so no progress."""
        self.iterations_run += 1
        self.no_improve_count += 1

    @classmethod
    def from_confidences(cls, confidences: Sequence[float]) -> "RefinementState":
        """State after feeding a bare confidence trace (used by tests and tools)."""
        state = cls()
        placeholder = EventTimeline.from_json([{"Timestamp": "-", "Event": "-", "Judge": "N/A", "Precedent": "N/A"}])
        for i, c in enumerate(confidences):
            fb = FeedbackReport(*([quantize(c)] * 7))
            state.observe(IterationRecord(i, placeholder, fb))
        return state


@dataclass(frozen=True)
class RefinementResult:
    selected_timeline: EventTimeline
    selected_feedback: FeedbackReport
    stop_reason: StopReason
    iterations_run: int
    full_history: tuple[IterationRecord, ...]
    selected_index: int  # iteration number of the selected record
    timings: Mapping[str, float] = field(default_factory=dict, compare=False)

    @property
    def confidence_trace(self) -> list[float]:
        return [r.confidence for r in self.full_history]

    def manifest(self, document_id: str, config: RefinementConfig) -> dict:
        return {
            "id": document_id,
            "config": asdict(config),
            "confidence_trace": self.confidence_trace,
            "iteration_indices": [r.index for r in self.full_history],
            "stop_reason": self.stop_reason.value,
            "selected_index": self.selected_index,
            "iterations_run": self.iterations_run,
            "best_score": self.selected_feedback.confidence,
            "diagnostics": [r.diagnostics.to_json() for r in self.full_history],
            "timings": dict(self.timings),
        }


def should_stop(state: RefinementState, config: RefinementConfig) -> StopReason:
    """Decide whether the loop halts after the latest feedback.

    Precedence when several criteria hold at once: tolerance, patience,
    then the iteration cap.
    """
    confidences = [quantize(r.confidence) for r in state.history]
    window = confidences[-config.tolerance_window:]
    if len(window) == config.tolerance_window and len(set(window)) == 1:
        return StopReason.TOLERANCE
    if state.no_improve_count >= config.patience_window:
        return StopReason.PATIENCE
    if max(state.iterations_run, len(state.history)) >= config.max_iterations:
        return StopReason.MAX_ITERATIONS
    return StopReason.CONTINUE


def select_best(history: Sequence[IterationRecord]) -> tuple[int, IterationRecord]:
    """Highest-confidence record; the earliest one wins ties."""
    if not history:
        raise ValueError("cannot select from an empty history")
    best = 0
    for i, record in enumerate(history):
        if record.confidence > history[best].confidence:
            best = i
    return best, history[best]


def _ask_until_parsed(gateway, template: PromptTemplate, values: dict, settings: AgentSettings,
                      task: str, parse: Callable, suffix: str, retry_limit: int):
    extra = ""
    last_error = None
    for attempt in range(retry_limit + 1):
        system, user = template.render(**values)
        request = ChatRequest(
            system_prompt=system,
            user_prompt=user + extra,
            temperature=settings.temperature,
            max_output_tokens=settings.max_output_tokens,
            model_name=settings.model_name,
            task=task,
        )
        text = gateway.complete(request).text
        try:
            parsed, diag = parse(text)
        except ParseError as e:
            last_error = e
            log.info("%s: unusable completion on attempt %d: %s", task, attempt + 1, e)
            extra = suffix.format(error=e)
            continue
        diag.retries = attempt
        return parsed, diag
    raise AgentFailure(f"{task}: no usable completion after {retry_limit + 1} attempts ({last_error})")


def run_refinement(
    judgment: JudgmentDocument,
    extraction_backend,
    feedback_backend,
    templates: Mapping[str, PromptTemplate],
    config: RefinementConfig = RefinementConfig(),
    extraction_settings: AgentSettings = AgentSettings(),
    feedback_settings: AgentSettings = AgentSettings(),
) -> RefinementResult:
    """Run the dual-agent loop on one judgment and return the best timeline found.

    Iteration 0 extracts from the judgment alone.  Every later iteration sees
    the judgment plus the previous timeline and its feedback, nothing older.
    Raises :class:`AgentFailure` when iteration 0 yields no scored timeline.
    """
    extractor = as_gateway(extraction_backend)
    critic = as_gateway(feedback_backend)
    timings = {"extraction": 0.0, "feedback": 0.0}
    state = RefinementState()
    previous: IterationRecord | None = None
    reason = StopReason.CONTINUE
    i = 0

    while True:
        t0 = time.perf_counter()
        try:
            if previous is None:
                timeline, diag = _ask_until_parsed(
                    extractor, templates["extraction"], {"judgment": judgment.text},
                    extraction_settings, "extraction", read_timeline, TIMELINE_REPAIR_SUFFIX,
                    config.parse_retry_limit,
                )
            else:
                values = {
                    "judgment": judgment.text,
                    "timeline": canonical_render(previous.timeline),
                    "feedback": render_feedback(previous.feedback),
                }
                timeline, diag = _ask_until_parsed(
                    extractor, templates["refinement"], values,
                    extraction_settings, "refinement", read_timeline, TIMELINE_REPAIR_SUFFIX,
                    config.parse_retry_limit,
                )
        except AgentFailure:
            if previous is None:
                raise
            reason = StopReason.AGENT_FAILURE
            break
        finally:
            timings["extraction"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        try:
            feedback, fb_diag = _ask_until_parsed(
                critic, templates["feedback"],
                {"judgment": judgment.text, "timeline": canonical_render(timeline)},
                feedback_settings, "feedback", parse_feedback, FEEDBACK_REPAIR_SUFFIX,
                config.parse_retry_limit,
            )
        except AgentFailure:
            if previous is None:
                raise
            log.warning("%s: iteration %d dropped, feedback unusable", judgment.id, i)
            state.observe_unscorable()
        else:
            record = IterationRecord(i, timeline, feedback, diag.merge(fb_diag))
            state.observe(record)
            previous = record
        finally:
            timings["feedback"] += time.perf_counter() - t0

        reason = should_stop(state, config)
        if reason is not StopReason.CONTINUE:
            break
        i += 1

    position, best = select_best(state.history)
    return RefinementResult(
        selected_timeline=best.timeline,
        selected_feedback=best.feedback,
        stop_reason=reason,
        iterations_run=state.iterations_run,
        full_history=tuple(state.history),
        selected_index=best.index,
        timings=timings,
    )
