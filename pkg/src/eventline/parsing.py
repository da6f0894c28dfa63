"""Recover timelines and feedback reports from raw model completions.

Only three repairs are ever applied to payload text, and each is recorded:

* ``fence-stripped``: markdown code fences removed
* ``smart-quotes-normalized``: typographic double quotes turned into ``"``
* ``trailing-comma-removed``: commas before ``]`` / ``}`` dropped

Repairs past the fence strip are attempted only when the text does not
already parse, so valid JSON is never rewritten.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

from .schema import FIELDS, EventRecord, EventTimeline, validate_event

FENCE_STRIPPED = "fence-stripped"
TRAILING_COMMA_REMOVED = "trailing-comma-removed"
SMART_QUOTES_NORMALIZED = "smart-quotes-normalized"
REPAIR_TAGS = frozenset({FENCE_STRIPPED, TRAILING_COMMA_REMOVED, SMART_QUOTES_NORMALIZED})

SCORE_KEYS: tuple[tuple[str, str], ...] = (
    ("narrative_relevance", "narrative_relevance"),
    ("temporal_accuracy", "temporal_accuracy"),
    ("chronological_flow", "chronological_flow"),
    ("event_detail", "event_detail"),
    ("repetition", "repetition"),
    ("character_identification", "character_identification"),
    ("confidence", "confidence_score"),
)
CRITIQUE_KEY = "critique"


class ParseError(ValueError):
    pass


class NoPayloadFound(ParseError):
    pass


class InvalidJSON(ParseError):
    pass


class NotAnArray(ParseError):
    pass


class TimelineSchemaError(ParseError):
    def __init__(self, index: int, field: str, problem: str):
        self.index, self.field, self.problem = index, field, problem
        super().__init__(f"element {index}: {field} {problem}")


class FeedbackSchemaError(ParseError):
    def __init__(self, field: str, problem: str):
        self.field, self.problem = field, problem
        super().__init__(f"feedback {field} {problem}")


class MissingConfidence(FeedbackSchemaError):
    def __init__(self):
        super().__init__("confidence_score", "missing")


@dataclass
class ParseDiagnostics:
    repairs_applied: list[str] = field(default_factory=list)
    clamped_fields: list[tuple[str, float, float]] = field(default_factory=list)
    retries: int = 0

    def add_repair(self, tag: str) -> None:
        assert tag in REPAIR_TAGS, tag
        if tag not in self.repairs_applied:
            self.repairs_applied.append(tag)

    def merge(self, other: "ParseDiagnostics") -> "ParseDiagnostics":
        for tag in other.repairs_applied:
            self.add_repair(tag)
        self.clamped_fields.extend(other.clamped_fields)
        self.retries += other.retries
        return self

    def to_json(self) -> dict:
        return {
            "repairs_applied": list(self.repairs_applied),
            "clamped_fields": [list(c) for c in self.clamped_fields],
            "retries": self.retries,
        }


@dataclass(frozen=True)
class FeedbackReport:
    narrative_relevance: float
    temporal_accuracy: float
    chronological_flow: float
    event_detail: float
    repetition: float
    character_identification: float
    confidence: float
    critique: str = ""

    def scores(self) -> dict[str, float]:
        return {attr: getattr(self, attr) for attr, _ in SCORE_KEYS}

    def to_json(self) -> dict:
        out: dict = {key: getattr(self, attr) for attr, key in SCORE_KEYS}
        out[CRITIQUE_KEY] = self.critique
        return out


def render_feedback(report: FeedbackReport) -> str:
    """Plain-text form of a report, as shown to the extraction agent."""
    lines = [f"{key}: {getattr(report, attr):.2f}" for attr, key in SCORE_KEYS]
    lines.append(f"{CRITIQUE_KEY}: {report.critique}")
    return "\n".join(lines)


_FENCE_LINE = re.compile(r"^[ \t]*```[\w+-]*[ \t]*$", re.M)
_INLINE_FENCE = re.compile(r"```(?:json)?")
_SMART_DOUBLE = str.maketrans({"“": '"', "”": '"', "„": '"', "‟": '"'})
_TRAILING_COMMA = re.compile(r",(\s*[\]}])")


def _balanced_end(text: str, start: int) -> int | None:
    """Index one past the bracket matching ``text[start]``, or None."""
    stack = []
    closer = None  # string terminator(s) while inside a string
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if closer:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch in closer:
                closer = None
            continue
        if ch == '"':
            closer = '"'
        elif ch == "“":
            closer = '”"'
        elif ch in "[{":
            stack.append("]" if ch == "[" else "}")
        elif ch in "]}":
            if not stack or stack.pop() != ch:
                return None
            if not stack:
                return i + 1
    return None


def _remove_trailing_commas(text: str) -> str:
    # Commas inside strings are left alone.
    out = []
    in_string = escaped = False
    i = 0
    while i < len(text):
        ch = text[i]
        if in_string:
            out.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
            out.append(ch)
        elif ch == ",":
            m = _TRAILING_COMMA.match(text, i)
            if not m:
                out.append(ch)
        else:
            out.append(ch)
        i += 1
    return "".join(out)


def _parses(text: str) -> bool:
    try:
        json.loads(text)
    except ValueError:
        return False
    return True


def extract_json_payload(raw: str, diagnostics: ParseDiagnostics | None = None) -> str:
    """Return the first bracket-balanced JSON array or object in ``raw``.

    Raises :class:`NoPayloadFound` if there is none.  The region is returned
    even if it still fails to parse after the permitted repairs; the parse
    functions report that as :class:`InvalidJSON`.
    """
    diag = diagnostics if diagnostics is not None else ParseDiagnostics()
    text = raw
    if "```" in text:
        text = _FENCE_LINE.sub("", text)
        text = _INLINE_FENCE.sub("", text)
        diag.add_repair(FENCE_STRIPPED)

    payload = None
    for m in re.finditer(r"[\[{]", text):
        end = _balanced_end(text, m.start())
        if end is not None:
            payload = text[m.start():end]
            break
    if payload is None:
        raise NoPayloadFound("no bracket-balanced JSON array or object in completion")

    if _parses(payload):
        return payload
    normalized = payload.translate(_SMART_DOUBLE)
    if normalized != payload:
        diag.add_repair(SMART_QUOTES_NORMALIZED)
        payload = normalized
        if _parses(payload):
            return payload
    stripped = _remove_trailing_commas(payload)
    if stripped != payload:
        diag.add_repair(TRAILING_COMMA_REMOVED)
        payload = stripped
    return payload


def parse_timeline(json_text: str) -> tuple[EventTimeline, ParseDiagnostics]:
    """Validate a JSON array of event objects; any bad element fails the whole parse."""
    try:
        data = json.loads(json_text)
    except ValueError as e:
        raise InvalidJSON(str(e)) from e
    if not isinstance(data, list):
        raise NotAnArray(f"expected a JSON array of events, got {type(data).__name__}")
    if not data:
        raise TimelineSchemaError(0, "timeline", "empty")
    events = []
    for i, item in enumerate(data):
        problems = validate_event(item)
        if problems:
            raise TimelineSchemaError(i, problems[0].field, problems[0].problem)
        events.append(EventRecord(**{attr: item[key] for attr, key in FIELDS}))
    return EventTimeline(tuple(events)), ParseDiagnostics()


def read_timeline(raw: str) -> tuple[EventTimeline, ParseDiagnostics]:
    """Payload extraction followed by :func:`parse_timeline`."""
    diag = ParseDiagnostics()
    payload = extract_json_payload(raw, diag)
    timeline, _ = parse_timeline(payload)
    return timeline, diag


def quantize(value: float) -> float:
    return float(Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def _as_score(key: str, value) -> float:
    if isinstance(value, bool):
        raise FeedbackSchemaError(key, "not-a-number")
    if isinstance(value, (int, float)):
        number = float(value)
    elif isinstance(value, str):
        try:
            number = float(value.strip())
        except ValueError:
            raise FeedbackSchemaError(key, "not-a-number") from None
    else:
        raise FeedbackSchemaError(key, "not-a-number")
    if number != number:  # NaN
        raise FeedbackSchemaError(key, "not-a-number")
    return number


def parse_feedback(raw: str) -> tuple[FeedbackReport, ParseDiagnostics]:
    """Read a feedback payload: seven scores clamped to [0, 1] at two decimals, plus critique."""
    diag = ParseDiagnostics()
    payload = extract_json_payload(raw, diag)
    try:
        data = json.loads(payload)
    except ValueError as e:
        raise InvalidJSON(f"payload is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise FeedbackSchemaError("payload", "not-an-object")
    if "confidence_score" not in data:
        raise MissingConfidence()
    values = {}
    for attr, key in SCORE_KEYS:
        if key not in data:
            raise FeedbackSchemaError(key, "missing")
        number = _as_score(key, data[key])
        clamped = min(1.0, max(0.0, number))
        if clamped != number:
            diag.clamped_fields.append((attr, number, clamped))
        values[attr] = quantize(clamped)
    critique = data.get(CRITIQUE_KEY, "")
    if not isinstance(critique, str):
        critique = json.dumps(critique, ensure_ascii=False)
    return FeedbackReport(**values, critique=critique), diag
