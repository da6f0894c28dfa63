"""Event records, timelines, judgment documents and their canonical text form.

The on-disk / on-wire event shape is a JSON object with exactly the keys
``Timestamp``, ``Event``, ``Judge`` and ``Precedent``; a timeline is a JSON
array of those objects.  ``"N/A"`` marks a judge or precedent that does not
apply (a convention of this package, not of any upstream schema).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

NOT_APPLICABLE = "N/A"

# (attribute name, JSON key) in canonical order.
FIELDS: tuple[tuple[str, str], ...] = (
    ("timestamp", "Timestamp"),
    ("event", "Event"),
    ("judge", "Judge"),
    ("precedent", "Precedent"),
)
JSON_KEYS = tuple(key for _, key in FIELDS)

CASE_CATEGORIES: tuple[str, ...] = (
    "Constitutional Law",
    "Civil Law",
    "Banking and Finance Law",
    "Education Law",
    "Intellectual Property Rights (IPR)",
    "Taxation Law",
    "Labor and Employment Law",
    "Family Law",
    "Consumer Protection Law",
    "Cyber Law",
    "Real Estate and Property Law",
    "Criminal Law",
    "Service Law (Government Employees)",
    "Contract Law",
    "Environmental Law",
    "Corporate Law",
    "Administrative Law",
    "Insurance Law",
    "Health and Medical Law",
    "Maritime Law",
    "Human Rights Law",
    "Election Law",
    "Energy and Mining Law",
    "Telecom Law",
    "Customs and Excise Law",
)
_CATEGORY_SET = frozenset(CASE_CATEGORIES)


class SchemaError(ValueError):
    """A value does not conform to the event schema."""


@dataclass(frozen=True)
class CaseCategory:
    name: str

    def __post_init__(self) -> None:
        if self.name not in _CATEGORY_SET:
            raise SchemaError(f"unknown case category: {self.name!r}")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Violation:
    field: str
    problem: str  # "missing" | "empty" | "not-a-string"

    def __str__(self) -> str:
        return f"{self.field} {self.problem}"


@dataclass(frozen=True)
class EventRecord:
    timestamp: str
    event: str
    judge: str
    precedent: str

    def to_json(self) -> dict[str, str]:
        return {key: getattr(self, attr) for attr, key in FIELDS}

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "EventRecord":
        problems = validate_event(obj)
        if problems:
            raise SchemaError("; ".join(map(str, problems)))
        return cls(**{attr: obj[key] for attr, key in FIELDS})


@dataclass(frozen=True)
class EventTimeline:
    events: tuple[EventRecord, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))
        if not self.events:
            raise SchemaError("a timeline needs at least one event")

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __getitem__(self, i):
        return self.events[i]

    def to_json(self) -> list[dict[str, str]]:
        return [e.to_json() for e in self.events]

    @classmethod
    def from_json(cls, items: Sequence[Mapping[str, Any]]) -> "EventTimeline":
        return cls(tuple(EventRecord.from_json(item) for item in items))


@dataclass(frozen=True)
class JudgmentDocument:
    id: str
    text: str
    category: CaseCategory | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise SchemaError("judgment id must be non-empty")
        if not self.text or not self.text.strip():
            raise SchemaError(f"judgment {self.id!r} has empty text")


def validate_event(record: EventRecord | Mapping[str, Any]) -> list[Violation]:
    """Return schema violations for one event; an empty list means valid.

    Accepts either an :class:`EventRecord` or a raw JSON mapping keyed by
    ``Timestamp``/``Event``/``Judge``/``Precedent``.  Never raises.
    """
    if isinstance(record, EventRecord):
        values = {attr: getattr(record, attr) for attr, _ in FIELDS}
    elif isinstance(record, Mapping):
        values = {attr: record[key] for attr, key in FIELDS if key in record}
    else:
        return [Violation("record", "not-an-object")]

    problems = []
    for attr, _ in FIELDS:
        if attr not in values:
            problems.append(Violation(attr, "missing"))
            continue
        value = values[attr]
        if not isinstance(value, str):
            problems.append(Violation(attr, "not-a-string"))
        elif attr in ("timestamp", "event") and not value.strip():
            problems.append(Violation(attr, "empty"))
    return problems


@dataclass(frozen=True)
class TimelineRenderOptions:
    field_order: tuple[str, ...] = tuple(attr for attr, _ in FIELDS)
    separator: str = "\n"

    def __post_init__(self) -> None:
        if sorted(self.field_order) != sorted(attr for attr, _ in FIELDS):
            raise ValueError(f"field_order must be a permutation of {[a for a, _ in FIELDS]}")


DEFAULT_RENDER = TimelineRenderOptions()
_LABELS = dict(FIELDS)


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("\n", "\\n").replace("\r", "\\r")


def _unescape(value: str) -> str:
    return re.sub(r"\\(.)", lambda m: {"n": "\n", "r": "\r"}.get(m.group(1), m.group(1)), value)


def canonical_render(timeline: EventTimeline, opts: TimelineRenderOptions = DEFAULT_RENDER) -> str:
    """Render a timeline as deterministic, line-oriented text.

    Each record becomes a block headed ``[k]`` followed by one ``Label: value``
    line per field.  Newlines and backslashes inside values are escaped so
    the block structure survives any field content.
    """
    blocks = []
    for k, record in enumerate(timeline.events, start=1):
        lines = [f"[{k}]"]
        lines += [f"{_LABELS[attr]}: {_escape(getattr(record, attr))}" for attr in opts.field_order]
        blocks.append("\n".join(lines) + "\n")
    return opts.separator.join(blocks)


def read_rendered(text: str, opts: TimelineRenderOptions = DEFAULT_RENDER) -> EventTimeline:
    """Inverse of :func:`canonical_render`."""
    lines = text.split("\n")
    events = []
    i = 0
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        if not re.fullmatch(r"\[\d+\]", lines[i]):
            raise SchemaError(f"line {i + 1}: expected a record header, got {lines[i]!r}")
        values = {}
        for attr in opts.field_order:
            i += 1
            label = _LABELS[attr] + ": "
            if i >= len(lines) or not lines[i].startswith(label):
                raise SchemaError(f"line {i + 1}: expected {label.strip()!r}")
            values[attr] = _unescape(lines[i][len(label):])
        events.append(EventRecord(**values))
        i += 1
    return EventTimeline(tuple(events))


_MONTHS = {
    name: i
    for i, names in enumerate(
        [
            ("january", "jan"), ("february", "feb"), ("march", "mar"), ("april", "apr"),
            ("may",), ("june", "jun"), ("july", "jul"), ("august", "aug"),
            ("september", "sep", "sept"), ("october", "oct"), ("november", "nov"),
            ("december", "dec"),
        ],
        start=1,
    )
    for name in names
}
_MONTH_RE = "|".join(sorted(_MONTHS, key=len, reverse=True))
_YEAR = r"(?P<year>1[6-9]\d\d|20\d\d)"
_DAY_MONTH_YEAR = re.compile(
    rf"\b(?P<day>\d{{1,2}})(?:st|nd|rd|th)?\s+(?:of\s+)?(?P<month>{_MONTH_RE})\.?,?\s+{_YEAR}\b", re.I
)
_MONTH_DAY_YEAR = re.compile(
    rf"\b(?P<month>{_MONTH_RE})\.?\s+(?P<day>\d{{1,2}})(?:st|nd|rd|th)?,?\s+{_YEAR}\b", re.I
)
_MONTH_YEAR = re.compile(rf"\b(?P<month>{_MONTH_RE})\.?,?\s+{_YEAR}\b", re.I)
_NUMERIC_DMY = re.compile(r"\b(?P<day>\d{1,2})[./-](?P<month>\d{1,2})[./-](?P<year>\d{4})\b")
_YEAR_ONLY = re.compile(rf"\b{_YEAR}\b")


def normalize_timestamp(text: str) -> tuple[int, int, int] | None:
    """Best-effort sortable ``(year, month, day)`` key for a temporal expression.

    Recognizes English month names and numeric day-month-year forms.  Missing
    day defaults to 1, missing month to 1.  Returns None when nothing matches.

    >>> normalize_timestamp("15 March 2022")
    (2022, 3, 15)
    >>> normalize_timestamp("During the final hearing") is None
    True
    """
    for pattern in (_DAY_MONTH_YEAR, _MONTH_DAY_YEAR, _NUMERIC_DMY):
        m = pattern.search(text)
        if m:
            month = m.group("month")
            month = int(month) if month.isdigit() else _MONTHS[month.lower()]
            day = int(m.group("day"))
            if 1 <= month <= 12 and 1 <= day <= 31:
                return int(m.group("year")), month, day
    m = _MONTH_YEAR.search(text)
    if m:
        return int(m.group("year")), _MONTHS[m.group("month").lower()], 1
    m = _YEAR_ONLY.search(text)
    if m:
        return int(m.group("year")), 1, 1
    return None


def is_chronological(timeline: EventTimeline) -> bool:
    """True when every recognizable timestamp is non-decreasing in emitted order."""
    keys = [k for k in (normalize_timestamp(e.timestamp) for e in timeline) if k is not None]
    return all(a <= b for a, b in zip(keys, keys[1:]))

