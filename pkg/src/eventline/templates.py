"""Prompt templates with ``{{name}}`` placeholders.

A template file holds an optional ``### system`` section and a ``### user``
section; a file with neither header is all user prompt.  Reference
templates ship in ``eventline/prompts/``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

PLACEHOLDERS = frozenset(
    {"category", "timeline", "judgment", "feedback", "input", "summary_a", "summary_b"}
)
_PLACEHOLDER = re.compile(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\}")

# What each pipeline stage must be able to fill in.
STAGE_REQUIREMENTS: dict[str, frozenset[str]] = {
    "timeline_generation": frozenset({"category"}),
    "judgment_generation": frozenset({"timeline"}),
    "extraction": frozenset({"judgment"}),
    "refinement": frozenset({"judgment", "timeline", "feedback"}),
    "feedback": frozenset({"judgment", "timeline"}),
    "summary": frozenset({"input"}),
    "judge": frozenset({"judgment", "summary_a", "summary_b"}),
}


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    system: str = ""

    def __post_init__(self) -> None:
        unknown = self.placeholders - PLACEHOLDERS
        if unknown:
            raise TemplateError(f"template {self.name!r}: unknown placeholders {sorted(unknown)}")
        missing = STAGE_REQUIREMENTS.get(self.name, frozenset()) - self.required_placeholders
        if missing:
            raise TemplateError(f"template {self.name!r}: body lacks {sorted(missing)}")

    @property
    def placeholders(self) -> frozenset[str]:
        return frozenset(_PLACEHOLDER.findall(self.body)) | frozenset(_PLACEHOLDER.findall(self.system))

    @property
    def required_placeholders(self) -> frozenset[str]:
        return self.placeholders

    def render(self, **values: str) -> tuple[str, str]:
        """Fill placeholders; returns ``(system_prompt, user_prompt)``."""
        missing = self.required_placeholders - values.keys()
        if missing:
            raise TemplateError(f"template {self.name!r}: unfilled placeholders {sorted(missing)}")

        def fill(text: str) -> str:
            # Single pass, so placeholder-like text inside values is not expanded.
            return _PLACEHOLDER.sub(lambda m: str(values[m.group(1)]), text)

        return fill(self.system), fill(self.body)

    @classmethod
    def parse(cls, name: str, text: str) -> "PromptTemplate":
        sections = re.split(r"^###[ \t]*(system|user)[ \t]*$\n?", text, flags=re.M | re.I)
        if len(sections) == 1:
            return cls(name, text.strip("\n") + "\n")
        parts = {"system": "", "user": ""}
        if sections[0].strip():
            raise TemplateError(f"template {name!r}: text before the first section header")
        for header, content in zip(sections[1::2], sections[2::2]):
            parts[header.lower()] = content.strip("\n") + "\n"
        return cls(name, parts["user"], parts["system"].rstrip("\n"))

    @classmethod
    def load(cls, path: str | Path, name: str | None = None) -> "PromptTemplate":
        path = Path(path)
        return cls.parse(name or path.stem, path.read_text(encoding="utf-8"))


def load_templates(directory: str | Path | None = None, names=None) -> dict[str, PromptTemplate]:
    """Load ``<stage>.txt`` templates, defaulting to the shipped reference set.

    Every requested stage must exist; missing files fail at load time.
    """
    names = list(names or STAGE_REQUIREMENTS)
    out = {}
    for name in names:
        if directory is None:
            text = resources.files("eventline").joinpath("prompts", f"{name}.txt").read_text(encoding="utf-8")
            out[name] = PromptTemplate.parse(name, text)
        else:
            path = Path(directory) / f"{name}.txt"
            if not path.is_file():
                raise TemplateError(f"missing template file {path}")
            out[name] = PromptTemplate.load(path, name)
    return out
