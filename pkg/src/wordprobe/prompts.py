"""Probe-prompt battery, prompt rendering, and yes/no answer parsing.

A battery is an ordered list of PromptTemplate; each template holds the
literal placeholder {WORD} exactly once. parse_answer() classifies any
response text as YES, NO, or UNPARSEABLE and never raises.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Sequence

PLACEHOLDER = "{WORD}"


class PromptError(Exception):
    """Base class for battery/template problems."""


class PlaceholderError(PromptError):
    """Template does not contain the placeholder exactly once."""


class AnswerClass(str, Enum):
    YES = "YES"
    NO = "NO"
    UNPARSEABLE = "UNPARSEABLE"


_TOKEN_RE = re.compile(r"[^\W\d_]+", re.UNICODE)


def _fold(text: str) -> str:
    return unicodedata.normalize("NFC", text).lower()


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    text: str
    language_hint: str = ""
    answer_contract: str = "BooleanYesNo"

    def placeholder_count(self) -> int:
        return self.text.count(PLACEHOLDER)


@dataclass(frozen=True)
class ParseRuleSet:
    """Marker vocabularies for classifying responses.

    Matching is per-token (whole alphabetic runs), case-insensitive,
    after trimming and stripping edge punctuation. The marker families
    must be disjoint after folding.
    """

    yes_markers: tuple[str, ...] = ("yes", "sí", "si")
    no_markers: tuple[str, ...] = ("no",)

    def __post_init__(self):
        yes = {_fold(m) for m in self.yes_markers}
        no = {_fold(m) for m in self.no_markers}
        if yes & no:
            raise ValueError(f"marker families overlap: {sorted(yes & no)}")
        object.__setattr__(self, "_yes", yes)
        object.__setattr__(self, "_no", no)

    @property
    def yes_set(self) -> frozenset[str]:
        return frozenset(self._yes)  # type: ignore[attr-defined]

    @property
    def no_set(self) -> frozenset[str]:
        return frozenset(self._no)  # type: ignore[attr-defined]


DEFAULT_RULES = ParseRuleSet()


def builtin_battery() -> list[PromptTemplate]:
    """The shipped four-prompt battery, P1..P4, loaded from package data."""
    data = resources.files("wordprobe.data").joinpath("battery_default.json").read_text("utf-8")
    return load_battery(data)


def load_battery(data: bytes | str) -> list[PromptTemplate]:
    """Parse a battery file: a JSON array of {id, text, language_hint}."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    raw = json.loads(data)
    if not isinstance(raw, list) or not raw:
        raise PromptError("battery file must be a non-empty JSON array")
    battery = []
    for entry in raw:
        battery.append(
            PromptTemplate(
                id=str(entry["id"]),
                text=str(entry["text"]),
                language_hint=str(entry.get("language_hint", "")),
            )
        )
    problems = lint_battery(battery)
    if problems:
        raise PromptError("invalid battery: " + "; ".join(problems))
    return battery


def render(template: PromptTemplate, word: str) -> str:
    """Substitute the word into the template verbatim (no re-folding)."""
    if template.placeholder_count() != 1:
        raise PlaceholderError(
            f"template {template.id!r} must contain {PLACEHOLDER} exactly once"
        )
    return template.text.replace(PLACEHOLDER, word)


def word_warnings(word: str) -> list[str]:
    """Lint a word before rendering; quote characters nest awkwardly."""
    warnings = []
    if any(q in word for q in ('"', "'", "“", "”")):
        warnings.append(f"QuoteInWord:{word}")
    return warnings


def lint_battery(battery: Sequence[PromptTemplate]) -> list[str]:
    """Return human-readable problems; an empty list means a clean battery."""
    problems = []
    seen: set[str] = set()
    for t in battery:
        if t.id in seen:
            problems.append(f"DuplicateId:{t.id}")
        seen.add(t.id)
        count = t.placeholder_count()
        if count == 0:
            problems.append(f"MissingPlaceholder:{t.id}")
        elif count > 1:
            problems.append(f"MultiplePlaceholders:{t.id}")
        if t.answer_contract != "BooleanYesNo":
            problems.append(f"NonBooleanContract:{t.id}")
    return problems


def parse_answer(raw: str, rules: ParseRuleSet = DEFAULT_RULES) -> AnswerClass:
    """Classify a response as YES, NO, or UNPARSEABLE.

    The first alphabetic token decides when it is a marker and the rest
    of the text does not contradict it; mixed signals ("Yes and no")
    are never guessed. Without a leading marker, the whole text must
    contain exactly one marker family. Never raises.
    """
    tokens = [_fold(t) for t in _TOKEN_RE.findall(unicodedata.normalize("NFC", raw))]
    if not tokens:
        return AnswerClass.UNPARSEABLE

    yes, no = rules.yes_set, rules.no_set
    first, rest = tokens[0], tokens[1:]
    if first in yes:
        if any(t in no for t in rest):
            return AnswerClass.UNPARSEABLE
        return AnswerClass.YES
    if first in no:
        if any(t in yes for t in rest):
            return AnswerClass.UNPARSEABLE
        return AnswerClass.NO

    has_yes = any(t in yes for t in tokens)
    has_no = any(t in no for t in tokens)
    if has_yes and not has_no:
        return AnswerClass.YES
    if has_no and not has_yes:
        return AnswerClass.NO
    return AnswerClass.UNPARSEABLE
