"""Word-list ingestion and corpus tokenization.

Loads one-word-per-line lemma files, tokenizes running text into words,
and pushes both through the same normalization pipeline: trim, Unicode
NFC, optional case folding. Duplicates are dropped keeping the first
occurrence. Everything here is pure and safe to call concurrently.
"""

from __future__ import annotations

import json
import re
import unicodedata
import uuid
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Sequence

# A Word is a plain str that is non-empty, NFC-normalized, and free of
# control characters and internal whitespace. normalize_word() is the
# single place those invariants are enforced.
Word = str


class IngestError(Exception):
    """Base class for word-list ingestion failures."""


class DecodeError(IngestError):
    """Input bytes are not valid UTF-8."""


class EmptyListError(IngestError):
    """No words survived normalization."""


class InvalidWordError(IngestError):
    """A line violates the word invariants (e.g. internal whitespace)."""


class WordSource(str, Enum):
    LEMMA_FILE = "LemmaFile"
    TOKENIZED_TEXT = "TokenizedText"
    MANUAL = "Manual"


@dataclass(frozen=True)
class IngestOptions:
    """Knobs for load_word_list; folding defaults on for lemma lists."""

    fold_case: bool = True


@dataclass(frozen=True)
class NormalizationReport:
    """Audit of one ingestion run; counts always reconcile with the input."""

    lines_total: int = 0
    kept: int = 0
    dropped_duplicates: int = 0
    skipped_blank: int = 0
    skipped_comments: int = 0
    folded: int = 0  # lines whose normalized form differs from the raw trimmed line

    @property
    def skipped(self) -> int:
        return self.skipped_blank + self.skipped_comments

    def reconciles(self) -> bool:
        return self.lines_total == (
            self.kept + self.dropped_duplicates + self.skipped_blank + self.skipped_comments
        )


@dataclass
class WordList:
    """Ordered, deduplicated words plus where they came from."""

    id: str
    name: str
    words: list[Word]
    source: WordSource
    created_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    fold_case: bool = True
    ingest_report: NormalizationReport | None = None

    def __len__(self) -> int:
        return len(self.words)


@dataclass(frozen=True)
class TokenStats:
    total_tokens: int
    unique_words: int
    frequency: dict[Word, int]


_CONTROL_CATEGORIES = ("Cc", "Cf")

# A token is a run of Unicode letters, optionally joined by a single
# apostrophe or hyphen between letters ("d'oro", "tren-hospital").
# [^\W\d_] matches exactly the Unicode letters; em-dashes and other
# punctuation split tokens.
_APOSTROPHES = "'’"
_HYPHENS = "‐‑-"  # ASCII hyphen last: it is literal in the class
_TOKEN_RE = re.compile(
    rf"[^\W\d_]+(?:[{_APOSTROPHES}{_HYPHENS}][^\W\d_]+)*",
    re.UNICODE,
)


def _has_control(text: str) -> bool:
    return any(unicodedata.category(ch) in _CONTROL_CATEGORIES for ch in text)


def normalize_word(raw: str, fold_case: bool = True) -> Word:
    """Normalize one word: trim, NFC, optional lowercase.

    Raises InvalidWordError if the result is empty or contains internal
    whitespace or control characters.
    """
    word = unicodedata.normalize("NFC", raw.strip())
    if fold_case:
        word = word.lower()
    if not word:
        raise InvalidWordError("empty word")
    if any(ch.isspace() for ch in word):
        raise InvalidWordError(f"internal whitespace in {word!r}")
    if _has_control(word):
        raise InvalidWordError(f"control character in {word!r}")
    return word


def _decode(data: bytes | str) -> str:
    if isinstance(data, str):
        return data
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise DecodeError(f"input is not valid UTF-8: {e}") from e


def load_word_list(
    data: bytes | str,
    options: IngestOptions = IngestOptions(),
    name: str = "wordlist",
    source: WordSource = WordSource.LEMMA_FILE,
) -> WordList:
    """Load a one-word-per-line UTF-8 word list.

    Lines starting with '#' are comments; blank lines are skipped;
    duplicates after normalization are dropped keeping the first
    occurrence. Raises DecodeError on bad UTF-8 and EmptyListError if
    nothing survives.
    """
    text = _decode(data)
    seen: set[Word] = set()
    words: list[Word] = []
    lines_total = kept = dropped = blank = comments = folded = 0

    for lineno, line in enumerate(text.splitlines(), start=1):
        lines_total += 1
        stripped = line.strip()
        if not stripped:
            blank += 1
            continue
        if stripped.startswith("#"):
            comments += 1
            continue
        try:
            word = normalize_word(stripped, fold_case=options.fold_case)
        except InvalidWordError as e:
            raise InvalidWordError(f"line {lineno}: {e}") from e
        if word != stripped:
            folded += 1
        if word in seen:
            dropped += 1
            continue
        seen.add(word)
        words.append(word)
        kept += 1

    if not words:
        raise EmptyListError("no words survived normalization")

    report = NormalizationReport(
        lines_total=lines_total,
        kept=kept,
        dropped_duplicates=dropped,
        skipped_blank=blank,
        skipped_comments=comments,
        folded=folded,
    )
    return WordList(
        id=uuid.uuid4().hex[:12],
        name=name,
        words=words,
        source=source,
        fold_case=options.fold_case,
        ingest_report=report,
    )


def tokenize_text(data: bytes | str, fold_case: bool = True) -> list[Word]:
    """Split running text into normalized word tokens.

    Splits on anything that is neither a Unicode letter nor an inner
    apostrophe/hyphen between letters; keeps token order and
    multiplicity. Raises DecodeError on bad UTF-8.
    """
    text = unicodedata.normalize("NFC", _decode(data))
    tokens = _TOKEN_RE.findall(text)
    if fold_case:
        tokens = [t.lower() for t in tokens]
    return tokens


def unique_words(
    tokens: Sequence[Word],
    name: str = "tokenized",
) -> tuple[WordList, TokenStats]:
    """First occurrences in order, plus exact token counts."""
    frequency = Counter(tokens)
    ordered = list(dict.fromkeys(tokens))
    stats = TokenStats(
        total_tokens=len(tokens),
        unique_words=len(frequency),
        frequency=dict(frequency),
    )
    wordlist = WordList(
        id=uuid.uuid4().hex[:12],
        name=name,
        words=ordered,
        source=WordSource.TOKENIZED_TEXT,
        ingest_report=NormalizationReport(
            lines_total=len(tokens),
            kept=len(ordered),
            dropped_duplicates=len(tokens) - len(ordered),
        ),
    )
    return wordlist, stats


def normalization_report(wordlist: WordList) -> NormalizationReport:
    """Audit counts for the run that produced this list.

    Lists built directly (source Manual) get an identity report.
    """
    if wordlist.ingest_report is not None:
        return wordlist.ingest_report
    n = len(wordlist.words)
    return NormalizationReport(lines_total=n, kept=n)


def export_word_list(wordlist: WordList) -> bytes:
    """Canonical one-word-per-line UTF-8 export."""
    return ("\n".join(wordlist.words) + "\n").encode("utf-8") if wordlist.words else b""


def stats_document(stats: TokenStats, top_n: int = 20) -> dict:
    """JSON-ready stats summary with the top-N most frequent words."""
    top = sorted(stats.frequency.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
    return {
        "total_tokens": stats.total_tokens,
        "unique_words": stats.unique_words,
        "top_n_frequencies": [{"word": w, "count": c} for w, c in top],
    }


def stats_json(stats: TokenStats, top_n: int = 20) -> bytes:
    return json.dumps(stats_document(stats, top_n), ensure_ascii=False, indent=2).encode("utf-8")
