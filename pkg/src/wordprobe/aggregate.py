"""Reports over answer records: combination codes, histograms, rates.

A word's k answers are coded as a k-bit string with the last prompt's
bit leftmost and P1 rightmost, '1' for YES — "0001" means YES to P1
only. Words with missing or unparseable answers are excluded from the
histogram and counted separately.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .dispatch import AnswerRecord
from .prompts import AnswerClass


class AggregateError(Exception):
    pass


class IncompleteOutcome(AggregateError):
    """The outcome is missing at least one prompt's answer."""


class UnparseableSlot(AggregateError):
    """The outcome contains an UNPARSEABLE answer; it has no code."""


class EmptyHistogram(AggregateError):
    """No complete words to compute rates over."""


@dataclass(frozen=True)
class WordOutcome:
    """One word's answers; bits[i] holds the answer to prompt i+1."""

    word: str
    bits: tuple[AnswerClass | None, ...]
    complete: bool


@dataclass(frozen=True)
class CombinationHistogram:
    k: int
    counts: dict[str, int]
    total_complete: int
    total_excluded: int


def encode(outcome: WordOutcome) -> str:
    """Code string for a complete, fully parseable outcome."""
    if not outcome.complete or any(b is None for b in outcome.bits):
        raise IncompleteOutcome(f"word {outcome.word!r} is missing answers")
    if any(b is AnswerClass.UNPARSEABLE for b in outcome.bits):
        raise UnparseableSlot(f"word {outcome.word!r} has an unparseable answer")
    return "".join("1" if b is AnswerClass.YES else "0" for b in reversed(outcome.bits))


def decode(code: str) -> tuple[bool, ...]:
    """YES-flags by prompt index: result[i] is True iff P(i+1) was YES."""
    if not code or any(c not in "01" for c in code):
        raise AggregateError(f"invalid combination code {code!r}")
    return tuple(c == "1" for c in reversed(code))


def build_outcomes(
    records: Iterable[AnswerRecord],
    prompt_ids: Sequence[str],
) -> list[WordOutcome]:
    """Group records into per-word outcomes, ordered by word.

    Duplicate (word, prompt) pairs keep the first record seen,
    mirroring the store's first-write-wins rule.
    """
    by_word: dict[str, dict[str, AnswerClass]] = {}
    for r in records:
        by_word.setdefault(r.word, {}).setdefault(r.prompt_id, r.parsed)
    outcomes = []
    for word in sorted(by_word):
        answers = by_word[word]
        bits = tuple(answers.get(pid) for pid in prompt_ids)
        outcomes.append(WordOutcome(word=word, bits=bits, complete=None not in bits))
    return outcomes


def histogram(
    records: Iterable[AnswerRecord],
    prompt_ids: Sequence[str],
) -> CombinationHistogram:
    """Count answer combinations over all fully-probed, parseable words."""
    counts: dict[str, int] = {}
    excluded = 0
    for outcome in build_outcomes(records, prompt_ids):
        try:
            code = encode(outcome)
        except (IncompleteOutcome, UnparseableSlot):
            excluded += 1
            continue
        counts[code] = counts.get(code, 0) + 1
    return CombinationHistogram(
        k=len(prompt_ids),
        counts=dict(sorted(counts.items())),
        total_complete=sum(counts.values()),
        total_excluded=excluded,
    )


def positive_rate(hist: CombinationHistogram, prompt_index: int) -> float:
    """Fraction of complete words answering YES to prompt P(prompt_index)."""
    if not 1 <= prompt_index <= hist.k:
        raise AggregateError(f"prompt index {prompt_index} outside 1..{hist.k}")
    if hist.total_complete == 0:
        raise EmptyHistogram("no complete words")
    bit = hist.k - prompt_index
    positive = sum(count for code, count in hist.counts.items() if code[bit] == "1")
    return positive / hist.total_complete


def contradictions(
    records: Iterable[AnswerRecord],
    prompt_ids: Sequence[str],
    pair: tuple[str, str] = ("P2", "P3"),
) -> list[str]:
    """Words whose answers to the designated equivalent prompts disagree."""
    first, second = pair
    if first not in prompt_ids or second not in prompt_ids:
        raise AggregateError(f"battery does not contain the pair {pair}")
    i, j = prompt_ids.index(first), prompt_ids.index(second)
    words = []
    for outcome in build_outcomes(records, prompt_ids):
        if not outcome.complete:
            continue
        a, b = outcome.bits[i], outcome.bits[j]
        if AnswerClass.UNPARSEABLE in (a, b):
            continue
        if a is not b:
            words.append(outcome.word)
    return words


def _percent(count: int, total: int) -> str:
    return f"{100.0 * count / total:.2f}" if total else "0.00"


def export_records_csv(records: Iterable[AnswerRecord]) -> bytes:
    """CSV of records, ordered by (word, prompt_id)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["word", "prompt_id", "parsed", "raw_text", "attempts", "latency_ms", "completed_at"])
    for r in sorted(records, key=lambda r: (r.word, r.prompt_id)):
        writer.writerow(
            [
                r.word,
                r.prompt_id,
                r.parsed.value,
                r.raw_text,
                r.attempts,
                f"{r.latency * 1000.0:.3f}",
                r.completed_at.isoformat(),
            ]
        )
    return buf.getvalue().encode("utf-8")


def export_records_json(records: Iterable[AnswerRecord]) -> bytes:
    rows = [
        {
            "word": r.word,
            "prompt_id": r.prompt_id,
            "parsed": r.parsed.value,
            "raw_text": r.raw_text,
            "attempts": r.attempts,
            "latency_ms": round(r.latency * 1000.0, 3),
            "completed_at": r.completed_at.isoformat(),
        }
        for r in sorted(records, key=lambda r: (r.word, r.prompt_id))
    ]
    return json.dumps(rows, ensure_ascii=False, indent=2).encode("utf-8")


def histogram_document(hist: CombinationHistogram) -> dict:
    return {
        "k": hist.k,
        "total_complete": hist.total_complete,
        "total_excluded": hist.total_excluded,
        "bins": [
            {"code": code, "count": count, "percent": float(_percent(count, hist.total_complete))}
            for code, count in sorted(hist.counts.items())
        ],
    }


def export_histogram_json(hist: CombinationHistogram) -> bytes:
    return json.dumps(histogram_document(hist), ensure_ascii=False, indent=2).encode("utf-8")


def histogram_from_json(data: bytes | str) -> CombinationHistogram:
    doc = json.loads(data)
    counts = {b["code"]: int(b["count"]) for b in doc["bins"]}
    return CombinationHistogram(
        k=int(doc["k"]),
        counts=dict(sorted(counts.items())),
        total_complete=int(doc["total_complete"]),
        total_excluded=int(doc["total_excluded"]),
    )


def export_histogram_csv(hist: CombinationHistogram) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["code", "count", "percent"])
    for code, count in sorted(hist.counts.items()):
        writer.writerow([code, count, _percent(count, hist.total_complete)])
    return buf.getvalue().encode("utf-8")
