"""Shared fixtures: stores, scripted providers, record builders."""

from __future__ import annotations

import asyncio
from datetime import datetime, timezone
from pathlib import Path

import pytest

from wordprobe.dispatch import AnswerRecord, ProviderRequest, ProviderResponse
from wordprobe.prompts import AnswerClass
from wordprobe.store import Store

DATA_DIR = Path(__file__).parent / "data"

EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)


@pytest.fixture
def store(tmp_path) -> Store:
    return Store(tmp_path / "test.db")


def make_record(
    experiment_id: str,
    word: str,
    prompt_id: str,
    parsed: AnswerClass | str,
    raw_text: str | None = None,
    attempts: int = 1,
) -> AnswerRecord:
    parsed = AnswerClass(parsed)
    if raw_text is None:
        raw_text = {"YES": "Yes", "NO": "No", "UNPARSEABLE": "Maybe?"}[parsed.value]
    return AnswerRecord(
        experiment_id=experiment_id,
        word=word,
        prompt_id=prompt_id,
        raw_text=raw_text,
        parsed=parsed,
        attempts=attempts,
        completed_at=EPOCH,
        latency=0.0,
    )


def records_for_codes(
    experiment_id: str, codes: dict[str, str], prompt_ids=("P1", "P2", "P3", "P4")
) -> list[AnswerRecord]:
    """Records for words with given combination codes, e.g. {"w1": "0001"}.

    The code reads {Pk,...,P1} left to right; use 'U' in place of a bit
    for an unparseable slot.
    """
    records = []
    k = len(prompt_ids)
    for word, code in codes.items():
        assert len(code) == k
        for j, ch in enumerate(code):
            prompt = prompt_ids[k - 1 - j]
            parsed = {"1": AnswerClass.YES, "0": AnswerClass.NO, "U": AnswerClass.UNPARSEABLE}[ch]
            records.append(make_record(experiment_id, word, prompt, parsed))
    return records


class ScriptedProvider:
    """Provider that pops canned outcomes: response texts or exceptions."""

    def __init__(self, script):
        self.script = list(script)
        self.calls = 0

    async def complete(self, request: ProviderRequest) -> ProviderResponse:
        self.calls += 1
        outcome = self.script.pop(0) if self.script else "Yes"
        if isinstance(outcome, Exception):
            raise outcome
        return ProviderResponse(text=outcome, latency=0.0)


class TableProvider:
    """Answers from an explicit truth table: word -> set of YES prompt ids."""

    def __init__(self, battery, table):
        import re

        from wordprobe.prompts import PLACEHOLDER

        self.table = table
        self.calls = 0
        self._patterns = [
            (t.id, re.compile(re.escape(t.text).replace(re.escape(PLACEHOLDER), "(.+?)") + r"\Z"))
            for t in battery
        ]

    def _match(self, message: str) -> tuple[str, str]:
        for prompt_id, pattern in self._patterns:
            m = pattern.match(message)
            if m:
                return m.group(1), prompt_id
        raise AssertionError(f"unmatched prompt: {message!r}")

    async def complete(self, request: ProviderRequest) -> ProviderResponse:
        self.calls += 1
        word, prompt_id = self._match(request.user_message)
        return ProviderResponse(
            text="Yes" if prompt_id in self.table.get(word, set()) else "No",
            latency=0.0,
        )


class CountingProvider:
    """Wraps a provider; optionally fires a callback after the Nth call."""

    def __init__(self, inner, stop_after: int | None = None, on_stop=None):
        self.inner = inner
        self.calls = 0
        self.in_flight = 0
        self.max_in_flight = 0
        self.call_times: list[float] = []
        self._stop_after = stop_after
        self._on_stop = on_stop

    async def complete(self, request: ProviderRequest) -> ProviderResponse:
        import time

        self.calls += 1
        self.call_times.append(time.monotonic())
        self.in_flight += 1
        self.max_in_flight = max(self.max_in_flight, self.in_flight)
        try:
            response = await self.inner.complete(request)
        finally:
            self.in_flight -= 1
        if self._stop_after is not None and self.calls >= self._stop_after and self._on_stop:
            self._on_stop()
        return response


def run(coro):
    return asyncio.run(coro)
