"""Provider implementations: a deterministic mock and an HTTP chat client."""

from __future__ import annotations

import asyncio
import hashlib
import os
import re
import time
from typing import Sequence

import httpx

from .dispatch import (
    FatalProviderError,
    ProviderAuthError,
    ProviderRequest,
    ProviderResponse,
    ProviderTimeout,
    RateLimitExceeded,
    TransientProviderError,
)
from .prompts import PLACEHOLDER, PromptTemplate, builtin_battery

API_KEY_ENV = "WORDPROBE_API_KEY"

DEFAULT_THRESHOLDS = {"P1": 80, "P2": 55, "P3": 50, "P4": 40}

UNPARSEABLE_TEXT = "I cannot determine that."


def word_hash(word: str) -> int:
    """Stable bucket in [0, 100) for a word; independent of process."""
    digest = hashlib.sha256(word.encode("utf-8")).hexdigest()
    return int(digest, 16) % 100


class MockProvider:
    """Offline provider with a hash-based knowledge function.

    Answers "Yes" to a prompt iff word_hash(word) < the prompt's
    threshold, so knowledge is a pure function of the word and the
    battery — runs are reproducible regardless of scheduling. A seeded
    fraction of responses comes back unparseable to exercise the
    re-ask path; that choice is also a pure function of
    (seed, word, prompt), never of call order.
    """

    def __init__(
        self,
        battery: Sequence[PromptTemplate] | None = None,
        thresholds: dict[str, int] | None = None,
        seed: int = 0,
        unparseable_rate: float = 0.0,
        latency: float = 0.0,
    ):
        self.battery = list(battery) if battery is not None else builtin_battery()
        self.thresholds = dict(thresholds) if thresholds is not None else dict(DEFAULT_THRESHOLDS)
        self.seed = seed
        self.unparseable_rate = unparseable_rate
        self.latency = latency
        self.calls = 0
        self._patterns = [
            (t.id, re.compile(re.escape(t.text).replace(re.escape(PLACEHOLDER), "(.+?)") + r"\Z"))
            for t in self.battery
        ]

    def knowledge(self, word: str, prompt_id: str) -> bool:
        return word_hash(word) < self.thresholds.get(prompt_id, 50)

    def _flagged_unparseable(self, word: str, prompt_id: str) -> bool:
        if self.unparseable_rate <= 0:
            return False
        key = f"{self.seed}:{word}:{prompt_id}:unparseable".encode("utf-8")
        bucket = int(hashlib.sha256(key).hexdigest(), 16) % 1_000_000
        return bucket < self.unparseable_rate * 1_000_000

    def _match(self, user_message: str) -> tuple[str, str]:
        for prompt_id, pattern in self._patterns:
            m = pattern.match(user_message)
            if m:
                return m.group(1), prompt_id
        return user_message, "?"

    async def complete(self, request: ProviderRequest) -> ProviderResponse:
        self.calls += 1
        if self.latency > 0:
            await asyncio.sleep(self.latency)
        word, prompt_id = self._match(request.user_message)
        if self._flagged_unparseable(word, prompt_id):
            text = UNPARSEABLE_TEXT
        else:
            text = "Yes" if self.knowledge(word, prompt_id) else "No"
        return ProviderResponse(
            text=text,
            latency=self.latency,
            provider_meta={"word": word, "prompt_id": prompt_id},
        )


class HttpChatProvider:
    """Chat-completions-style HTTP provider.

    POSTs {model, messages, temperature, max_tokens} to the configured
    endpoint with a bearer token read from the environment (the key is
    never logged). Any compatible endpoint works.
    """

    def __init__(
        self,
        url: str,
        api_key_env: str = API_KEY_ENV,
        timeout: float = 30.0,
        transport: httpx.AsyncBaseTransport | None = None,
    ):
        self.url = url
        self.api_key_env = api_key_env
        self._client = httpx.AsyncClient(timeout=timeout, transport=transport)

    async def aclose(self) -> None:
        await self._client.aclose()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    async def complete(self, request: ProviderRequest) -> ProviderResponse:
        messages = []
        if request.system_message:
            messages.append({"role": "system", "content": request.system_message})
        messages.append({"role": "user", "content": request.user_message})
        payload = {
            "model": request.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        started = time.perf_counter()
        try:
            resp = await self._client.post(self.url, json=payload, headers=self._headers())
        except httpx.TimeoutException as e:
            raise ProviderTimeout(f"request timed out: {e}") from e
        except httpx.TransportError as e:
            raise TransientProviderError(f"transport failure: {e}") from e
        latency = time.perf_counter() - started

        if resp.status_code in (401, 403):
            raise ProviderAuthError(f"authentication rejected (HTTP {resp.status_code})")
        if resp.status_code == 429:
            raise RateLimitExceeded("provider throttled the request (HTTP 429)")
        if resp.status_code >= 500:
            raise TransientProviderError(f"server error (HTTP {resp.status_code})")
        if resp.status_code >= 400:
            raise FatalProviderError(f"request rejected (HTTP {resp.status_code}): {resp.text[:200]}")

        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as e:
            raise FatalProviderError(f"malformed provider response: {e}") from e
        if not isinstance(text, str):
            raise FatalProviderError("provider returned non-string content")
        return ProviderResponse(
            text=text,
            latency=latency,
            provider_meta={"status": str(resp.status_code)},
        )
