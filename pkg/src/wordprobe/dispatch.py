"""Concurrent probe dispatch: rate limiting, retries, and the run loop.

run_experiment() fans one task out per pending (word, prompt) pair,
bounded by a token-bucket rate limiter and an in-flight cap. Records
stream to the sink as they complete, so a stopped run resumes exactly
where it left off.
"""

from __future__ import annotations

import asyncio
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import TYPE_CHECKING, Callable, Protocol

from .prompts import (
    DEFAULT_RULES,
    AnswerClass,
    ParseRuleSet,
    PromptTemplate,
    parse_answer,
    render,
)

if TYPE_CHECKING:
    from .store import ExperimentSpec


class ProviderError(Exception):
    """Base class for provider call failures."""


class TransientProviderError(ProviderError):
    """Retryable: timeouts, throttling, 5xx."""


class ProviderTimeout(TransientProviderError):
    pass


class RateLimitExceeded(TransientProviderError):
    pass


class FatalProviderError(ProviderError):
    """Not retryable: bad credentials, unknown model, malformed request."""


class ProviderAuthError(FatalProviderError):
    pass


class ExhaustedRetries(ProviderError):
    """All attempts failed; carries the last transient error."""

    def __init__(self, message: str, last_error: TransientProviderError | None = None):
        super().__init__(message)
        self.last_error = last_error


@dataclass(frozen=True)
class ProviderRequest:
    model: str
    temperature: float
    max_output_tokens: int
    system_message: str | None
    user_message: str

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 1]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")
        if not self.user_message:
            raise ValueError("user_message must be non-empty")


@dataclass(frozen=True)
class ProviderResponse:
    text: str
    latency: float = 0.0
    provider_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.latency < 0:
            raise ValueError("latency must be >= 0")


@dataclass(frozen=True)
class DispatchPolicy:
    max_requests_per_second: float = 20.0
    max_in_flight: int = 8
    max_attempts: int = 3
    backoff_base: float = 0.25
    backoff_factor: float = 2.0

    def __post_init__(self):
        if self.max_requests_per_second <= 0:
            raise ValueError("max_requests_per_second must be positive")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if not 1 <= self.max_attempts <= 10:
            raise ValueError("max_attempts must be in [1, 10]")
        if self.backoff_base < 0:
            raise ValueError("backoff_base must be >= 0")
        if self.backoff_factor < 1:
            raise ValueError("backoff_factor must be >= 1")


@dataclass(frozen=True)
class AnswerRecord:
    experiment_id: str
    word: str
    prompt_id: str
    raw_text: str
    parsed: AnswerClass
    attempts: int
    completed_at: datetime
    latency: float

    def __post_init__(self):
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")


@dataclass
class RunSummary:
    answered: int = 0
    yes: int = 0
    no: int = 0
    unparseable: int = 0
    failed: int = 0
    skipped_existing: int = 0
    remaining: int = 0
    stopped: bool = False


class Provider(Protocol):
    async def complete(self, request: ProviderRequest) -> ProviderResponse: ...


class RecordSink(Protocol):
    """What run_experiment needs from the store."""

    def save_record(self, record: AnswerRecord) -> bool: ...
    def pending_pairs(self, experiment_id: str) -> set[tuple[str, str]]: ...
    def get_wordlist(self, wordlist_id: str): ...
    def get_battery(self, battery_id: str) -> list[PromptTemplate]: ...
    def set_state(self, experiment_id: str, state) -> None: ...


class RateLimiter:
    """Token bucket granting at most `rate` permits per second.

    The bucket holds `burst` tokens (default 1: strictly paced grants)
    and starts full, so a single acquire on an idle limiter is
    immediate.
    """

    def __init__(self, rate: float, burst: float = 1.0):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self._rate = float(rate)
        self._capacity = max(1.0, float(burst))
        self._tokens = self._capacity
        self._last = time.monotonic()
        self._lock = asyncio.Lock()

    def _refill(self) -> None:
        now = time.monotonic()
        self._tokens = min(self._capacity, self._tokens + (now - self._last) * self._rate)
        self._last = now

    async def acquire(self) -> None:
        async with self._lock:
            self._refill()
            while self._tokens < 1.0:
                await asyncio.sleep((1.0 - self._tokens) / self._rate)
                self._refill()
            self._tokens -= 1.0


class ControlHandle:
    """Stop/pause switch; safe to signal from any thread."""

    def __init__(self):
        self._stop = threading.Event()
        self._pause = threading.Event()

    def stop(self) -> None:
        self._stop.set()

    def pause(self) -> None:
        self._pause.set()

    def resume(self) -> None:
        self._pause.clear()

    @property
    def stopped(self) -> bool:
        return self._stop.is_set()

    @property
    def paused(self) -> bool:
        return self._pause.is_set()


async def retrying_complete(
    provider: Provider,
    request: ProviderRequest,
    policy: DispatchPolicy,
    limiter: RateLimiter | None = None,
) -> tuple[ProviderResponse, int]:
    """Call the provider, retrying transient failures with backoff.

    Every attempt (including retries) takes a rate-limiter permit when
    a limiter is given. Fatal errors propagate immediately. Returns the
    response and the number of attempts used.
    """
    last: TransientProviderError | None = None
    for attempt in range(1, policy.max_attempts + 1):
        if limiter is not None:
            await limiter.acquire()
        try:
            return await provider.complete(request), attempt
        except TransientProviderError as e:
            last = e
            if attempt < policy.max_attempts:
                delay = policy.backoff_base * policy.backoff_factor ** (attempt - 1)
                await asyncio.sleep(delay)
    raise ExhaustedRetries(
        f"provider still failing after {policy.max_attempts} attempts", last
    )


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


async def run_experiment(
    spec: "ExperimentSpec",
    provider: Provider,
    sink: RecordSink,
    control: ControlHandle | None = None,
    *,
    rules: ParseRuleSet = DEFAULT_RULES,
    clock: Callable[[], datetime] | None = None,
) -> RunSummary:
    """Probe every pending (word, prompt) pair of an experiment.

    Pairs already stored are skipped (resumability); each completed
    probe is persisted exactly once. A stop via the control handle lets
    in-flight calls finish, leaves the rest pending, and returns a
    partial summary.
    """
    control = control or ControlHandle()
    now = clock or _utcnow
    wordlist = sink.get_wordlist(spec.wordlist_id)
    battery = sink.get_battery(spec.battery_id)
    templates = {t.id: t for t in battery}
    policy = spec.dispatch

    pending = sorted(sink.pending_pairs(spec.id))
    total_pairs = len(wordlist.words) * len(battery)
    summary = RunSummary(skipped_existing=total_pairs - len(pending))
    if not pending:
        return summary

    from .store import ExperimentState  # here to avoid an import cycle

    sink.set_state(spec.id, ExperimentState.RUNNING)
    limiter = RateLimiter(policy.max_requests_per_second)
    in_flight = asyncio.Semaphore(policy.max_in_flight)
    fatal: list[FatalProviderError] = []

    async def probe(word: str, prompt_id: str) -> None:
        async with in_flight:
            while control.paused and not control.stopped:
                await asyncio.sleep(0.02)
            if control.stopped or fatal:
                return
            request = ProviderRequest(
                model=spec.model,
                temperature=spec.temperature,
                max_output_tokens=spec.max_output_tokens,
                system_message=spec.system_message,
                user_message=render(templates[prompt_id], word),
            )
            try:
                response, attempts = await retrying_complete(provider, request, policy, limiter)
            except ExhaustedRetries:
                summary.failed += 1
                return
            except FatalProviderError as e:
                fatal.append(e)
                control.stop()
                return
            parsed = parse_answer(response.text, rules)
            if parsed is AnswerClass.UNPARSEABLE and attempts < policy.max_attempts:
                # one automatic re-ask, sharing the same attempt budget
                try:
                    await limiter.acquire()
                    retry_response = await provider.complete(request)
                    attempts += 1
                    retry_parsed = parse_answer(retry_response.text, rules)
                    if retry_parsed is not AnswerClass.UNPARSEABLE:
                        response, parsed = retry_response, retry_parsed
                except TransientProviderError:
                    attempts += 1
                except FatalProviderError as e:
                    fatal.append(e)
                    control.stop()
            record = AnswerRecord(
                experiment_id=spec.id,
                word=word,
                prompt_id=prompt_id,
                raw_text=response.text,
                parsed=parsed,
                attempts=attempts,
                completed_at=now(),
                latency=response.latency,
            )
            if sink.save_record(record):
                summary.answered += 1
                if parsed is AnswerClass.YES:
                    summary.yes += 1
                elif parsed is AnswerClass.NO:
                    summary.no += 1
                else:
                    summary.unparseable += 1

    await asyncio.gather(*(probe(w, p) for w, p in pending))

    if fatal:
        sink.set_state(spec.id, ExperimentState.STOPPED)
        raise fatal[0]

    remaining = sink.pending_pairs(spec.id)
    summary.remaining = len(remaining)
    summary.stopped = control.stopped
    if remaining:
        sink.set_state(spec.id, ExperimentState.STOPPED)
    else:
        sink.set_state(spec.id, ExperimentState.COMPLETE)
    return summary
