"""Provider configuration, completions, errors and call pacing."""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable, Optional, Protocol, Sequence

if TYPE_CHECKING:
    from ..questions import Question
    from ..rag import RetrievalHit
    from .cost import PricingModel

DEFAULT_TEMPERATURE = 0.1
DEFAULT_MAX_OUTPUT_TOKENS = 1500


class LlmError(Exception):
    """Base class for gateway failures."""


class AuthError(LlmError):
    pass


class RateLimited(LlmError):
    pass


class Timeout(LlmError):
    pass


class MalformedResponse(LlmError):
    pass


class UnknownProvider(LlmError, KeyError):
    def __str__(self) -> str:  # KeyError would repr() the message
        return str(self.args[0]) if self.args else ""


def count_tokens_approx(text: str) -> int:
    """Rough token count: one token per four characters, rounded up."""
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class RetryPolicy:
    """``retries`` extra attempts after the first, with exponential backoff."""

    retries: int = 2
    backoff_s: float = 1.0
    backoff_factor: float = 2.0

    def __post_init__(self) -> None:
        if self.retries < 0:
            raise ValueError("retries must be >= 0")

    @property
    def max_attempts(self) -> int:
        return self.retries + 1

    def delay(self, attempt: int) -> float:
        """Pause after failed attempt number ``attempt`` (1-based)."""
        return self.backoff_s * self.backoff_factor ** (attempt - 1)


@dataclass(frozen=True)
class ProviderConfig:
    provider_id: str
    wire: str
    endpoint: str = ""
    model_name: str = ""
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    auth_env: Optional[str] = None
    timeout_s: float = 120.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    min_interval_s: float = 0.0
    max_in_flight: int = 4
    pricing: Optional["PricingModel"] = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")

    def describe(self) -> dict[str, Any]:
        out = {
            "provider_id": self.provider_id,
            "wire": self.wire,
            "endpoint": self.endpoint,
            "model_name": self.model_name,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "auth_env": self.auth_env,
        }
        if self.pricing is not None:
            out["pricing"] = {"in": str(self.pricing.price_in), "out": str(self.pricing.price_out)}
        return out


@dataclass(frozen=True)
class Completion:
    text: str
    input_tokens: int
    output_tokens: int
    latency_ms: float
    provider_id: str

    def __post_init__(self) -> None:
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")


class Provider(Protocol):
    config: ProviderConfig

    @property
    def deterministic(self) -> bool: ...

    def complete(
        self,
        prompt: str,
        *,
        question: Optional["Question"] = None,
        hits: Optional[Sequence["RetrievalHit"]] = None,
        raw_events: Optional[Sequence[Any]] = None,
    ) -> Completion: ...


class Pacer:
    """Enforces a minimum spacing between call starts and an in-flight cap."""

    def __init__(
        self,
        min_interval_s: float = 0.0,
        max_in_flight: int = 1,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.min_interval_s = min_interval_s
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._lock = threading.Lock()
        self._clock = clock
        self._sleep = sleep
        self._last_start: Optional[float] = None

    def __enter__(self) -> "Pacer":
        self._slots.acquire()
        with self._lock:
            now = self._clock()
            if self._last_start is not None:
                wait = self._last_start + self.min_interval_s - now
                if wait > 0:
                    self._sleep(wait)
                    now = max(self._clock(), self._last_start + self.min_interval_s)
            self._last_start = now
        return self

    def __exit__(self, *exc) -> None:
        self._slots.release()
