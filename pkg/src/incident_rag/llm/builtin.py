"""Offline providers: an echo double and the rule-based oracle."""

from __future__ import annotations

import time
from typing import Any, Optional, Sequence

from ..events import EventStore
from ..query import load_library, run_library
from ..questions import Question
from ..rag import RetrievalHit, chunk_from_aggregation
from .base import Completion, ProviderConfig, count_tokens_approx
from .oracle import NOT_FOUND_TEXT, oracle_complete


def _cap(text: str, max_output_tokens: int) -> str:
    limit = max_output_tokens * 4
    return text if len(text) <= limit else text[:limit]


class _Builtin:
    deterministic = True

    def __init__(self, config: ProviderConfig):
        self.config = config

    def _completion(self, prompt: str, text: str, started: float) -> Completion:
        text = _cap(text, self.config.max_output_tokens)
        return Completion(
            text=text,
            input_tokens=count_tokens_approx(prompt),
            output_tokens=count_tokens_approx(text),
            latency_ms=(time.perf_counter() - started) * 1000.0,
            provider_id=self.config.provider_id,
        )


class EchoProvider(_Builtin):
    """Replies with the last line of the prompt."""

    def complete(self, prompt: str, **_context: Any) -> Completion:
        started = time.perf_counter()
        lines = prompt.splitlines()
        return self._completion(prompt, lines[-1] if lines else "", started)


class OracleProvider(_Builtin):
    """Answers from the retrieved aggregation chunks via :func:`oracle_complete`.

    Given ``raw_events`` instead of hits (the no-retrieval baseline), it runs
    ``library`` over exactly those events and answers from the resulting
    aggregations, so it can only know what the raw prefix contains.
    """

    def __init__(self, config: ProviderConfig, library: Optional[Sequence] = None):
        super().__init__(config)
        self._library = library

    def complete(
        self,
        prompt: str,
        *,
        question: Optional[Question] = None,
        hits: Optional[Sequence] = None,
        raw_events: Optional[Sequence] = None,
    ) -> Completion:
        started = time.perf_counter()
        if question is None:
            text = NOT_FOUND_TEXT
        elif raw_events is not None:
            text = oracle_complete(question, self._hits_from_events(raw_events))
        else:
            text = oracle_complete(question, hits or [])
        return self._completion(prompt, text, started)

    def _hits_from_events(self, events: Sequence) -> list:
        if not events:
            return []
        library = self._library if self._library is not None else load_library("malware")
        store = EventStore.from_events("raw-prefix", events)
        results = run_library(store, library, store.span())
        return [RetrievalHit(chunk_from_aggregation(r), 0.0, i) for i, r in enumerate(results, 1)]
