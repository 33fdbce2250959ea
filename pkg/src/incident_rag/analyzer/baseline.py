"""No-retrieval baseline: as many raw events as fit in the context budget."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

from ..events import EventStore, LogEvent
from ..llm import count_tokens_approx
from ..questions import Questionnaire
from .context import NetworkContext
from .extract import extract_final_answer
from .incident import Finding, IncidentReport, ask_provider, summarize, usage_metadata
from .prompt import fill_template

# Calibrated so that 160 of the 3,694 malware fixture events (4.33%) fit.
DEFAULT_TOKEN_BUDGET = 7000


class BudgetTooSmall(ValueError):
    """Not even the first event fits in the token budget."""


@dataclass(frozen=True)
class NoRagContext:
    text: str
    events: tuple[LogEvent, ...]
    tokens: int
    total_events: int

    @property
    def events_included(self) -> int:
        return len(self.events)

    @property
    def percentage(self) -> float:
        return 100.0 * len(self.events) / self.total_events if self.total_events else 0.0


def build_no_rag_context(store: EventStore, token_budget: int = DEFAULT_TOKEN_BUDGET) -> NoRagContext:
    """Chronological prefix of raw messages whose token total stays within budget."""
    if token_budget <= 0:
        raise ValueError("token budget must be positive")
    used = 0
    taken: list[LogEvent] = []
    for event in store.events:
        cost = count_tokens_approx(event.message)
        if used + cost > token_budget:
            break
        used += cost
        taken.append(event)
    if not taken:
        raise BudgetTooSmall(f"token budget {token_budget} is smaller than the first event")
    text = "\n".join(e.message for e in taken)
    return NoRagContext(text, tuple(taken), used, len(store))


def analyze_no_rag(
    store: EventStore,
    questionnaire: Questionnaire,
    ctx: Optional[NetworkContext],
    provider,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> IncidentReport:
    started = time.perf_counter()
    raw = build_no_rag_context(store, token_budget)
    findings = []
    for question in questionnaire.questions:
        prompt = fill_template(question.text, ctx, raw.text)
        completion = ask_provider(provider, prompt, question.question_id, question=question, raw_events=raw.events)
        findings.append(
            Finding(
                question=question,
                response_text=completion.text,
                extracted_answer=extract_final_answer(completion.text, question.answer_type),
                sources=(),
                completion=completion,
            )
        )
    summary, summary_completion = summarize(provider, questionnaire.scenario_id, findings)
    completions = [f.completion for f in findings] + ([summary_completion] if summary_completion else [])
    metadata = {
        "mode": "no-rag",
        "provider_id": provider.config.provider_id,
        "k": None,
        "chunk_count": 0,
        "token_budget": token_budget,
        "events_included": raw.events_included,
        "events_total": raw.total_events,
        "events_percentage": round(raw.percentage, 2),
        "context_tokens": raw.tokens,
        "timing": {"total_s": round(time.perf_counter() - started, 6)},
        **usage_metadata(provider, completions),
    }
    return IncidentReport(questionnaire.scenario_id, findings, summary, metadata)
