"""Forensic question answering over retrieved aggregation chunks."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Sequence

from ..events import EventStore, TimeWindow
from ..llm import Completion, cost_of_usage, format_money
from ..query import IocQuery, run_library
from ..questions import NOT_FOUND, Answer, Question, Questionnaire
from ..rag import (
    DEFAULT_K,
    EmbeddingProvider,
    HashingEmbedder,
    RagIndex,
    RetrievalHit,
    build_index,
    chunk_from_aggregation,
    retrieve_text,
)
from .context import NetworkContext
from .extract import extract_final_answer
from .prompt import build_prompt

SUMMARY_PROMPT = (
    "You are a cybersecurity analyst. Summarize the incident below in a short paragraph for an "
    "incident report, using only the findings listed.\n\nFindings:\n\n{findings}\n\nSummary:\n"
)


@dataclass(frozen=True)
class Finding:
    question: Question
    response_text: str
    extracted_answer: Answer
    sources: tuple[str, ...]
    completion: Completion
    retrieved: tuple[str, ...] = ()

    def answer_display(self) -> str:
        return format_answer(self.extracted_answer)

    def to_dict(self) -> dict[str, Any]:
        return {
            "question_id": self.question.question_id,
            "question": self.question.text,
            "answer_type": self.question.answer_type,
            "answer": answer_to_json(self.extracted_answer),
            "sources": list(self.sources),
            "retrieved": list(self.retrieved),
            "response": self.response_text,
            "input_tokens": self.completion.input_tokens,
            "output_tokens": self.completion.output_tokens,
        }


@dataclass
class IncidentReport:
    scenario_id: str
    findings: list[Finding]
    summary: str
    metadata: dict[str, Any] = field(default_factory=dict)

    def finding(self, question_id: str) -> Finding:
        for f in self.findings:
            if f.question.question_id == question_id:
                return f
        raise KeyError(question_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario_id": self.scenario_id,
            "findings": [f.to_dict() for f in self.findings],
            "summary": self.summary,
            "metadata": self.metadata,
        }

    def render_text(self) -> str:
        meta = self.metadata
        lines = [
            f"Incident report: {self.scenario_id}",
            f"Provider: {meta.get('provider_id')}  k: {meta.get('k')}  chunks analyzed: {meta.get('chunk_count')}",
            "",
        ]
        for f in self.findings:
            lines.append(f"[{f.question.question_id}] {f.question.text}")
            lines.append(f"  Answer: {f.answer_display()}")
            if f.sources:
                lines.append(f"  Sources: {', '.join(f.sources)}")
        lines += ["", "Summary:", self.summary]
        if meta.get("cost_display") is not None:
            lines.append(f"Estimated cost: ${meta['cost_display']}")
        return "\n".join(lines) + "\n"


def format_answer(answer: Answer) -> str:
    if answer is NOT_FOUND:
        return "Not found"
    if isinstance(answer, frozenset):
        return "[" + ", ".join(sorted(answer)) + "]"
    return str(answer)


def answer_to_json(answer: Answer) -> Any:
    if answer is NOT_FOUND:
        return None
    if isinstance(answer, frozenset):
        return sorted(answer)
    return answer


def cited_sources(text: str, labels: Sequence[str]) -> tuple[str, ...]:
    """Retrieved labels that the response mentions, in retrieval order."""
    return tuple(dict.fromkeys(label for label in labels if label in text))


def template_summary(scenario_id: str, findings: Sequence[Finding]) -> str:
    answered = [f for f in findings if f.extracted_answer is not NOT_FOUND]
    parts = [f"{f.question.question_id} ({f.question.answer_type}): {f.answer_display()}" for f in findings]
    return (
        f"Scenario {scenario_id}: {len(answered)} of {len(findings)} questions answered from the evidence. "
        + "; ".join(parts)
        + "."
    )


def ask_provider(provider, prompt: str, question_id: str, **context: Any) -> Completion:
    try:
        return provider.complete(prompt, **context)
    except Exception as exc:
        exc.question_id = question_id  # type: ignore[attr-defined]
        raise


def summarize(provider, scenario_id: str, findings: Sequence[Finding]) -> tuple[str, Optional[Completion]]:
    """Template summary for deterministic providers, one extra call otherwise."""
    if getattr(provider, "deterministic", False):
        return template_summary(scenario_id, findings), None
    listing = "\n".join(
        f"- {f.question.text} -> {f.answer_display()}" for f in findings
    )
    completion = ask_provider(provider, SUMMARY_PROMPT.format(findings=listing), "summary")
    return completion.text.strip(), completion


def usage_metadata(provider, completions: Sequence[Completion]) -> dict[str, Any]:
    t_in = sum(c.input_tokens for c in completions)
    t_out = sum(c.output_tokens for c in completions)
    pricing = getattr(getattr(provider, "config", None), "pricing", None)
    cost: Optional[Fraction] = cost_of_usage(pricing, t_in, t_out) if pricing is not None else None
    return {
        "llm_calls": len(completions),
        "input_tokens": t_in,
        "output_tokens": t_out,
        "cost": str(cost) if cost is not None else None,
        "cost_display": format_money(cost) if cost is not None else None,
    }


def index_store(
    store: EventStore,
    library: Sequence[IocQuery],
    embedder: EmbeddingProvider,
    window: Optional[TimeWindow] = None,
) -> RagIndex:
    results = run_library(store, library, window or store.span())
    return build_index([chunk_from_aggregation(r) for r in results], embedder)


def analyze_incident(
    store: EventStore,
    library: Sequence[IocQuery],
    questionnaire: Questionnaire,
    ctx: Optional[NetworkContext],
    provider,
    k: int = DEFAULT_K,
    *,
    embedder: Optional[EmbeddingProvider] = None,
    index: Optional[RagIndex] = None,
    workers: int = 1,
) -> IncidentReport:
    """Answer every question from the top-``k`` chunks retrieved for it.

    A prebuilt ``index`` skips extraction. Provider errors propagate with a
    ``question_id`` attribute naming the question that failed.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    embedder = embedder or HashingEmbedder()
    started = time.perf_counter()
    if index is None:
        index = index_store(store, library, embedder)
    indexed = time.perf_counter()

    def answer(question: Question) -> Finding:
        hits: list[RetrievalHit] = retrieve_text(index, embedder, question.text, k)
        prompt = build_prompt(question, ctx, hits)
        completion = ask_provider(provider, prompt, question.question_id, question=question, hits=hits)
        labels = [h.chunk.source_label for h in hits]
        return Finding(
            question=question,
            response_text=completion.text,
            extracted_answer=extract_final_answer(completion.text, question.answer_type),
            sources=cited_sources(completion.text, labels),
            completion=completion,
            retrieved=tuple(labels),
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            findings = list(pool.map(answer, questionnaire.questions))
    else:
        findings = [answer(q) for q in questionnaire.questions]
    summary, summary_completion = summarize(provider, questionnaire.scenario_id, findings)
    finished = time.perf_counter()

    completions = [f.completion for f in findings] + ([summary_completion] if summary_completion else [])
    metadata = {
        "mode": "rag",
        "provider_id": provider.config.provider_id,
        "k": k,
        "chunk_count": len(index),
        "embedder_id": index.embedder_id,
        "timing": {
            "index_s": round(indexed - started, 6),
            "analyze_s": round(finished - indexed, 6),
            "total_s": round(finished - started, 6),
        },
        **usage_metadata(provider, completions),
    }
    return IncidentReport(questionnaire.scenario_id, findings, summary, metadata)
