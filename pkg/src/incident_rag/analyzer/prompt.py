"""Analyst prompt assembly."""

from __future__ import annotations

from typing import Optional, Sequence

from ..questions import Question
from ..rag import RetrievalHit
from .context import NetworkContext

PROMPT_TEMPLATE = (
    "You are a cybersecurity analyst. Analyze the security data and answer this question:\n"
    "\n"
    "{question}\n"
    "\n"
    'Answer with specific evidence (IPs, timestamps, hostnames) or state "Not found in provided data" '
    "if insufficient.\n"
    "\n"
    "Security Data:\n"
    "\n"
    "{context}\n"
    "\n"
    "Answer:\n"
)

INSTRUCTION_SENTENCE = (
    'Answer with specific evidence (IPs, timestamps, hostnames) or state "Not found in provided data" '
    "if insufficient."
)


def render_chunks(hits: Sequence[RetrievalHit]) -> str:
    """Chunks in rank order, each preceded by its source tag."""
    blocks = [f"[source: {h.chunk.source_label}]\n{h.chunk.text}" for h in sorted(hits, key=lambda h: h.rank)]
    return "\n\n".join(blocks)


def fill_template(question_text: str, ctx: Optional[NetworkContext], evidence: str) -> str:
    parts = []
    if ctx is not None:
        parts.append("Network context:\n" + ctx.render())
    if evidence:
        parts.append(evidence)
    return PROMPT_TEMPLATE.format(question=question_text, context="\n\n".join(parts))


def build_prompt(question: Question, ctx: Optional[NetworkContext], hits: Sequence[RetrievalHit]) -> str:
    return fill_template(question.text, ctx, render_chunks(hits))
