"""Security analyzer: forensic Q&A, windowed reconstruction, no-RAG baseline."""

from .baseline import DEFAULT_TOKEN_BUDGET, BudgetTooSmall, NoRagContext, analyze_no_rag, build_no_rag_context
from .context import NetworkContext
from .extract import extract_final_answer
from .incident import (
    Finding,
    IncidentReport,
    analyze_incident,
    answer_to_json,
    cited_sources,
    format_answer,
    index_store,
    template_summary,
)
from .prompt import INSTRUCTION_SENTENCE, PROMPT_TEMPLATE, build_prompt, fill_template, render_chunks
from .windows import (
    DEFENSE_CODES,
    DEFENSE_KEYWORDS,
    AttackStep,
    DefenseAction,
    WindowReport,
    analyze_window,
    parse_defenses,
    parse_steps,
)

__all__ = [
    "AttackStep", "BudgetTooSmall", "DEFAULT_TOKEN_BUDGET", "DEFENSE_CODES", "DEFENSE_KEYWORDS",
    "DefenseAction", "Finding", "INSTRUCTION_SENTENCE", "IncidentReport", "NetworkContext", "NoRagContext",
    "PROMPT_TEMPLATE", "WindowReport", "analyze_incident", "analyze_no_rag", "analyze_window",
    "answer_to_json", "build_no_rag_context", "build_prompt", "cited_sources", "extract_final_answer",
    "fill_template", "format_answer", "index_store", "parse_defenses", "parse_steps", "render_chunks",
    "template_summary",
]
