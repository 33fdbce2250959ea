"""Windowed attack reconstruction and remediation advice."""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

from ..events import EventStore, TimeWindow, format_timestamp
from ..llm import Completion
from ..query import IocQuery, run_library
from ..questions import TIMELINE_QUESTION, Question
from ..rag import EmbeddingProvider, HashingEmbedder, RetrievalHit, build_index, chunk_from_aggregation, retrieve_text
from .context import NetworkContext
from .incident import ask_provider
from .prompt import build_prompt

DEFENSE_CODES = ("RC", "RK", "RD", "DU", "RP")
DEFENSE_NAMES = {
    "RC": "Revoke certificate",
    "RK": "Reset KRBTGT",
    "RD": "Restart domain controller",
    "DU": "Disable user",
    "RP": "Reset password",
}

# code -> groups of alternatives; a line maps to the code when every group matches
DEFENSE_KEYWORDS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("RK", (r"\bkrbtgt\b", r"\b(?:reset|rotate|rotating|resetting)\b")),
    ("RC", (r"\brevok\w*", r"\bcert\w*")),
    ("RD", (r"\b(?:restart|reboot)\w*", r"\b(?:domain controllers?|dcs?)\b")),
    ("DU", (r"\b(?:disable|disabling|deactivate|lock)\w*", r"\b(?:user|users|accounts?)\b")),
    ("RP", (r"\b(?:reset|resetting|change|rotate)\w*", r"\bpasswords?\b")),
)

_SOURCE = re.compile(r"\((?:sources?|evidence):\s*([^)]*)\)", re.IGNORECASE)
_MITRE = re.compile(r"\bT\d{4}(?:\.\d{3})?\b")
_LIST_MARKER = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s+")
_HEADING = re.compile(r"^\s*(?:#+\s*)?\**\s*([A-Za-z][A-Za-z /&'()-]*?)\s*\**\s*:\s*\**\s*$")
_MARKER = re.compile(r"^\s*FINAL\s+ANSWER\s*[=:]", re.IGNORECASE)
_CODE_LIST = re.compile(r"\b(RC|RK|RD|DU|RP)\b")


@dataclass(frozen=True)
class AttackStep:
    text: str
    mitre_technique: str
    evidence: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.evidence:
            raise ValueError("an attack step needs at least one evidence label")


@dataclass(frozen=True)
class DefenseAction:
    code: str
    text: str


@dataclass
class WindowReport:
    window: TimeWindow
    attack_steps: list[AttackStep]
    defense_recommendations: list[DefenseAction]
    raw_response: str
    chunk_count: int = 0
    completion: Optional[Completion] = None
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def defense_codes(self) -> list[str]:
        return [d.code for d in self.defense_recommendations]

    def to_dict(self) -> dict[str, Any]:
        return {
            "window": {"start": format_timestamp(self.window.start), "end": format_timestamp(self.window.end)},
            "attack_steps": [
                {"text": s.text, "mitre_technique": s.mitre_technique, "evidence": list(s.evidence)}
                for s in self.attack_steps
            ],
            "defense_recommendations": [{"code": d.code, "text": d.text} for d in self.defense_recommendations],
            "chunk_count": self.chunk_count,
            "raw_response": self.raw_response,
            "metadata": self.metadata,
        }


def _sections(text: str) -> list[tuple[str, list[str]]]:
    """Split into (heading, lines); text before any heading has heading ''."""
    out: list[tuple[str, list[str]]] = [("", [])]
    for line in text.splitlines():
        match = _HEADING.match(line)
        if match and not _LIST_MARKER.match(line):
            out.append((match.group(1).lower(), []))
        else:
            out[-1][1].append(line)
    return out


def _is_step_heading(heading: str) -> bool:
    return any(word in heading for word in ("step", "timeline", "attacker action", "attack chain", "actions"))


def _is_defense_heading(heading: str) -> bool:
    return any(word in heading for word in ("defen", "recommend", "remediat", "mitigat", "countermeasure"))


def _content_lines(lines: Sequence[str]) -> list[str]:
    out = []
    for line in lines:
        if not line.strip() or _MARKER.match(line):
            continue
        out.append(_LIST_MARKER.sub("", line).strip())
    return out


def _step_lines(text: str) -> list[str]:
    sections = _sections(text)
    chosen = [lines for heading, lines in sections if heading and _is_step_heading(heading)]
    if chosen:
        return [line for lines in chosen for line in _content_lines(lines)]
    if any(heading for heading, _ in sections):
        # headed response without a steps section: take the untitled preamble
        return _content_lines(sections[0][1])
    lines = _content_lines(text.splitlines())
    return [line for line in lines if not any(code for code, _ in _codes_in(line))]


def _codes_in(line: str) -> list[tuple[str, str]]:
    lowered = line.lower()
    found = []
    for code, groups in DEFENSE_KEYWORDS:
        if all(re.search(group, lowered) for group in groups):
            found.append((code, line))
    codes = [c for c, _ in found]
    if "RK" in codes and "RP" in codes:
        found = [(c, l) for c, l in found if c != "RP"]
    return found


def parse_defenses(text: str) -> list[DefenseAction]:
    """Canonical defense actions, first mention of each code wins."""
    sections = _sections(text)
    chosen = [lines for heading, lines in sections if heading and _is_defense_heading(heading)]
    lines = [line for lines in chosen for line in _content_lines(lines)] if chosen else _content_lines(text.splitlines())
    actions: dict[str, DefenseAction] = {}
    for line in lines:
        for code, source in _codes_in(line):
            actions.setdefault(code, DefenseAction(code, source))
    for line in text.splitlines():
        if _MARKER.match(line):
            for code in _CODE_LIST.findall(line.split("=", 1)[-1].split(":", 1)[-1]):
                actions.setdefault(code, DefenseAction(code, DEFENSE_NAMES[code]))
    return list(actions.values())


def _evidence_for(line: str, hits: Sequence[RetrievalHit]) -> tuple[str, ...]:
    labels = [h.chunk.source_label for h in hits]
    cited: list[str] = []
    for group in _SOURCE.findall(line):
        cited += [part.strip() for part in group.split(",") if part.strip() in labels]
    if not cited:
        cited = [label for label in labels if label in line or label.removesuffix("_result.json") in line]
    if not cited:
        mitre = set(_MITRE.findall(line))
        cited = [h.chunk.source_label for h in hits if h.chunk.mitre_technique and h.chunk.mitre_technique in mitre]
    if not cited:
        cited = labels
    return tuple(dict.fromkeys(cited))


def parse_steps(text: str, hits: Sequence[RetrievalHit]) -> list[AttackStep]:
    if not hits:
        return []
    by_label = {h.chunk.source_label: h.chunk for h in hits}
    steps = []
    for line in _step_lines(text):
        if line.lower().startswith("not found in provided data"):
            continue
        evidence = _evidence_for(line, hits)
        mitre = _MITRE.search(line)
        technique = mitre.group(0) if mitre else by_label[evidence[0]].mitre_technique
        steps.append(AttackStep(_SOURCE.sub("", line).strip(), technique, evidence))
    return steps


def analyze_window(
    store: EventStore,
    library: Sequence[IocQuery],
    window: TimeWindow,
    ctx: Optional[NetworkContext],
    provider,
    *,
    question: Question = TIMELINE_QUESTION,
    embedder: Optional[EmbeddingProvider] = None,
) -> WindowReport:
    """Reconstruct the attack steps inside ``window`` and map advice to codes.

    Every chunk with at least one match is handed to the provider. A window
    where no query matches is reported empty without calling it.
    """
    started = time.perf_counter()
    results = [r for r in run_library(store, library, window) if r.matched_count > 0]
    chunks = [chunk_from_aggregation(r) for r in results]
    if not chunks:
        return WindowReport(window, [], [], "", 0, None, {"timing": {"total_s": 0.0}})
    embedder = embedder or HashingEmbedder()
    index = build_index(chunks, embedder)
    hits = retrieve_text(index, embedder, question.text, len(chunks))
    prompt = build_prompt(question, ctx, hits)
    completion = ask_provider(provider, prompt, question.question_id, question=question, hits=hits)
    report = WindowReport(
        window=window,
        attack_steps=parse_steps(completion.text, hits),
        defense_recommendations=parse_defenses(completion.text),
        raw_response=completion.text,
        chunk_count=len(chunks),
        completion=completion,
    )
    report.metadata = {
        "provider_id": provider.config.provider_id,
        "input_tokens": completion.input_tokens,
        "output_tokens": completion.output_tokens,
        "timing": {"total_s": round(time.perf_counter() - started, 6)},
    }
    return report
