"""Matching functions, per-question scores and scenario summaries."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

from ..events import TimeWindow, canonical_ipv4, is_ipv4
from ..questions import NOT_FOUND, SCALAR_TYPES, SET_TYPES, Answer

EVAL_TYPES = SCALAR_TYPES | SET_TYPES


class TypeMismatch(ValueError):
    pass


class MissingReference(KeyError):
    pass


def normalize_entity(raw: str, answer_type: str) -> str:
    """Canonical form of one entity for comparison under ``answer_type``."""
    value = str(raw).strip()
    if answer_type in ("ip", "ip_set"):
        return canonical_ipv4(value) if is_ipv4(canonical_ipv4(value)) else value.lower()
    if answer_type in ("hostname", "user"):
        value = value.lower()
        for sep in ("/", "@"):
            value = value.split(sep, 1)[0]
        return value.strip()
    if answer_type == "domain_set":
        value = value.lower()
        value = re.sub(r"^[a-z][a-z0-9+.-]*://", "", value)
        value = value.split("/", 1)[0].split("?", 1)[0]
        return value.rstrip(".")
    return value.lower()


def _as_set(answer: Answer, answer_type: str) -> frozenset:
    if answer is NOT_FOUND:
        return frozenset()
    items: Iterable = answer if isinstance(answer, (frozenset, set, list, tuple)) else [answer]
    normalized = (normalize_entity(x, answer_type) for x in items)
    return frozenset(x for x in normalized if x)


@dataclass(frozen=True)
class ReferenceAnswer:
    question_id: str
    answer_type: str
    value: Union[str, frozenset]

    def __post_init__(self) -> None:
        if self.answer_type not in EVAL_TYPES:
            raise ValueError(f"answer type {self.answer_type!r} has no reference matching")
        if self.answer_type in SET_TYPES:
            if isinstance(self.value, str):
                raise ValueError(f"{self.question_id}: set answer types need a set reference")
            value = _as_set(frozenset(self.value), self.answer_type)
        else:
            if not isinstance(self.value, str):
                raise ValueError(f"{self.question_id}: scalar answer types need a single reference value")
            value = normalize_entity(self.value, self.answer_type)
        if not value:
            raise ValueError(f"{self.question_id}: empty reference")
        object.__setattr__(self, "value", value)

    @classmethod
    def from_dict(cls, doc: dict) -> "ReferenceAnswer":
        value = doc["value"]
        return cls(doc["question_id"], doc["answer_type"], frozenset(value) if isinstance(value, list) else value)


@dataclass(frozen=True)
class EvalScore:
    question_id: str
    match_score: float
    precision: Optional[float]
    tp: int
    fp: int
    answered_set_size: int


def match_answer(ref: ReferenceAnswer, answer: Answer, answer_type: Optional[str] = None) -> EvalScore:
    """Recall-oriented score of ``answer`` against ``ref``.

    Scalars score 1 on normalized equality. Sets score ``|R∩A|/|R|`` with
    precision ``|R∩A|/|A|`` (absent when nothing was answered).
    """
    if answer_type is not None and answer_type != ref.answer_type:
        raise TypeMismatch(f"{ref.question_id}: reference is {ref.answer_type}, answer is {answer_type}")
    answered = _as_set(answer, ref.answer_type)
    if ref.answer_type in SCALAR_TYPES:
        if len(answered) > 1:
            raise TypeMismatch(f"{ref.question_id}: scalar question answered with a set")
        hit = int(ref.value in answered)
        score = float(hit)
        return EvalScore(ref.question_id, score, score, hit, len(answered) - hit, len(answered))
    if isinstance(answer, str):
        raise TypeMismatch(f"{ref.question_id}: set question answered with a scalar")
    tp = len(ref.value & answered)
    precision = tp / len(answered) if answered else None
    return EvalScore(ref.question_id, tp / len(ref.value), precision, tp, len(answered) - tp, len(answered))


@dataclass(frozen=True)
class ScenarioSummary:
    scenario_id: str
    provider_id: str
    scores: tuple[EvalScore, ...]

    @property
    def mean_recall(self) -> float:
        return sum(s.match_score for s in self.scores) / len(self.scores) if self.scores else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario_id": self.scenario_id,
            "provider_id": self.provider_id,
            "mean_recall": self.mean_recall,
            "scores": [
                {
                    "question_id": s.question_id,
                    "match_score": s.match_score,
                    "precision": s.precision,
                    "tp": s.tp,
                    "fp": s.fp,
                    "answered_set_size": s.answered_set_size,
                }
                for s in self.scores
            ],
        }

    def render_table(self) -> str:
        ids = [s.question_id for s in self.scores]
        header = ["scenario", "provider", *ids, "mean"]
        row = [self.scenario_id, self.provider_id, *(f"{100 * s.match_score:.0f}" for s in self.scores),
               f"{100 * self.mean_recall:.0f}"]
        widths = [max(len(a), len(b)) for a, b in zip(header, row)]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        return fmt.format(*header).rstrip() + "\n" + fmt.format(*row).rstrip() + "\n"


def score_report(report, refs: Sequence[ReferenceAnswer]) -> ScenarioSummary:
    by_id = {r.question_id: r for r in refs}
    scores = []
    for finding in report.findings:
        qid = finding.question.question_id
        if qid not in by_id:
            raise MissingReference(f"no reference answer for question {qid!r}")
        scores.append(match_answer(by_id[qid], finding.extracted_answer, finding.question.answer_type))
    return ScenarioSummary(report.scenario_id, str(report.metadata.get("provider_id", "")), tuple(scores))


def population_stdev(values: Sequence[float]) -> float:
    """Spread of per-scenario mean recalls across scenarios."""
    if not values:
        raise ValueError("need at least one value")
    mean = sum(values) / len(values)
    return math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))


# --- windows ---------------------------------------------------------------

DEFENSE_CODES = frozenset({"RC", "RK", "RD", "DU", "RP"})
_STEP_TOKEN = re.compile(r"[a-z0-9_$.\-]+")


def step_tokens(text: str) -> frozenset:
    """Lowercased tokens with trailing punctuation dropped."""
    tokens = (t.rstrip(".-") for t in _STEP_TOKEN.findall(text.lower()))
    return frozenset(t for t in tokens if t)


@dataclass(frozen=True)
class WindowReference:
    window: TimeWindow
    reference_steps: tuple[frozenset, ...]
    reference_defenses: frozenset

    def __post_init__(self) -> None:
        unknown = set(self.reference_defenses) - DEFENSE_CODES
        if unknown:
            raise ValueError(f"unknown defense codes: {', '.join(sorted(unknown))}")

    @classmethod
    def from_dict(cls, doc: dict) -> "WindowReference":
        return cls(
            TimeWindow.parse(doc["start"], doc["end"]),
            tuple(frozenset(t.lower() for t in step) for step in doc["steps"]),
            frozenset(doc.get("defenses", [])),
        )


@dataclass(frozen=True)
class WindowScore:
    window: TimeWindow
    reported: int
    reference: int
    tp: int
    step_precision: Optional[float]
    step_recall: Optional[float]
    defense_tp: int
    defense_reported: int
    defense_reference: int
    defense_precision: Optional[float]
    defense_recall: Optional[float]

    @property
    def fp(self) -> int:
        return self.reported - self.tp

    def to_dict(self) -> dict[str, Any]:
        from ..events import format_timestamp

        out = dict(self.__dict__)
        out["window"] = {"start": format_timestamp(self.window.start), "end": format_timestamp(self.window.end)}
        out["fp"] = self.fp
        return out


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def match_steps(reported: Sequence[str], reference: Sequence[frozenset]) -> list[Optional[int]]:
    """For each reference step, the index of the reported step matched to it.

    Greedy in reference order; each reported step is used at most once.
    """
    token_sets = [step_tokens(text) for text in reported]
    used: set[int] = set()
    out: list[Optional[int]] = []
    for required in reference:
        chosen = next((i for i, toks in enumerate(token_sets) if i not in used and required <= toks), None)
        if chosen is not None:
            used.add(chosen)
        out.append(chosen)
    return out


def score_window(report, ref: WindowReference) -> WindowScore:
    reported = [step.text for step in report.attack_steps]
    tp = sum(1 for m in match_steps(reported, ref.reference_steps) if m is not None)
    codes = set(report.defense_codes)
    d_tp = len(codes & ref.reference_defenses)
    return WindowScore(
        window=ref.window,
        reported=len(reported),
        reference=len(ref.reference_steps),
        tp=tp,
        step_precision=_ratio(tp, len(reported)),
        step_recall=_ratio(tp, len(ref.reference_steps)),
        defense_tp=d_tp,
        defense_reported=len(codes),
        defense_reference=len(ref.reference_defenses),
        defense_precision=_ratio(d_tp, len(codes)),
        defense_recall=_ratio(d_tp, len(ref.reference_defenses)),
    )


def render_window_table(scores: Sequence[WindowScore]) -> str:
    def pct(x: Optional[float]) -> str:
        return "-" if x is None else f"{100 * x:.0f}%"

    header = ("window", "|R|", "TP", "FP", "precision", "recall", "defense P", "defense R")
    rows = [
        (
            f"{s.window.start:%H:%M}-{s.window.end:%H:%M}",
            str(s.reference),
            str(s.tp),
            str(s.fp),
            pct(s.step_precision),
            pct(s.step_recall),
            f"{s.defense_tp}/{s.defense_reported}",
            f"{s.defense_tp}/{s.defense_reference}",
        )
        for s in scores
    ]
    widths = [max(len(r[i]) for r in (header, *rows)) for i in range(len(header))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    return "\n".join(fmt.format(*r).rstrip() for r in (header, *rows)) + "\n"


# --- reference files -------------------------------------------------------


def load_references(path: Union[str, Path]) -> list[ReferenceAnswer]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = doc["answers"] if isinstance(doc, dict) else doc
    return [ReferenceAnswer.from_dict(e) for e in entries]


def load_window_references(path: Union[str, Path]) -> list[WindowReference]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = doc["windows"] if isinstance(doc, dict) else doc
    return [WindowReference.from_dict(e) for e in entries]
