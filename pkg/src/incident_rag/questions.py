"""Forensic questions, questionnaires and the typed answers they expect."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

ANSWER_TYPES = ("ip", "hostname", "user", "domain_set", "ip_set", "narrative")
SCALAR_TYPES = frozenset({"ip", "hostname", "user"})
SET_TYPES = frozenset({"domain_set", "ip_set"})


class _NotFound:
    """Sentinel for "the response does not contain an answer"."""

    _instance = None

    def __new__(cls) -> "_NotFound":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NotFound"

    def __bool__(self) -> bool:
        return False

    def __reduce__(self):
        return (_NotFound, ())


NOT_FOUND = _NotFound()

Answer = Union[str, frozenset, _NotFound]


@dataclass(frozen=True)
class Question:
    question_id: str
    text: str
    answer_type: str

    def __post_init__(self) -> None:
        if self.answer_type not in ANSWER_TYPES:
            raise ValueError(f"unknown answer type {self.answer_type!r}")

    @property
    def is_set(self) -> bool:
        return self.answer_type in SET_TYPES


@dataclass(frozen=True)
class Questionnaire:
    scenario_id: str
    questions: tuple[Question, ...]

    def __post_init__(self) -> None:
        if not self.questions:
            raise ValueError("a questionnaire needs at least one question")
        ids = [q.question_id for q in self.questions]
        if len(ids) != len(set(ids)):
            raise ValueError("question ids must be unique")

    def __len__(self) -> int:
        return len(self.questions)

    def __iter__(self):
        return iter(self.questions)


MALWARE_QUESTIONS = (
    Question("Q1", "What is the IP address of the potentially infected internal host in the LAN?", "ip"),
    Question("Q2", "What is the hostname of the potentially infected machine in the LAN?", "hostname"),
    Question("Q3", "What is the Windows user account name of the potentially infected machine in the LAN?", "user"),
    Question("Q4", "What are the likely fake or suspicious domains / URLs for initial infection?", "domain_set"),
    Question(
        "Q5",
        "What are the suspicious external IP addresses contacted, "
        "which might be involved in command-and-control (C2) communication?",
        "ip_set",
    ),
)

TIMELINE_QUESTION = Question(
    "timeline",
    "What did the attacker do during the attack timeline? "
    "What defenses should be implemented to counter the attacker's actions?",
    "narrative",
)
