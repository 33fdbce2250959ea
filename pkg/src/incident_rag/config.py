"""Scenario files and run settings.

Settings resolve in order: command-line flag, then an ``INCIDENT_RAG_*``
environment variable, then the scenario file, then the built-in default.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence, Union

import yaml

from .analyzer import DEFAULT_TOKEN_BUDGET, NetworkContext
from .query import IocQuery, load_library
from .questions import MALWARE_QUESTIONS, TIMELINE_QUESTION, Question, Questionnaire
from .rag import DEFAULT_K

ENV_PREFIX = "INCIDENT_RAG_"

DEFAULTS: dict[str, Any] = {
    "provider": "oracle",
    "k": DEFAULT_K,
    "seed": 0,
    "token_budget": DEFAULT_TOKEN_BUDGET,
    "parallel": 1,
    "window_minutes": 5,
    "registry": None,
}
_CASTS: dict[str, Callable[[Any], Any]] = {
    "provider": str,
    "k": int,
    "seed": int,
    "token_budget": int,
    "parallel": int,
    "window_minutes": int,
    "registry": str,
}


class ConfigError(ValueError):
    pass


def resolve_setting(
    name: str,
    flag: Any,
    scenario_doc: Mapping[str, Any],
    environ: Optional[Mapping[str, str]] = None,
) -> Any:
    environ = os.environ if environ is None else environ
    cast = _CASTS[name]
    if flag is not None:
        return cast(flag)
    env_value = environ.get(ENV_PREFIX + name.upper())
    if env_value not in (None, ""):
        try:
            return cast(env_value)
        except ValueError as exc:
            raise ConfigError(f"{ENV_PREFIX}{name.upper()}={env_value!r} is not a valid {name}") from exc
    if scenario_doc.get(name) is not None:
        return cast(scenario_doc[name])
    return DEFAULTS[name]


@dataclass(frozen=True)
class Scenario:
    path: Path
    doc: Mapping[str, Any]

    @property
    def base_dir(self) -> Path:
        return self.path.parent

    @property
    def scenario_id(self) -> str:
        return str(self.doc.get("scenario_id") or self.path.parent.name)

    @property
    def kind(self) -> str:
        return str(self.doc.get("kind", "incident"))

    def _path(self, key: str) -> Optional[Path]:
        value = self.doc.get(key)
        if not value:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def events_path(self) -> Path:
        path = self._path("events")
        if path is None:
            raise ConfigError(f"{self.path}: scenario does not name an events file")
        return path

    @property
    def references_path(self) -> Optional[Path]:
        return self._path("references")

    @property
    def window_references_path(self) -> Optional[Path]:
        return self._path("window_references")

    def library(self) -> list[IocQuery]:
        spec = str(self.doc.get("library", "malware"))
        only = self.doc.get("queries")
        if spec not in ("malware", "ad"):
            path = Path(spec)
            spec = str(path if path.is_absolute() else self.base_dir / path)
        return load_library(spec, only=only)

    def network(self) -> Optional[NetworkContext]:
        doc = self.doc.get("network")
        return NetworkContext.from_dict(doc) if doc else None

    def questionnaire(self) -> Questionnaire:
        entries = self.doc.get("questions")
        if entries:
            questions = tuple(Question(str(q["id"]), str(q["text"]), str(q["answer_type"])) for q in entries)
        elif self.kind == "ad-redteam":
            questions = (TIMELINE_QUESTION,)
        else:
            questions = MALWARE_QUESTIONS
        return Questionnaire(self.scenario_id, questions)

    def setting(self, name: str, flag: Any = None, environ: Optional[Mapping[str, str]] = None) -> Any:
        return resolve_setting(name, flag, self.doc, environ)


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    if path.is_dir():
        path = path / "scenario.yaml"
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: scenario file must be a mapping")
    return Scenario(path, doc)


def parse_int_list(text: str) -> Sequence[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"not a comma-separated list of integers: {text!r}") from exc
    if not values:
        raise ConfigError("empty list")
    return values
