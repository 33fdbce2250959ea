"""Pull a typed answer out of free-form analyst text."""

from __future__ import annotations

import re
from typing import Optional

from ..events import canonical_ipv4, is_ipv4
from ..questions import NOT_FOUND, SET_TYPES, Answer

_MARKER = re.compile(r"FINAL\s+ANSWER\s*[=:]\s*(.*)", re.IGNORECASE)
_IPV4 = re.compile(r"(?<![\d.])(?:\d{1,3}\.){3}\d{1,3}(?![\d.])")
_DOMAIN = re.compile(r"(?<![\w.@-])(?:[a-z0-9](?:[a-z0-9-]{0,61}[a-z0-9])?\.)+[a-z]{2,24}(?![\w-])", re.IGNORECASE)
_IP_LABEL = re.compile(r"\bIP(?:v4)?(?:\s+address)?\s*[:=]\s*((?:\d{1,3}\.){3}\d{1,3})", re.IGNORECASE)
_HOST_LABEL = re.compile(r"\bhost\s*name\s*[:=]\s*\**\s*([A-Za-z0-9][A-Za-z0-9.$_-]*)", re.IGNORECASE)
_USER_LABEL = re.compile(
    r"\b(?:user(?:\s*name)?(?:\s+account)?(?:\s+name)?|account(?:\s+name)?)\s*[:=]\s*\**\s*([^\s,;*]+)",
    re.IGNORECASE,
)
# domain-shaped tokens that are really file names
_FILE_SUFFIXES = frozenset({"json", "exe", "dll", "ps1", "txt", "log", "zip", "py", "bat", "msi", "yaml", "ndjson"})
_QUOTES = "\"'`*"
_NOT_FOUND_PHRASE = "not found in provided data"
_EMPTY_ANSWERS = frozenset({"not found", "none", "n/a", "unknown", "null"})


def _clean(token: str) -> str:
    token = token.strip().strip(_QUOTES).strip()
    return token.rstrip(".;").strip(_QUOTES).strip()


def _marker_value(text: str) -> Optional[str]:
    last = None
    for line in text.splitlines():
        match = _MARKER.search(line)
        if match:
            last = match.group(1)
    return last


def _split_set(value: str) -> frozenset:
    value = _clean(value)
    if value.startswith("[") or value.startswith("{"):
        value = value[1:]
    if value.endswith("]") or value.endswith("}"):
        value = value[:-1]
    items = (_clean(item) for item in re.split(r"[,\n]", value))
    return frozenset(item for item in items if item)


def _scalar(value: str) -> str:
    value = _clean(value).strip("[](){}")
    first = re.split(r"[,\s]", _clean(value), maxsplit=1)[0] if value else ""
    return _clean(first)


def _valid_ips(text: str) -> list[str]:
    return [canonical_ipv4(m) for m in _IPV4.findall(text) if is_ipv4(canonical_ipv4(m))]


def _domains(text: str) -> list[str]:
    out = []
    for match in _DOMAIN.findall(text):
        if match.rsplit(".", 1)[-1].lower() in _FILE_SUFFIXES:
            continue
        out.append(match)
    return out


def _fallback(text: str, answer_type: str) -> Answer:
    if answer_type == "ip":
        labelled = [m for m in _IP_LABEL.findall(text) if is_ipv4(canonical_ipv4(m))]
        ips = labelled or _valid_ips(text)
        return ips[0] if ips else NOT_FOUND
    if answer_type == "ip_set":
        ips = frozenset(_valid_ips(text))
        return ips or NOT_FOUND
    if answer_type == "domain_set":
        domains = frozenset(_domains(text))
        return domains or NOT_FOUND
    if answer_type in ("hostname", "user"):
        pattern = _HOST_LABEL if answer_type == "hostname" else _USER_LABEL
        match = pattern.search(text)
        return _clean(match.group(1)) if match else NOT_FOUND
    stripped = text.strip()
    return stripped or NOT_FOUND


def extract_final_answer(response_text: str, answer_type: str) -> Answer:
    """Typed answer from ``response_text``; :data:`NOT_FOUND` when there is none.

    The last ``FINAL ANSWER =`` line wins. Without one, the answer is
    recovered by pattern: IPv4 addresses, domain-shaped tokens, or labelled
    ``Hostname:`` / ``User account:`` lines.
    """
    value = _marker_value(response_text)
    if value is None:
        if response_text.strip().lower().startswith(_NOT_FOUND_PHRASE):
            return NOT_FOUND
        return _fallback(response_text, answer_type)
    bare = _clean(value).strip("[]{}").strip().lower()
    if not bare or _NOT_FOUND_PHRASE in value.lower() or bare in _EMPTY_ANSWERS:
        return NOT_FOUND
    if answer_type in SET_TYPES:
        return _split_set(value) or NOT_FOUND
    if answer_type == "narrative":
        return _clean(value)
    return _scalar(value) or NOT_FOUND
