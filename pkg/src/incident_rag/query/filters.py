"""Boolean filter expressions over :class:`~incident_rag.events.LogEvent`."""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Optional, Union

from ..events import LogEvent, ipv4_to_int, is_ipv4


def scalar_text(value: Any) -> str:
    """String form used for term comparison, wildcards and bucket keys."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def _as_number(value: Any) -> Optional[float]:
    if isinstance(value, bool) or value is None:
        return None
    if isinstance(value, (int, float)):
        return float(value)
    try:
        return float(str(value))
    except ValueError:
        return None


@dataclass(frozen=True)
class Term:
    field: str
    value: Any


@dataclass(frozen=True)
class Terms:
    field: str
    values: tuple


@dataclass(frozen=True)
class RangeNum:
    field: str
    gte: Optional[float] = None
    lte: Optional[float] = None


@dataclass(frozen=True)
class RangeIp:
    field: str
    gte: str
    lte: str

    def __post_init__(self) -> None:
        if ipv4_to_int(self.gte) > ipv4_to_int(self.lte):
            raise ValueError(f"IP range bounds out of order: {self.gte} > {self.lte}")


@dataclass(frozen=True)
class Wildcard:
    field: str
    pattern: str


@dataclass(frozen=True)
class Bool:
    must: tuple = ()
    should: tuple = ()
    must_not: tuple = ()


FilterExpr = Union[Term, Terms, RangeNum, RangeIp, Wildcard, Bool]

MATCH_ALL = Bool()


@lru_cache(maxsize=1024)
def _wildcard_regex(pattern: str) -> re.Pattern:
    parts = []
    for ch in pattern:
        if ch == "*":
            parts.append(".*")
        elif ch == "?":
            parts.append(".")
        else:
            parts.append(re.escape(ch))
    return re.compile("".join(parts), re.DOTALL)


def eval_filter(expr: FilterExpr, event: LogEvent) -> bool:
    """Evaluate ``expr`` against ``event``.

    An absent field never matches a leaf clause, so it matches under
    ``must_not``. ``should`` follows search-engine semantics: at least one
    clause must match when the bool has no ``must`` clauses, otherwise the
    ``should`` clauses are optional.
    """
    if isinstance(expr, Bool):
        if not all(eval_filter(e, event) for e in expr.must):
            return False
        if any(eval_filter(e, event) for e in expr.must_not):
            return False
        if expr.should and not expr.must:
            return any(eval_filter(e, event) for e in expr.should)
        return True

    value = event.get(expr.field)
    if value is None:
        return False
    if isinstance(expr, Term):
        return scalar_text(value) == scalar_text(expr.value)
    if isinstance(expr, Terms):
        text = scalar_text(value)
        return any(text == scalar_text(v) for v in expr.values)
    if isinstance(expr, RangeNum):
        number = _as_number(value)
        if number is None:
            return False
        if expr.gte is not None and number < expr.gte:
            return False
        if expr.lte is not None and number > expr.lte:
            return False
        return True
    if isinstance(expr, RangeIp):
        if not is_ipv4(value):
            return False
        return ipv4_to_int(expr.gte) <= ipv4_to_int(value) <= ipv4_to_int(expr.lte)
    if isinstance(expr, Wildcard):
        return _wildcard_regex(expr.pattern).fullmatch(scalar_text(value)) is not None
    raise TypeError(f"unknown filter expression {expr!r}")


def filter_from_dict(doc: dict) -> FilterExpr:
    """Build a filter from its search-DSL dictionary form."""
    if not isinstance(doc, dict) or len(doc) != 1:
        raise ValueError(f"filter clause must be a single-key object: {doc!r}")
    (kind, body), = doc.items()
    if kind == "bool":
        unknown = set(body) - {"must", "should", "must_not"}
        if unknown:
            raise ValueError(f"unsupported bool keys: {sorted(unknown)}")
        return Bool(
            must=tuple(filter_from_dict(d) for d in _as_list(body.get("must", []))),
            should=tuple(filter_from_dict(d) for d in _as_list(body.get("should", []))),
            must_not=tuple(filter_from_dict(d) for d in _as_list(body.get("must_not", []))),
        )
    if not isinstance(body, dict) or len(body) != 1:
        raise ValueError(f"{kind} clause must address exactly one field: {body!r}")
    (field, arg), = body.items()
    if kind == "term":
        if isinstance(arg, dict):
            arg = arg["value"]
        return Term(field, arg)
    if kind == "terms":
        return Terms(field, tuple(arg))
    if kind == "wildcard":
        if isinstance(arg, dict):
            arg = arg["value"]
        return Wildcard(field, arg)
    if kind == "range":
        gte, lte = arg.get("gte"), arg.get("lte")
        if isinstance(gte, str) and isinstance(lte, str) and is_ipv4(gte) and is_ipv4(lte):
            return RangeIp(field, gte, lte)
        return RangeNum(field, gte, lte)
    raise ValueError(f"unsupported filter clause {kind!r}")


def _as_list(value: Any) -> list:
    return value if isinstance(value, list) else [value]


def _num(value: Optional[float]) -> Any:
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def filter_to_dict(expr: FilterExpr) -> dict:
    if isinstance(expr, Bool):
        body: dict[str, list] = {}
        for key in ("must", "should", "must_not"):
            clauses = getattr(expr, key)
            if clauses:
                body[key] = [filter_to_dict(c) for c in clauses]
        return {"bool": body}
    if isinstance(expr, Term):
        return {"term": {expr.field: expr.value}}
    if isinstance(expr, Terms):
        return {"terms": {expr.field: list(expr.values)}}
    if isinstance(expr, Wildcard):
        return {"wildcard": {expr.field: expr.pattern}}
    if isinstance(expr, RangeIp):
        return {"range": {expr.field: {"gte": expr.gte, "lte": expr.lte}}}
    if isinstance(expr, RangeNum):
        bounds = {}
        if expr.gte is not None:
            bounds["gte"] = _num(expr.gte)
        if expr.lte is not None:
            bounds["lte"] = _num(expr.lte)
        return {"range": {expr.field: bounds}}
    raise TypeError(f"unknown filter expression {expr!r}")
