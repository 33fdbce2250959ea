"""Terms aggregations over filtered events and the query library runner."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from ..events import EventStore, LogEvent, TimeWindow
from .filters import MATCH_ALL, Bool, FilterExpr, eval_filter, scalar_text


class QueryError(ValueError):
    pass


class BadPattern(QueryError):
    pass


class DuplicateQueryId(QueryError):
    pass


_BACKREF_RE = re.compile(r"\\[1-9]|\(\?P=|\\g<")
_PLACEHOLDER_RE = re.compile(r"\{([^{}]+)\}")


@dataclass(frozen=True)
class Field:
    """Bucket key is the string form of an event field."""

    name: str

    def key_for(self, event: LogEvent) -> Optional[str]:
        value = event.get(self.name)
        return None if value is None else scalar_text(value)


@dataclass(frozen=True)
class Extract:
    """Bucket key is capture group 1 of ``pattern`` applied to ``field``.

    ``template`` optionally composes the key from other fields: ``{match}``
    stands for the captured text and ``{<field name>}`` for a field value.
    A missing field or a failed match yields ``fallback`` (possibly None).
    """

    pattern: str
    field: str = "message"
    fallback: Optional[str] = None
    template: Optional[str] = None

    def __post_init__(self) -> None:
        if _BACKREF_RE.search(self.pattern):
            raise BadPattern(f"backreferences are not supported: {self.pattern!r}")
        try:
            compiled = re.compile(self.pattern)
        except re.error as exc:
            raise BadPattern(f"invalid pattern {self.pattern!r}: {exc}") from exc
        if compiled.groups != 1:
            raise BadPattern(f"pattern must have exactly one capture group: {self.pattern!r}")
        object.__setattr__(self, "_compiled", compiled)

    def key_for(self, event: LogEvent) -> Optional[str]:
        return extract_script_key(self, event)


@dataclass(frozen=True)
class Classify:
    """Bucket key is the label of the first rule whose needle occurs in ``field``."""

    field: str
    rules: tuple[tuple[str, str], ...]
    fallback: Optional[str] = None

    def key_for(self, event: LogEvent) -> Optional[str]:
        value = event.get(self.field)
        if value is None:
            return self.fallback
        text = scalar_text(value)
        for needle, label in self.rules:
            if needle in text:
                return label
        return self.fallback


KeySource = Union[Field, Extract, Classify]


def extract_script_key(spec: Extract, event: LogEvent) -> Optional[str]:
    value = event.get(spec.field)
    if value is None:
        return spec.fallback
    match = spec._compiled.search(scalar_text(value))  # type: ignore[attr-defined]
    if match is None:
        return spec.fallback
    captured = match.group(1)
    if spec.template is None:
        return captured
    parts = []
    pos = 0
    for ph in _PLACEHOLDER_RE.finditer(spec.template):
        parts.append(spec.template[pos:ph.start()])
        name = ph.group(1)
        if name == "match":
            parts.append(captured)
        else:
            field_value = event.get(name)
            if field_value is None:
                return spec.fallback
            parts.append(scalar_text(field_value))
        pos = ph.end()
    parts.append(spec.template[pos:])
    return "".join(parts)


@dataclass(frozen=True)
class AggSpec:
    name: str
    key_source: KeySource
    size: int = 10
    sub_aggs: tuple["AggSpec", ...] = ()
    pre_filter: Optional[FilterExpr] = None
    # name of the enclosing filter aggregation when rendered as search DSL
    filter_group: Optional[str] = None

    def __post_init__(self) -> None:
        if self.size < 1:
            raise QueryError(f"aggregation {self.name!r}: size must be >= 1")
        if self.pre_filter is not None and self.filter_group is None:
            object.__setattr__(self, "filter_group", f"{self.name}_filter")
        if self.pre_filter is None and self.filter_group is not None:
            raise QueryError(f"aggregation {self.name!r}: filter_group without pre_filter")
        if self.pre_filter is not None and any(s.pre_filter is not None for s in self.sub_aggs):
            raise QueryError(f"aggregation {self.name!r}: nested pre_filters are not supported")


@dataclass(frozen=True)
class IocQuery:
    query_id: str
    description: str
    mitre_technique: str
    filter: FilterExpr = MATCH_ALL
    aggs: tuple[AggSpec, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.filter, Bool):
            object.__setattr__(self, "filter", Bool(must=(self.filter,)))
        names = [a.name for a in self.aggs]
        if len(names) != len(set(names)):
            raise QueryError(f"query {self.query_id!r}: duplicate aggregation names")


@dataclass(frozen=True)
class Bucket:
    key: str
    doc_count: int
    sub_buckets: dict[str, list["Bucket"]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out: dict = {"key": self.key, "doc_count": self.doc_count}
        for name, buckets in self.sub_buckets.items():
            out[name] = [b.to_dict() for b in buckets]
        return out


@dataclass(frozen=True)
class AggregationResult:
    query_id: str
    description: str
    window: TimeWindow
    matched_count: int
    buckets: dict[str, list[Bucket]]
    mitre_technique: str

    @property
    def empty(self) -> bool:
        return self.matched_count == 0

    def agg(self, name: str) -> list[Bucket]:
        return self.buckets.get(name, [])


def _bucketize(spec: AggSpec, events: Sequence[LogEvent]) -> list[Bucket]:
    if spec.pre_filter is not None:
        events = [e for e in events if eval_filter(spec.pre_filter, e)]
    groups: dict[str, list[LogEvent]] = {}
    for event in events:
        key = spec.key_source.key_for(event)
        if key is not None:
            groups.setdefault(key, []).append(event)
    ranked = sorted(groups.items(), key=lambda kv: (-len(kv[1]), kv[0]))[: spec.size]
    return [
        Bucket(key, len(members), {sub.name: _bucketize(sub, members) for sub in spec.sub_aggs})
        for key, members in ranked
    ]


def run_query(store: EventStore, query: IocQuery, window: TimeWindow) -> AggregationResult:
    matched = [e for e in store.window_slice(window) if eval_filter(query.filter, e)]
    return AggregationResult(
        query_id=query.query_id,
        description=query.description,
        window=window,
        matched_count=len(matched),
        buckets={spec.name: _bucketize(spec, matched) for spec in query.aggs},
        mitre_technique=query.mitre_technique,
    )


def check_unique(library: Iterable[IocQuery]) -> None:
    counts = Counter(q.query_id for q in library)
    dupes = sorted(k for k, n in counts.items() if n > 1)
    if dupes:
        raise DuplicateQueryId(f"duplicate query ids: {', '.join(dupes)}")


def run_library(store: EventStore, library: Sequence[IocQuery], window: TimeWindow) -> list[AggregationResult]:
    """Run every query over ``window``; empty results are kept, in library order."""
    check_unique(library)
    return [run_query(store, q, window) for q in library]
