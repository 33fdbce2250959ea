"""Loading and saving query-library documents (``*.queries``)."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

from .aggregate import AggSpec, Classify, Extract, Field, IocQuery, QueryError, check_unique
from .filters import filter_from_dict, filter_to_dict

SHIPPED_LIBRARIES = ("malware", "ad")


def _agg_from_dict(doc: dict) -> AggSpec:
    sources = [k for k in ("field", "extract", "classify") if k in doc]
    if len(sources) != 1:
        raise QueryError(f"aggregation {doc.get('name')!r} needs exactly one of field/extract/classify")
    kind = sources[0]
    if kind == "field":
        key_source: Any = Field(doc["field"])
    elif kind == "extract":
        ex = doc["extract"]
        key_source = Extract(
            pattern=ex["pattern"],
            field=ex.get("field", "message"),
            fallback=ex.get("fallback"),
            template=ex.get("template"),
        )
    else:
        cl = doc["classify"]
        key_source = Classify(
            field=cl["field"],
            rules=tuple((needle, label) for needle, label in cl["rules"]),
            fallback=cl.get("fallback"),
        )
    pre_filter = filter_from_dict(doc["filter"]) if "filter" in doc else None
    return AggSpec(
        name=doc["name"],
        key_source=key_source,
        size=int(doc.get("size", 10)),
        sub_aggs=tuple(_agg_from_dict(d) for d in doc.get("aggs", [])),
        pre_filter=pre_filter,
        filter_group=doc.get("filter_group"),
    )


def _agg_to_dict(spec: AggSpec) -> dict:
    out: dict[str, Any] = {"name": spec.name}
    src = spec.key_source
    if isinstance(src, Field):
        out["field"] = src.name
    elif isinstance(src, Extract):
        ex: dict[str, Any] = {"pattern": src.pattern, "field": src.field}
        if src.fallback is not None:
            ex["fallback"] = src.fallback
        if src.template is not None:
            ex["template"] = src.template
        out["extract"] = ex
    else:
        cl: dict[str, Any] = {"field": src.field, "rules": [list(r) for r in src.rules]}
        if src.fallback is not None:
            cl["fallback"] = src.fallback
        out["classify"] = cl
    out["size"] = spec.size
    if spec.pre_filter is not None:
        out["filter"] = filter_to_dict(spec.pre_filter)
        out["filter_group"] = spec.filter_group
    if spec.sub_aggs:
        out["aggs"] = [_agg_to_dict(s) for s in spec.sub_aggs]
    return out


def query_from_dict(doc: dict) -> IocQuery:
    try:
        return IocQuery(
            query_id=doc["query_id"],
            description=doc.get("description", ""),
            mitre_technique=doc.get("mitre", ""),
            filter=filter_from_dict(doc.get("filter", {"bool": {}})),
            aggs=tuple(_agg_from_dict(a) for a in doc.get("aggs", [])),
        )
    except KeyError as exc:
        raise QueryError(f"query {doc.get('query_id')!r}: missing key {exc}") from exc


def query_to_dict(query: IocQuery) -> dict:
    return {
        "query_id": query.query_id,
        "description": query.description,
        "mitre": query.mitre_technique,
        "filter": filter_to_dict(query.filter),
        "aggs": [_agg_to_dict(a) for a in query.aggs],
    }


def parse_library(text: str) -> list[IocQuery]:
    docs = json.loads(text)
    if not isinstance(docs, list):
        raise QueryError("a query library is a JSON array of query objects")
    library = [query_from_dict(d) for d in docs]
    check_unique(library)
    return library


def load_library(source: Union[str, Path], only: Optional[Iterable[str]] = None) -> list[IocQuery]:
    """Load a library by shipped name (``"malware"``, ``"ad"``) or file path.

    ``only`` keeps the listed query ids, in library order.
    """
    source_str = str(source)
    if source_str in SHIPPED_LIBRARIES:
        text = resources.files("incident_rag.data").joinpath(f"{source_str}.queries").read_text("utf-8")
    else:
        text = Path(source).read_text(encoding="utf-8")
    library = parse_library(text)
    if only is not None:
        wanted = list(only)
        known = {q.query_id for q in library}
        missing = [q for q in wanted if q not in known]
        if missing:
            raise QueryError(f"unknown query ids: {', '.join(missing)}")
        library = [q for q in library if q.query_id in set(wanted)]
    return library


def dump_library(library: Sequence[IocQuery]) -> str:
    return json.dumps([query_to_dict(q) for q in library], indent=2, ensure_ascii=False) + "\n"
