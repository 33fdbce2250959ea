"""Render queries as Elasticsearch search documents and parse them back.

Extract and Classify key sources become ``terms`` aggregations driven by a
Painless script. The script text mirrors what a SIEM would run; the
declarative spec travels in the script ``params`` so that parsing does not
need a Painless interpreter.
"""

from __future__ import annotations

import json
from typing import Any, Optional

from ..events import TimeWindow, format_timestamp, parse_timestamp
from .aggregate import AggSpec, Classify, Extract, Field, IocQuery, QueryError
from .filters import Bool, filter_from_dict, filter_to_dict


def _doc_ref(field: str) -> str:
    name = "message.keyword" if field == "message" else field
    return f"doc['{name}'].value"


def _painless_str(text: str) -> str:
    return "'" + text.replace("\\", "\\\\").replace("'", "\\'") + "'"


def _painless_extract(src: Extract) -> str:
    regex = src.pattern.replace("/", "\\/")
    if src.template is None:
        expr = "m.group(1)"
    else:
        pieces = []
        rest = src.template
        while rest:
            start = rest.find("{")
            end = rest.find("}", start)
            if start < 0 or end < 0:
                pieces.append(_painless_str(rest))
                break
            if start:
                pieces.append(_painless_str(rest[:start]))
            name = rest[start + 1:end]
            pieces.append("m.group(1)" if name == "match" else _doc_ref(name))
            rest = rest[end + 1:]
        expr = " + ".join(pieces)
    tail = f"return {_painless_str(src.fallback)};" if src.fallback is not None else "return null;"
    return (
        f"def v = {_doc_ref(src.field)}; def m = /{regex}/.matcher(v); "
        f"if (m.find()) {{ return {expr}; }} {tail}"
    )


def _painless_classify(src: Classify) -> str:
    checks = " ".join(
        f"if (v.contains({_painless_str(needle)})) return {_painless_str(label)};" for needle, label in src.rules
    )
    tail = f"return {_painless_str(src.fallback)};" if src.fallback is not None else "return null;"
    return f"def v = {_doc_ref(src.field)}; {checks} {tail}"


def _terms_body(spec: AggSpec) -> dict:
    src = spec.key_source
    if isinstance(src, Field):
        return {"field": src.name, "size": spec.size}
    if isinstance(src, Extract):
        params: dict[str, Any] = {"key_source": "extract", "pattern": src.pattern, "field": src.field}
        if src.fallback is not None:
            params["fallback"] = src.fallback
        if src.template is not None:
            params["template"] = src.template
        source = _painless_extract(src)
    else:
        params = {"key_source": "classify", "field": src.field, "rules": [list(r) for r in src.rules]}
        if src.fallback is not None:
            params["fallback"] = src.fallback
        source = _painless_classify(src)
    return {"script": {"source": source, "lang": "painless", "params": params}, "size": spec.size}


def _render_aggs(specs: tuple[AggSpec, ...]) -> dict:
    out: dict[str, Any] = {}
    groups: dict[str, list[AggSpec]] = {}
    for spec in specs:
        if spec.pre_filter is None:
            out[spec.name] = _render_terms(spec)
            continue
        group = spec.filter_group or spec.name
        if group not in groups:
            groups[group] = []
            out[group] = None  # placeholder keeps first-occurrence order
        elif groups[group][0].pre_filter != spec.pre_filter:
            raise QueryError(f"filter group {group!r} mixes different filters")
        groups[group].append(spec)
    for group, members in groups.items():
        out[group] = {
            "filter": filter_to_dict(members[0].pre_filter),
            "aggs": {m.name: _render_terms(m) for m in members},
        }
    return out


def _render_terms(spec: AggSpec) -> dict:
    node: dict[str, Any] = {"terms": _terms_body(spec)}
    if spec.sub_aggs:
        node["aggs"] = _render_aggs(spec.sub_aggs)
    return node


def to_remote_document(query: IocQuery, window: Optional[TimeWindow] = None) -> dict:
    body = filter_to_dict(query.filter)["bool"]
    if window is not None:
        had_must = bool(body.get("must"))
        body["must"] = list(body.get("must", [])) + [
            {"range": {"@timestamp": {"gte": format_timestamp(window.start), "lt": format_timestamp(window.end)}}}
        ]
        if body.get("should") and not had_must:
            # keep should mandatory once the time range joins ``must``
            body["minimum_should_match"] = 1
        body = {k: body[k] for k in ("must", "should", "must_not", "minimum_should_match") if k in body}
    return {"query": {"bool": body}, "aggs": _render_aggs(query.aggs), "size": 0}


def to_remote_dsl(query: IocQuery, window: Optional[TimeWindow] = None) -> str:
    """Canonical search-DSL text for ``query`` restricted to ``window``."""
    return json.dumps(to_remote_document(query, window), indent=2, ensure_ascii=False) + "\n"


def _parse_terms(name: str, node: dict, pre_filter=None, group=None) -> AggSpec:
    terms = node["terms"]
    size = int(terms.get("size", 10))
    if "field" in terms:
        key_source: Any = Field(terms["field"])
    else:
        params = terms.get("script", {}).get("params")
        if not params or "key_source" not in params:
            raise QueryError(f"aggregation {name!r}: script without declarative params cannot be parsed")
        if params["key_source"] == "extract":
            key_source = Extract(
                pattern=params["pattern"],
                field=params.get("field", "message"),
                fallback=params.get("fallback"),
                template=params.get("template"),
            )
        elif params["key_source"] == "classify":
            key_source = Classify(
                field=params["field"],
                rules=tuple((n, label) for n, label in params["rules"]),
                fallback=params.get("fallback"),
            )
        else:
            raise QueryError(f"aggregation {name!r}: unknown key_source {params['key_source']!r}")
    subs = _parse_aggs(node.get("aggs", {}))
    return AggSpec(name, key_source, size, tuple(subs), pre_filter, group)


def _parse_aggs(doc: dict) -> list[AggSpec]:
    specs: list[AggSpec] = []
    for name, node in doc.items():
        if "filter" in node:
            pre = filter_from_dict(node["filter"])
            for child, child_node in node.get("aggs", {}).items():
                specs.append(_parse_terms(child, child_node, pre, name))
        elif "terms" in node:
            specs.append(_parse_terms(name, node))
        else:
            raise QueryError(f"aggregation {name!r}: only terms and filter aggregations are supported")
    return specs


def parse_remote_document(
    doc: dict, query_id: str = "", description: str = "", mitre_technique: str = ""
) -> tuple[IocQuery, Optional[TimeWindow]]:
    """Inverse of :func:`to_remote_document`.

    Metadata that the search DSL cannot carry is supplied by the caller.
    """
    body = dict(doc.get("query", {}).get("bool", {}))
    msm = body.pop("minimum_should_match", None)
    window = None
    must = list(body.get("must", []))
    if must:
        last = must[-1]
        ts = last.get("range", {}).get("@timestamp") if isinstance(last, dict) else None
        if ts is not None and len(last) == 1:
            window = TimeWindow(parse_timestamp(ts["gte"]), parse_timestamp(ts["lt"]))
            must.pop()
    if must:
        body["must"] = must
    else:
        body.pop("must", None)
    if msm not in (None, 1) or (msm == 1 and must):
        raise QueryError("minimum_should_match is only supported as the implicit default")
    flt = filter_from_dict({"bool": body})
    assert isinstance(flt, Bool)
    query = IocQuery(query_id, description, mitre_technique, flt, tuple(_parse_aggs(doc.get("aggs", {}))))
    return query, window


def parse_remote_dsl(text: str, **metadata: str) -> tuple[IocQuery, Optional[TimeWindow]]:
    return parse_remote_document(json.loads(text), **metadata)
