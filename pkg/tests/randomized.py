"""Random stores and queries from the shipped grammar, plus a naive oracle."""

from __future__ import annotations

import fnmatch
import ipaddress
import json
import random
import re
from collections import Counter
from datetime import datetime, timedelta, timezone

from incident_rag.events import format_timestamp, ingest_lines
from incident_rag.query import AggSpec, Bool, Classify, Extract, Field, IocQuery, RangeIp, RangeNum, Term, Terms, Wildcard

T0 = datetime(2025, 3, 12, 15, 30, tzinfo=timezone.utc)
DATASETS = ["zeek.conn", "zeek.dns", "suricata.alert", "windows.security"]
USERS = ["alice", "bob", "carol", "svc$", "DC01$"]
IPS = ["10.0.0.5", "10.0.0.6", "10.1.17.215", "172.16.0.9", "45.125.66.32", "5.252.153.241"]
WORDS = ["GET /a.ps1", "GET /b.exe", "POST /login", "alert", "client", "noop"]


def random_records(rng: random.Random, n: int) -> list[dict]:
    records = []
    for i in range(n):
        rec = {
            "@timestamp": format_timestamp(T0 + timedelta(seconds=rng.randint(0, 3600))),
            "event.dataset": rng.choice(DATASETS),
            "message": f"{rng.choice(WORDS)} user={rng.choice(USERS)} n={rng.randint(0, 3)}",
        }
        if rng.random() < 0.8:
            rec["source.ip"] = rng.choice(IPS)
        if rng.random() < 0.7:
            rec["destination.port"] = rng.choice([22, 53, 80, 88, 443])
        if rng.random() < 0.5:
            rec["rule.severity"] = rng.randint(1, 4)
        if rng.random() < 0.6:
            rec["user.name"] = rng.choice(USERS)
        records.append(rec)
    return records


def store_from(records, scenario_id="rand"):
    return ingest_lines([json.dumps(r) for r in records], scenario_id)


def _leaf(rng: random.Random):
    kind = rng.choice(["term", "terms", "range", "rangeip", "wildcard"])
    if kind == "term":
        field, pool = rng.choice([("event.dataset", DATASETS), ("user.name", USERS), ("destination.port", [22, 80, 88])])
        return Term(field, rng.choice(pool))
    if kind == "terms":
        return Terms("destination.port", tuple(rng.sample([22, 53, 80, 88, 443], rng.randint(1, 3))))
    if kind == "range":
        lo = rng.randint(1, 4)
        return RangeNum("rule.severity", lo, rng.choice([None, lo + rng.randint(0, 2)]))
    if kind == "rangeip":
        a, b = sorted(rng.sample(IPS, 2), key=lambda ip: int(ipaddress.IPv4Address(ip)))
        return RangeIp("source.ip", a, b)
    return Wildcard(rng.choice(["message", "user.name"]), rng.choice(["*ps1*", "GET*", "*$", "?ob", "*user=bob*"]))


def random_filter(rng: random.Random, depth: int = 2):
    def clauses(k):
        return tuple(
            random_filter(rng, depth - 1) if depth > 0 and rng.random() < 0.25 else _leaf(rng) for _ in range(k)
        )

    return Bool(must=clauses(rng.randint(0, 2)), should=clauses(rng.randint(0, 2)), must_not=clauses(rng.randint(0, 1)))


def _key_source(rng: random.Random):
    kind = rng.choice(["field", "field", "extract", "classify"])
    if kind == "field":
        return Field(rng.choice(["source.ip", "user.name", "event.dataset", "destination.port", "rule.severity"]))
    if kind == "extract":
        return Extract(rng.choice([r"user=(\S+)", r"(GET|POST) ", r"/(\w+)\."]), "message",
                       fallback=rng.choice([None, "none"]))
    return Classify("message", (("ps1", "powershell"), ("exe", "exe")), fallback=rng.choice([None, "other"]))


def random_agg(rng: random.Random, name: str, depth: int = 1) -> AggSpec:
    subs = ()
    if depth > 0 and rng.random() < 0.5:
        subs = (random_agg(rng, name + "_sub", depth - 1),)
    pre = _leaf(rng) if depth > 0 and rng.random() < 0.3 else None
    return AggSpec(name, _key_source(rng), rng.randint(1, 6), subs, pre)


def random_query(rng: random.Random, qid: str = "q") -> IocQuery:
    aggs = tuple(random_agg(rng, f"agg{i}") for i in range(rng.randint(1, 3)))
    return IocQuery(qid, "random query", "T0000", random_filter(rng), aggs)


# --- naive oracle over plain record dicts ----------------------------------------


def _text(v) -> str:
    return str(v)


def naive_match(expr, rec: dict) -> bool:
    if isinstance(expr, Bool):
        must_ok = all(naive_match(c, rec) for c in expr.must)
        not_ok = not any(naive_match(c, rec) for c in expr.must_not)
        should_ok = True
        if expr.should and not expr.must:
            should_ok = any(naive_match(c, rec) for c in expr.should)
        return must_ok and not_ok and should_ok
    v = rec.get(expr.field)
    if v is None:
        return False
    if isinstance(expr, Term):
        return _text(v) == _text(expr.value)
    if isinstance(expr, Terms):
        return _text(v) in {_text(x) for x in expr.values}
    if isinstance(expr, RangeNum):
        x = float(v)
        return (expr.gte is None or x >= expr.gte) and (expr.lte is None or x <= expr.lte)
    if isinstance(expr, RangeIp):
        x = ipaddress.IPv4Address(v)
        return ipaddress.IPv4Address(expr.gte) <= x <= ipaddress.IPv4Address(expr.lte)
    if isinstance(expr, Wildcard):
        return fnmatch.fnmatchcase(_text(v), expr.pattern)
    raise TypeError(expr)


def naive_key(src, rec: dict):
    if isinstance(src, Field):
        v = rec.get(src.name)
        return None if v is None else _text(v)
    v = rec.get(src.field)
    if v is None:
        return src.fallback
    if isinstance(src, Extract):
        m = re.search(src.pattern, _text(v))
        return m.group(1) if m else src.fallback
    for needle, label in src.rules:
        if needle in _text(v):
            return label
    return src.fallback


def naive_buckets(spec: AggSpec, recs: list[dict]) -> list[dict]:
    if spec.pre_filter is not None:
        recs = [r for r in recs if naive_match(spec.pre_filter, r)]
    keyed = [(naive_key(spec.key_source, r), r) for r in recs]
    counts = Counter(k for k, _ in keyed if k is not None)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[: spec.size]
    out = []
    for key, count in ordered:
        bucket = {"key": key, "doc_count": count}
        members = [r for k, r in keyed if k == key]
        for sub in spec.sub_aggs:
            bucket[sub.name] = naive_buckets(sub, members)
        out.append(bucket)
    return out


def naive_run(query: IocQuery, records: list[dict], start: datetime, end: datetime) -> dict:
    inside = [
        r for r in records
        if start <= datetime.strptime(r["@timestamp"], "%Y-%m-%dT%H:%M:%S.%fZ").replace(tzinfo=timezone.utc) < end
    ]
    matched = [r for r in inside if naive_match(query.filter, r)]
    return {
        "matched_count": len(matched),
        "aggregations": {spec.name: naive_buckets(spec, matched) for spec in query.aggs},
    }
