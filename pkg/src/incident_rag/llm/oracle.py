"""Deterministic rule-based stand-in for an LLM analyst.

The oracle reads the aggregation documents of the retrieved chunks and
answers from fixed rules, so the whole pipeline can be exercised offline.
It only ever sees what retrieval handed it: evidence outside the hits is
invisible, which is what makes context-size experiments meaningful.
"""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

from ..questions import Question

NOT_FOUND_TEXT = "Not found in provided data"


@dataclass(frozen=True)
class _Evidence:
    label: str
    doc: dict

    def buckets(self, agg: str) -> list[dict]:
        return self.doc.get("aggregations", {}).get(agg, [])


def _evidence(hits: Sequence) -> list[_Evidence]:
    out = []
    for hit in sorted(hits, key=lambda h: h.rank):
        try:
            doc = json.loads(hit.chunk.text)
        except ValueError:
            continue
        if isinstance(doc, dict):
            out.append(_Evidence(hit.chunk.source_label, doc))
    return out


def _first_with(evidence: list[_Evidence], agg: str) -> Optional[tuple[_Evidence, list[dict]]]:
    for ev in evidence:
        buckets = ev.buckets(agg)
        if buckets:
            return ev, buckets
    return None


def _is_public_ipv4(value: str) -> bool:
    try:
        addr = ipaddress.ip_address(value)
    except ValueError:
        return False
    return addr.version == 4 and addr.is_global


# --- forensic questions --------------------------------------------------


def _answer_ip(evidence: list[_Evidence]) -> Optional[tuple[str, list[str]]]:
    found = _first_with(evidence, "high_severity_sources")
    if found:
        ev, buckets = found
        top = buckets[0]
        return top["key"], [
            f"{top['key']} is the top source of high-severity alerts ({top['doc_count']} alerts) "
            f"(source: {ev.label})"
        ]
    for agg in ("kerberos_hostnames", "client_accounts"):
        found = _first_with(evidence, agg)
        if found and found[1][0].get("source_ips"):
            ev, buckets = found
            addr = buckets[0]["source_ips"][0]["key"]
            return addr, [f"Kerberos traffic for {buckets[0]['key']} originates from {addr} (source: {ev.label})"]
    return None


def _answer_hostname(evidence: list[_Evidence]) -> Optional[tuple[str, list[str]]]:
    found = _first_with(evidence, "kerberos_hostnames")
    if not found:
        lease = _first_with(evidence, "lease_hostnames")
        if not lease:
            return None
        ev, buckets = lease
        top = buckets[0]
        return top["key"], [f"Hostname: {top['key']} requested a DHCP lease (source: {ev.label})"]
    ev, buckets = found
    top = buckets[0]
    addrs = ", ".join(b["key"] for b in top.get("source_ips", []))
    line = f"Hostname: {top['key']} appears in {top['doc_count']} Kerberos host service requests"
    if addrs:
        line += f" from {addrs}"
    return top["key"], [f"{line} (source: {ev.label})"]


def _answer_user(evidence: list[_Evidence]) -> Optional[tuple[str, list[str]]]:
    for ev in evidence:
        buckets = ev.buckets("client_accounts")
        humans = [b for b in buckets if not b["key"].endswith("$")]
        if not humans:
            continue
        top = humans[0]
        machines = [b["key"] for b in buckets if b["key"].endswith("$")]
        lines = [f"User account: {top['key']} with {top['doc_count']} Kerberos authentications (source: {ev.label})"]
        if machines:
            lines.append(f"Machine accounts ignored: {', '.join(machines)}")
        return top["key"], lines
    return None


def _collect_sets(
    evidence: list[_Evidence], aggs: Sequence[str], keep: Callable[[str], bool]
) -> tuple[list[str], list[str]]:
    keys: list[str] = []
    lines: list[str] = []
    for agg in aggs:
        for ev in evidence:
            for bucket in ev.buckets(agg):
                key = bucket["key"]
                if keep(key) and key not in keys:
                    keys.append(key)
                    lines.append(f"{key}: {bucket['doc_count']} events in {agg} (source: {ev.label})")
    return keys, lines


def _answer_forensic(question: Question, evidence: list[_Evidence]) -> str:
    kind = question.answer_type
    if kind in ("ip", "hostname", "user"):
        rule = {"ip": _answer_ip, "hostname": _answer_hostname, "user": _answer_user}[kind]
        found = rule(evidence)
        if found is None:
            return NOT_FOUND_TEXT
        value, lines = found
        return "\n".join(["Evidence:", *(f"- {line}" for line in lines), "", f"FINAL ANSWER = {value}"])
    if kind == "domain_set":
        keys, lines = _collect_sets(evidence, ["suspicious_domains"], lambda k: True)
    else:
        keys, lines = _collect_sets(
            evidence, ["ip_certificate_destinations", "top_external_destinations"], _is_public_ipv4
        )
    if not keys:
        return NOT_FOUND_TEXT
    return "\n".join(["Evidence:", *(f"- {line}" for line in lines), "", f"FINAL ANSWER = [{', '.join(keys)}]"])


# --- windowed timeline question ------------------------------------------


@dataclass(frozen=True)
class _StepRule:
    query_id: str
    agg: str
    template: str
    detail_aggs: tuple[str, ...] = ()


# kill-chain order; {key} is the bucket key, {d0}/{d1} the joined keys of detail_aggs
STEP_RULES = (
    _StepRule("powershell_injection", "invoked_cmdlets", "PowerShell script block executed {key} on host {d0}", ("hosts",)),
    _StepRule("file_drop", "dropped_files", "Malicious file dropped {key} on host {d0}", ("hosts",)),
    _StepRule("cert_enumeration", "enumerating_accounts", "Certificate template enumeration by account {key}"),
    _StepRule(
        "cert_request", "requesters", "Certificate request submitted by {key} with SAN {d0}", ("requested_sans",)
    ),
    _StepRule("cert_issued", "issued_subjects", "Certificate issued with subject {key} to requester {d0}", ("requesters",)),
    _StepRule(
        "kerberos_auth",
        "pkinit_accounts",
        "Kerberos TGT obtained with certificate (PKINIT) for account {key} from {d0}",
        ("source_ips",),
    ),
    _StepRule(
        "kerberos_service_tickets",
        "requested_services",
        "Kerberos service ticket requested for service {key} by {d0}",
        ("requesting_accounts",),
    ),
    _StepRule("service_installation", "installed_services", "Service {key} installed on host {d0}", ("hosts",)),
    _StepRule("user_creation", "created_accounts", "User account {key} created by {d0}", ("creators",)),
    _StepRule("group_modification", "group_changes", "Group {key} modified to add {d0}", ("members",)),
    _StepRule("ssh_scada", "ssh_destinations", "SSH session opened to SCADA host {key} from {d0}", ("ssh_sources",)),
    _StepRule("scada_service_stopped", "stopped_services", "SCADA service {key} stopped"),
)
_RULE_ORDER = {r.query_id: i for i, r in enumerate(STEP_RULES)}
PRIVILEGED_ACCOUNTS = frozenset({"administrator", "admin", "krbtgt"})


def _join(bucket: dict, agg: str) -> str:
    keys = [b["key"] for b in bucket.get(agg, [])]
    return ", ".join(keys) if keys else "unknown"


def _window_steps(evidence: list[_Evidence]) -> Iterator[str]:
    by_query = {ev.doc.get("query_id"): ev for ev in evidence}
    for rule in STEP_RULES:
        ev = by_query.get(rule.query_id)
        if ev is None:
            continue
        mitre = ev.doc.get("mitre_technique", "")
        for bucket in ev.buckets(rule.agg):
            details = {f"d{i}": _join(bucket, agg) for i, agg in enumerate(rule.detail_aggs)}
            text = rule.template.format(key=bucket["key"], **details)
            tag = f" [{mitre}]" if mitre else ""
            yield f"{text}{tag} (source: {ev.label})"
    generic = [ev for ev in evidence if ev.doc.get("query_id") not in _RULE_ORDER]
    for ev in generic:
        for name, buckets in sorted(ev.doc.get("aggregations", {}).items()):
            for bucket in buckets:
                yield f"{ev.doc.get('description') or ev.doc.get('query_id')}: {bucket['key']} (source: {ev.label})"


def _esc1_links(evidence: list[_Evidence]) -> list[tuple[str, str, str, str]]:
    """(requester, san, issued subject, labels) for Subject/SAN mismatches."""
    requests = next((ev for ev in evidence if ev.doc.get("query_id") == "cert_request"), None)
    issued = next((ev for ev in evidence if ev.doc.get("query_id") == "cert_issued"), None)
    if requests is None or issued is None:
        return []
    links = []
    for bucket in requests.buckets("requesters"):
        requester = bucket["key"]
        for san in (b["key"] for b in bucket.get("requested_sans", [])):
            if san.lower() == requester.lower():
                continue
            for subject in issued.buckets("issued_subjects"):
                if subject["key"].lower().endswith(f"cn={requester.lower()}"):
                    links.append((requester, san, subject["key"], f"{requests.label}, {issued.label}"))
    return links


def _defenses(evidence: list[_Evidence], links) -> list[tuple[str, str]]:
    by_query = {ev.doc.get("query_id"): ev for ev in evidence}

    def keys(query_id: str, agg: str) -> list[str]:
        ev = by_query.get(query_id)
        return [b["key"] for b in ev.buckets(agg)] if ev else []

    out: list[tuple[str, str]] = []
    cert_activity = any(
        keys(q, a) for q, a in (("cert_enumeration", "enumerating_accounts"), ("cert_request", "requesters"),
                                ("cert_issued", "issued_subjects"))
    )
    if cert_activity:
        out.append(("RC", "Revoke every certificate issued through the abused template and review its enrollment rights."))
    rogue_users = [requester for requester, *_ in links] + keys("user_creation", "created_accounts")
    rogue_users = [u for u in dict.fromkeys(rogue_users) if u.lower() not in PRIVILEGED_ACCOUNTS]
    if rogue_users:
        out.append(("DU", f"Disable the user accounts {', '.join(rogue_users)} pending investigation."))
    pkinit = keys("kerberos_auth", "pkinit_accounts")
    privileged_tgt = any(a.lower() in PRIVILEGED_ACCOUNTS for a in pkinit)
    krbtgt_tgs = any(s.lower() == "krbtgt" for s in keys("kerberos_service_tickets", "requested_services"))
    if privileged_tgt or krbtgt_tgs:
        out.append(("RK", "Reset the KRBTGT account twice to invalidate forged or stolen Kerberos tickets."))
    services = keys("service_installation", "installed_services")
    if services:
        out.append(("RD", f"Restart the domain controller after removing the services {', '.join(services)}."))
    plain_tgt = [a for a in pkinit if a.lower() not in PRIVILEGED_ACCOUNTS]
    if plain_tgt:
        out.append(("RP", f"Reset the password of {', '.join(plain_tgt)}."))
    return out


def _answer_timeline(evidence: list[_Evidence]) -> str:
    steps = list(_window_steps(evidence))
    if not steps:
        return NOT_FOUND_TEXT
    links = _esc1_links(evidence)
    lines = ["Attack steps:"]
    lines += [f"{i}. {step}" for i, step in enumerate(steps, 1)]
    lines += ["", "Assessment:"]
    if links:
        for requester, san, subject, labels in links:
            lines.append(
                f"- Subject/SAN mismatch: {requester} requested a certificate with SAN {san} and it was issued "
                f"with subject {subject}, so {requester} can authenticate as {san} (ESC1 template abuse) "
                f"(sources: {labels})"
            )
    else:
        lines.append("- No certificate Subject/SAN mismatch observed in this window.")
    defenses = _defenses(evidence, links)
    lines += ["", "Defensive recommendations:"]
    lines += [f"- {text}" for _, text in defenses]
    lines += ["", f"FINAL ANSWER = [{', '.join(code for code, _ in defenses)}]"]
    return "\n".join(lines)


def oracle_complete(question: Question, hits: Sequence) -> str:
    """Answer ``question`` from the aggregation documents in ``hits``."""
    evidence = _evidence(hits)
    if not evidence:
        return NOT_FOUND_TEXT
    if question.answer_type == "narrative":
        return _answer_timeline(evidence)
    return _answer_forensic(question, evidence)
