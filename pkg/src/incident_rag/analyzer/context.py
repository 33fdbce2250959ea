"""Network topology handed to the analyst alongside the evidence."""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass
from typing import Any, Mapping, Optional


@dataclass(frozen=True)
class NetworkContext:
    lan_range: str
    domain: str = ""
    dc_address: Optional[str] = None
    dc_hostname: Optional[str] = None
    gateway: Optional[str] = None
    broadcast: Optional[str] = None
    ad_name: Optional[str] = None

    def __post_init__(self) -> None:
        ipaddress.ip_network(self.lan_range, strict=True)  # raises ValueError
        for name in ("dc_address", "gateway", "broadcast"):
            value = getattr(self, name)
            if value is not None:
                ipaddress.IPv4Address(value)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "NetworkContext":
        known = {"lan_range", "domain", "dc_address", "dc_hostname", "gateway", "broadcast", "ad_name"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown network context fields: {', '.join(sorted(unknown))}")
        return cls(**{k: (str(v) if v is not None else None) for k, v in doc.items()})

    def to_dict(self) -> dict[str, Optional[str]]:
        return {
            "lan_range": self.lan_range,
            "domain": self.domain,
            "dc_address": self.dc_address,
            "dc_hostname": self.dc_hostname,
            "gateway": self.gateway,
            "broadcast": self.broadcast,
            "ad_name": self.ad_name,
        }

    @property
    def network(self) -> ipaddress.IPv4Network:
        return ipaddress.IPv4Network(self.lan_range)

    def render(self) -> str:
        net = self.network
        lines = [f"- LAN segment range: {net} ({net.network_address} through {net.broadcast_address})"]
        if self.domain:
            lines.append(f"- Domain: {self.domain}")
        if self.dc_address:
            dc = self.dc_address + (f" - {self.dc_hostname}" if self.dc_hostname else "")
            lines.append(f"- Active Directory domain controller: {dc}")
        if self.ad_name:
            lines.append(f"- AD environment name: {self.ad_name}")
        if self.gateway:
            lines.append(f"- LAN segment gateway: {self.gateway}")
        if self.broadcast:
            lines.append(f"- LAN segment broadcast address: {self.broadcast}")
        return "\n".join(lines)
