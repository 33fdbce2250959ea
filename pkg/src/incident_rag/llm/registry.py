"""Provider registry: YAML document -> configured provider instances."""

from __future__ import annotations

from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import yaml

from .base import ProviderConfig, RetryPolicy, UnknownProvider
from .builtin import EchoProvider, OracleProvider
from .cost import PricingModel
from .http import HttpChatProvider, WireFormat

BUILTIN_WIRES = ("echo", "oracle")


@dataclass(frozen=True)
class Registry:
    wires: Mapping[str, WireFormat]
    providers: Mapping[str, ProviderConfig]

    def config(self, provider_id: str) -> ProviderConfig:
        try:
            return self.providers[provider_id]
        except KeyError:
            known = ", ".join(sorted(self.providers))
            raise UnknownProvider(f"unknown provider {provider_id!r} (known: {known})") from None

    def create(self, provider_id: str, **overrides: Any):
        """Instantiate a provider; ``overrides`` replace ProviderConfig fields."""
        config = self.config(provider_id)
        if overrides:
            config = replace(config, **overrides)
        if config.wire == "echo":
            return EchoProvider(config)
        if config.wire == "oracle":
            return OracleProvider(config)
        return HttpChatProvider(config, self.wires[config.wire])


def _provider_config(provider_id: str, doc: Mapping[str, Any], wires: Mapping[str, WireFormat]) -> ProviderConfig:
    wire = doc["wire"]
    if wire not in wires and wire not in BUILTIN_WIRES:
        raise ValueError(f"provider {provider_id!r}: unknown wire format {wire!r}")
    pricing = doc.get("pricing")
    retry = doc.get("retry", {})
    return ProviderConfig(
        provider_id=provider_id,
        wire=wire,
        endpoint=doc.get("endpoint", ""),
        model_name=doc.get("model", ""),
        temperature=float(doc.get("temperature", 0.1)),
        max_output_tokens=int(doc.get("max_output_tokens", 1500)),
        auth_env=doc.get("auth_env"),
        timeout_s=float(doc.get("timeout_s", 120.0)),
        retry=RetryPolicy(
            retries=int(retry.get("retries", 2)),
            backoff_s=float(retry.get("backoff_s", 1.0)),
            backoff_factor=float(retry.get("backoff_factor", 2.0)),
        ),
        min_interval_s=float(doc.get("min_interval_s", 0.0)),
        max_in_flight=int(doc.get("max_in_flight", 4)),
        pricing=PricingModel(str(pricing["in"]), str(pricing["out"])) if pricing else None,
    )


def parse_registry(text: str) -> Registry:
    doc = yaml.safe_load(text) or {}
    wires = {name: WireFormat.from_dict(name, body) for name, body in (doc.get("wires") or {}).items()}
    providers = {
        pid: _provider_config(pid, body, wires) for pid, body in (doc.get("providers") or {}).items()
    }
    return Registry(wires, providers)


def load_registry(path: Optional[Union[str, Path]] = None) -> Registry:
    """Load ``path``, or the registry shipped with the package."""
    if path is None:
        text = resources.files("incident_rag.data").joinpath("providers.yaml").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_registry(text)
