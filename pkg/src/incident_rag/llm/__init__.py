"""LLM gateway: provider configuration, wire adapters, test providers and cost."""

from .base import (
    AuthError,
    Completion,
    LlmError,
    MalformedResponse,
    Pacer,
    Provider,
    ProviderConfig,
    RateLimited,
    RetryPolicy,
    Timeout,
    UnknownProvider,
    count_tokens_approx,
)
from .builtin import EchoProvider, OracleProvider
from .cost import CostEstimate, PricingModel, cost_of_usage, estimate_cost, format_money
from .http import HttpChatProvider, WireFormat
from .oracle import NOT_FOUND_TEXT, oracle_complete
from .registry import Registry, load_registry, parse_registry

__all__ = [
    "AuthError", "Completion", "CostEstimate", "EchoProvider", "HttpChatProvider", "LlmError",
    "MalformedResponse", "NOT_FOUND_TEXT", "OracleProvider", "Pacer", "PricingModel", "Provider",
    "ProviderConfig", "RateLimited", "Registry", "RetryPolicy", "Timeout", "UnknownProvider",
    "WireFormat", "cost_of_usage", "count_tokens_approx", "estimate_cost", "format_money",
    "load_registry", "oracle_complete", "parse_registry",
]
