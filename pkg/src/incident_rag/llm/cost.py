"""Per-analysis cost in exact rational arithmetic."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Union

DEFAULT_CALLS = 5
DEFAULT_INPUT_TOKENS = 4000
DEFAULT_OUTPUT_TOKENS = 800

Number = Union[int, str, Fraction, Decimal]


def _exact(value: Number) -> Fraction:
    if isinstance(value, float):
        # floats would smuggle binary rounding into the result
        raise TypeError("pass prices as str, int, Decimal or Fraction, not float")
    return Fraction(value)


@dataclass(frozen=True)
class PricingModel:
    """Prices in currency units per million tokens."""

    price_in: Fraction
    price_out: Fraction

    def __init__(self, price_in: Number, price_out: Number):
        p_in, p_out = _exact(price_in), _exact(price_out)
        if p_in < 0 or p_out < 0:
            raise ValueError("prices must be non-negative")
        object.__setattr__(self, "price_in", p_in)
        object.__setattr__(self, "price_out", p_out)


@dataclass(frozen=True)
class CostEstimate:
    n_calls: int
    t_in: int
    t_out: int
    total: Fraction

    def display(self, places: int = 3) -> str:
        return format_money(self.total, places)


def estimate_cost(
    pricing: PricingModel,
    n_calls: int = DEFAULT_CALLS,
    t_in: int = DEFAULT_INPUT_TOKENS,
    t_out: int = DEFAULT_OUTPUT_TOKENS,
) -> CostEstimate:
    if min(n_calls, t_in, t_out) < 0:
        raise ValueError("calls and token counts must be non-negative")
    per_call = Fraction(t_in, 10**6) * pricing.price_in + Fraction(t_out, 10**6) * pricing.price_out
    return CostEstimate(n_calls, t_in, t_out, n_calls * per_call)


def cost_of_usage(pricing: PricingModel, input_tokens: int, output_tokens: int) -> Fraction:
    """Cost of tokens actually consumed (summed over calls)."""
    return Fraction(input_tokens, 10**6) * pricing.price_in + Fraction(output_tokens, 10**6) * pricing.price_out


def format_money(amount: Fraction, places: int = 3) -> str:
    quantum = Decimal(1).scaleb(-places)
    value = Decimal(amount.numerator) / Decimal(amount.denominator)
    return str(value.quantize(quantum, rounding=ROUND_HALF_UP))
