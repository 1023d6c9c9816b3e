"""Chernoff-type conversion between observed rates and expected-rate intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import DomainError, ExpectedRateInterval


def deviation_coefficient(x: float) -> float:
    """``sqrt(2 ln(1/x))``; ``x`` is a tail failure probability in (0, 1)."""
    if not 0.0 < x < 1.0:
        raise DomainError(f"tail probability must lie in (0, 1), got {x}")
    return math.sqrt(2.0 * math.log(1.0 / x))


@dataclass(frozen=True)
class SecurityBudget:
    """Failure probability spent on every single interval estimate."""

    epsilon: float

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    @property
    def delta_l(self) -> float:
        return deviation_coefficient((self.epsilon / 2.0) ** 1.5)

    @property
    def delta_u(self) -> float:
        # (eps/2)^4/16 underflows only for eps < ~1e-75
        return deviation_coefficient((self.epsilon / 2.0) ** 4 / 16.0)

    def composed(self, n_uses: int) -> float:
        """Union-bound failure probability after ``n_uses`` interval estimates."""
        return min(1.0, n_uses * self.epsilon)


def chernoff_interval(observed_rate: float, n_pairs: int, budget: SecurityBudget) -> ExpectedRateInterval:
    """Interval on the expected rate given a rate observed over ``n_pairs`` trials.

    The lower end is clamped at zero.
    """
    if not 0.0 <= observed_rate <= 1.0:
        raise DomainError(f"observed rate must lie in [0, 1], got {observed_rate}")
    if n_pairs < 1:
        raise DomainError("n_pairs must be >= 1 (no data for this pair)")
    spread = math.sqrt(observed_rate / n_pairs)
    lower = max(0.0, observed_rate - budget.delta_l * spread)
    upper = observed_rate + budget.delta_u * spread
    return ExpectedRateInterval(observed_rate=observed_rate, lower=lower, upper=upper)


def exact_interval(rate: float) -> ExpectedRateInterval:
    """Zero-width interval, used for the infinite-data limit."""
    return ExpectedRateInterval(observed_rate=rate, lower=rate, upper=rate)
