"""Sech-power integrals via the Gamma function."""

from __future__ import annotations

import math

__all__ = ["gamma_ratio", "sech_power_integral"]


def gamma_ratio(a: float, b: float) -> float:
    """Gamma(a) / Gamma(b) for positive a, b without intermediate overflow."""
    if a <= 0 or b <= 0:
        raise ValueError("gamma_ratio needs positive arguments")
    return math.exp(math.lgamma(a) - math.lgamma(b))


def sech_power_integral(p: float) -> float:
    """Integral of sech(t)**p over the real line, p > 0.

    Equals sqrt(pi) * Gamma(p/2) / Gamma((p+1)/2).
    """
    if p <= 0:
        raise ValueError("sech power must be positive")
    return math.sqrt(math.pi) * gamma_ratio(0.5 * p, 0.5 * (p + 1.0))
