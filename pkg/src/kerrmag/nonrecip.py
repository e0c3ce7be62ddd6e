"""Nonreciprocity indices comparing positive and negative Kerr shifts.

Unstable points carry NaN; NaN on either side propagates to the index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "NonreciprocityPair",
    "bidirectional_contrast_ratio",
    "bipartite_nonlinear_index",
    "is_nonreciprocal",
]

NONRECIPROCITY_EPS = 1e-6


@dataclass(frozen=True)
class NonreciprocityPair:
    value_plus: float
    value_minus: float
    measure_id: str = ""
    parameters: dict = field(default_factory=dict, compare=False)


def bipartite_nonlinear_index(pair: NonreciprocityPair) -> float:
    """``|E(dK > 0) - E(dK < 0)|``."""
    return abs(pair.value_plus - pair.value_minus)


def is_nonreciprocal(pair: NonreciprocityPair, eps: float = NONRECIPROCITY_EPS) -> bool:
    index = bipartite_nonlinear_index(pair)
    return not math.isnan(index) and index > eps


def bidirectional_contrast_ratio(pair: NonreciprocityPair) -> float:
    """``|R+ - R-| / (R+ + R-)``; defined as 0 when both sides vanish."""
    a, b = pair.value_plus, pair.value_minus
    if math.isnan(a) or math.isnan(b):
        return math.nan
    if a < 0 or b < 0:
        raise ValueError(f"contrast ratio needs nonnegative values, got ({a!r}, {b!r})")
    total = a + b
    if total == 0:
        return 0.0
    return abs(a - b) / total
