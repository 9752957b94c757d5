"""Solve-rate and thresholded quality measures.

Solve-rates are kept as exact rationals with denominator K so threshold
comparisons are bit-stable; quality is 1 - solve_rate inside the closed
band [lower, upper] and 0 outside it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .errors import ConfigError, UnusableVerificationError

Rational = Union[Fraction, int]

ZERO = Fraction(0)
ONE = Fraction(1)


def as_exact(value) -> Fraction:
    """Exact rational from int/str/Fraction; floats convert via str().

    str() round-trips a float to its shortest decimal, so a config value
    written as 0.1 becomes Fraction(1, 10) rather than the binary float's
    exact expansion.
    """
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class QualityConfig:
    """Thresholds and rollout count for quality scoring."""

    lower: Fraction  # keep band lower bound, exclusive of 0
    upper: Fraction  # keep band upper bound, exclusive of 1
    k_rollouts: int

    def __post_init__(self):
        problems = []
        if not isinstance(self.k_rollouts, int) or self.k_rollouts < 1:
            problems.append("k_rollouts must be a positive integer")
        if not (ZERO < self.lower < self.upper < ONE):
            problems.append("thresholds must satisfy 0 < lower < upper < 1")
        if problems:
            raise ConfigError(problems)

    @classmethod
    def create(cls, lower="0.1", upper="0.9", k_rollouts=16) -> "QualityConfig":
        return cls(lower=as_exact(lower), upper=as_exact(upper), k_rollouts=int(k_rollouts))


def solve_rate(verification_set) -> Fraction:
    """Fraction of rollouts whose final answer matched, as n/K exactly."""
    if not verification_set.usable:
        raise UnusableVerificationError(
            f"{verification_set.infrastructure_failures} of "
            f"{verification_set.size} rollouts failed on infrastructure"
        )
    return Fraction(verification_set.correct_count, verification_set.size)


def quality(rate: Rational, cfg: QualityConfig) -> Fraction:
    """1 - rate inside the closed [lower, upper] band, else 0."""
    rate = Fraction(rate)
    if cfg.lower <= rate <= cfg.upper:
        return ONE - rate
    return ZERO
