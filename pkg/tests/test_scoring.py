from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from qdgen.errors import ConfigError, UnusableVerificationError
from qdgen.gateway.service import Rollout, VerificationSet
from qdgen.scoring import QualityConfig, as_exact, quality, solve_rate


def make_vs(correct: int, total: int, infra: int = 0) -> VerificationSet:
    rollouts = []
    for i in range(total):
        if i < infra:
            rollouts.append(Rollout(text="", correct=False, infrastructure_failure=True))
        elif i < infra + correct:
            rollouts.append(Rollout(text="\\boxed{1}", correct=True))
        else:
            rollouts.append(Rollout(text="\\boxed{2}", correct=False))
    return VerificationSet(rollouts=tuple(rollouts))


class TestSolveRate:
    @pytest.mark.parametrize("correct,total,expected", [
        (4, 16, Fraction(1, 4)),
        (0, 16, Fraction(0)),
        (16, 16, Fraction(1)),
        (5, 16, Fraction(5, 16)),
    ])
    def test_values(self, correct, total, expected):
        assert solve_rate(make_vs(correct, total)) == expected

    def test_unusable_raises(self):
        vs = make_vs(0, 16, infra=9)
        assert not vs.usable
        with pytest.raises(UnusableVerificationError):
            solve_rate(vs)

    def test_half_infra_is_still_usable(self):
        assert make_vs(2, 16, infra=8).usable


class TestQuality:
    def setup_method(self):
        self.cfg = QualityConfig.create("0.1", "0.9", 16)

    def test_inside_band(self):
        assert quality(Fraction(1, 4), self.cfg) == Fraction(3, 4)

    def test_below_band(self):
        assert quality(Fraction(1, 20), self.cfg) == 0

    def test_boundaries_inclusive(self):
        assert quality(Fraction(9, 10), self.cfg) == Fraction(1, 10)
        assert quality(Fraction(1, 10), self.cfg) == Fraction(9, 10)

    def test_float_thresholds_mean_their_decimals(self):
        cfg = QualityConfig.create(0.1, 0.9, 10)
        # 1/10 must sit exactly on the boundary even though the float 0.1
        # is not exactly one tenth.
        assert quality(Fraction(1, 10), cfg) == Fraction(9, 10)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            QualityConfig.create("0.9", "0.1", 16)
        with pytest.raises(ConfigError):
            QualityConfig.create("0.1", "0.9", 0)
        with pytest.raises(ConfigError):
            QualityConfig.create("0", "0.9", 16)


def reference_quality(rate: Fraction, lower: Fraction, upper: Fraction) -> Fraction:
    # Independent statement of the piecewise definition.
    if lower <= rate <= upper:
        return 1 - rate
    return Fraction(0)


@given(
    num=st.integers(min_value=0, max_value=64),
    den=st.integers(min_value=1, max_value=64),
    lo=st.fractions(min_value="1/100", max_value="98/100"),
    hi=st.fractions(min_value="1/100", max_value="99/100"),
)
def test_quality_matches_reference(num, den, lo, hi):
    if num > den or lo >= hi:
        return
    cfg = QualityConfig(lower=lo, upper=hi, k_rollouts=16)
    rate = Fraction(num, den)
    assert quality(rate, cfg) == reference_quality(rate, lo, hi)


@given(
    num=st.integers(min_value=0, max_value=32),
)
def test_quality_range_and_monotonicity(num):
    cfg = QualityConfig.create("0.1", "0.9", 32)
    rate = Fraction(num, 32)
    value = quality(rate, cfg)
    assert value == 0 or (1 - cfg.upper) <= value <= (1 - cfg.lower)
    if rate < 1:
        nxt = quality(rate + Fraction(1, 32), cfg)
        if value > 0 and nxt > 0:
            assert nxt <= value


def test_as_exact_float_uses_decimal_form():
    assert as_exact(0.1) == Fraction(1, 10)
    assert as_exact("0.25") == Fraction(1, 4)
    assert as_exact(Fraction(3, 7)) == Fraction(3, 7)
