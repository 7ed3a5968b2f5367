import math

import pytest
from hypothesis import given, strategies as st

from fdhetnet.model import (DuplexMode, NetworkConfig, TierParams, UserParams, ValidationError,
                            db_to_linear, dbm_to_watts, per_km2_to_per_m2, per_m2_to_per_km2,
                            validate, watts_to_dbm)

finite = st.floats(-200, 200, allow_nan=False)


def test_dbm_examples():
    assert dbm_to_watts(46) == pytest.approx(39.810717055, rel=1e-10)
    assert dbm_to_watts(30) == pytest.approx(1.0, rel=1e-15)
    assert dbm_to_watts(0) == pytest.approx(1e-3, rel=1e-15)


def test_db_examples():
    assert db_to_linear(0) == 1.0
    assert db_to_linear(-70) == pytest.approx(1e-7, rel=1e-14)
    assert db_to_linear(10) == pytest.approx(10.0, rel=1e-15)


@given(finite)
def test_plus_ten_db_is_times_ten(x):
    assert dbm_to_watts(x + 10) == pytest.approx(10 * dbm_to_watts(x), rel=1e-12)
    assert db_to_linear(x + 10) == pytest.approx(10 * db_to_linear(x), rel=1e-12)


@given(finite, finite)
def test_conversions_monotone(a, b):
    if a < b:
        assert dbm_to_watts(a) <= dbm_to_watts(b)
        assert db_to_linear(a) <= db_to_linear(b)


@given(st.floats(1e-6, 1e6))
def test_density_round_trip(x):
    assert per_m2_to_per_km2(per_km2_to_per_m2(x)) == pytest.approx(x, rel=1e-12)


def test_watts_dbm_inverse():
    assert watts_to_dbm(dbm_to_watts(23.0)) == pytest.approx(23.0, abs=1e-12)


def test_indicator():
    assert DuplexMode.FD.indicator == 1
    assert DuplexMode.HD.indicator == 0


def test_preset_config_valid(fig2):
    assert validate(fig2) is fig2
    assert validate(validate(fig2)) == validate(fig2)


def test_alpha_two_rejected(fig2):
    bad = fig2.with_tier(0, pathloss_alpha=2.0)
    with pytest.raises(ValidationError, match="α must exceed 2"):
        validate(bad)


def test_silence_out_of_range(fig2):
    with pytest.raises(ValidationError, match=r"silence probability outside \[0,1\]"):
        validate(fig2.with_tier(0, silence_prob=1.2))


def test_every_violation_listed(fig2):
    bad = fig2.with_tier(0, pathloss_alpha=1.5, silence_prob=-0.1).with_tier(1, density=0.0)
    bad = bad.with_user(si_residual=2.0)
    with pytest.raises(ValidationError) as info:
        validate(bad)
    probs = info.value.problems
    assert len(probs) == 4
    assert any(p.startswith("tier 1") and "α" in p for p in probs)
    assert any(p.startswith("tier 2") and "density" in p for p in probs)
    assert any(p.startswith("user") for p in probs)


def test_nan_and_sleep_rules(fig2):
    with pytest.raises(ValidationError, match="finite"):
        validate(fig2.with_tier(1, fd_distance=math.nan))
    with pytest.raises(ValidationError, match="sleep power exceeds"):
        validate(fig2.with_tier(1, power_sleep=20.0))


def test_empty_network(fig2):
    with pytest.raises(ValidationError, match="at least one tier"):
        validate(NetworkConfig((), fig2.user))


def test_config_is_hashable_and_frozen(fig2):
    assert hash(fig2) == hash(NetworkConfig(list(fig2.tiers), fig2.user))
    with pytest.raises(Exception):
        fig2.tiers[0].density = 3.0


def test_common_values(fig2):
    assert fig2.common_alpha == 3.5
    assert fig2.common_threshold == 1.0
    assert fig2.with_tier(1, pathloss_alpha=4.0).common_alpha is None
    assert fig2.with_tier(1, sir_threshold=2.0).common_threshold is None
