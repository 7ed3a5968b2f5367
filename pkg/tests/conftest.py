import pytest

from fdhetnet.model import NetworkConfig, TierParams, UserParams, db_to_linear, dbm_to_watts
from fdhetnet.presets import preset_config


def two_tier(tau_db=0.0, chi=0.5, beta_db=-70.0, alpha=3.5):
    """The two-tier macro/pico network with explicit knobs."""
    cfg = preset_config("fig2")
    cfg = cfg.with_all_tiers(sir_threshold=db_to_linear(tau_db), silence_prob=chi, pathloss_alpha=alpha)
    return cfg.with_user(si_residual=db_to_linear(beta_db), pathloss_alpha=alpha)


def single_tier(density=1e-6, theta=300.0, chi=0.0, tau=1.0, beta=1e-7, alpha=3.5):
    t = TierParams(density, dbm_to_watts(46), tau, chi, alpha, theta, 139.0, 5.0, 80.0)
    u = UserParams(50e-6, dbm_to_watts(23), alpha, beta, 0.05)
    return NetworkConfig((t,), u)


@pytest.fixture
def fig2():
    return preset_config("fig2")


@pytest.fixture
def fig3():
    return preset_config("fig3")
