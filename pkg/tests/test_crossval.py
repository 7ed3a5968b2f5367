import math

import pytest

from fdhetnet import crossval as xval
from fdhetnet import montecarlo as mc
from fdhetnet.model import db_to_linear

FAST = xval.CrossvalSpec(r_grid=(50.0, 200.0), delay_links=1500)


@pytest.fixture(scope="module")
def report():
    from fdhetnet.presets import preset_config
    return xval.crossval(preset_config("fig2"), mc.SimulationSettings(n_realizations=4000, rng_seed=1), FAST)


def test_correct_engines_agree(report):
    assert report.passed, report.format()
    names = [c.name for c in report.checks]
    assert "association A_FD tier 2" in names
    assert "P_suc tier 1 r=200 m HD" in names
    assert "delay FD τ=-10 dB" in names
    assert len(report.checks) == 6 + 4 + 2


def test_report_format(report):
    text = report.format()
    assert text.splitlines()[0].startswith("check")
    assert text.endswith("12 checks, 0 failed")


def test_wrong_self_interference_is_caught(fig2):
    mutated = fig2.with_user(si_residual=db_to_linear(-50.0))
    rep = xval.crossval(fig2, mc.SimulationSettings(n_realizations=4000, rng_seed=1),
                        xval.CrossvalSpec(r_grid=(200.0,), delay_links=300), mc_config=mutated)
    assert not rep.passed
    assert any(c.name == "P_suc tier 1 r=200 m FD" for c in rep.failures())


def test_infinite_variance_delay_is_skipped(fig2):
    spec = xval.CrossvalSpec(r_grid=(), delay_tau_db=None, delay_links=50, delay_cap=20.0)
    s = mc.SimulationSettings(n_realizations=200, guard_radius=2_000.0, window_radius=5_000.0)
    rep = xval.crossval(fig2, s, spec)
    hd = [c for c in rep.checks if c.name == "delay HD"][0]
    assert hd.status == xval.SKIP


def test_zero_sigma_requires_exact_match():
    c = xval._compare("x", 1.0, 1.0, 0.0, 3.0)
    assert c.status == xval.PASS and math.isnan(c.z)
    assert xval._compare("x", 1.0, 0.9, 0.0, 3.0).status == xval.FAIL
