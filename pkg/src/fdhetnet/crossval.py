"""Run the analytical and Monte Carlo engines side by side and compare at 3σ."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from . import analysis, montecarlo
from .model import DuplexMode, NetworkConfig, db_to_linear
from .quadrature import DEFAULT_SETTINGS, QuadratureSettings

PASS, FAIL, SKIP = "pass", "fail", "skip"


@dataclass(frozen=True)
class CrossvalSpec:
    """Which checks to run.

    The delay check defaults to τ = -10 dB on every tier: near τ = 0 dB the
    per-link delay of far HD users has infinite variance, so a sample mean
    carries no usable σ there.  ``delay_tau_db=None`` keeps the config's own
    thresholds; the check is then skipped if that variance is infinite.
    """

    r_grid: tuple[float, ...] = (25.0, 50.0, 100.0, 200.0, 400.0)
    success_tier: int = 0
    delay_tau_db: float | None = -10.0
    delay_links: int = 4000
    delay_cap: float = 1e4
    n_sigma: float = 3.0


@dataclass(frozen=True)
class Check:
    name: str
    analytical: float
    monte_carlo: float
    sigma: float
    status: str
    note: str = ""

    @property
    def z(self) -> float:
        if self.sigma > 0 and math.isfinite(self.analytical) and math.isfinite(self.monte_carlo):
            return (self.monte_carlo - self.analytical) / self.sigma
        return math.nan


@dataclass
class CrossvalReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.status != FAIL for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if c.status == FAIL]

    def format(self) -> str:
        lines = [f"{'check':<34} {'analytical':>14} {'monte carlo':>14} {'sigma':>11} {'z':>7}  status"]
        for c in self.checks:
            z = f"{c.z:7.2f}" if math.isfinite(c.z) else f"{'-':>7}"
            lines.append(f"{c.name:<34} {c.analytical:>14.6g} {c.monte_carlo:>14.6g} {c.sigma:>11.3g} {z}  "
                         f"{c.status}{'  (' + c.note + ')' if c.note else ''}")
        n_fail = len(self.failures())
        lines.append(f"{len(self.checks)} checks, {n_fail} failed")
        return "\n".join(lines)


def _compare(name, a, m, sigma, n_sigma, note=""):
    if sigma > 0:
        ok = abs(m - a) <= n_sigma * sigma
    else:
        ok = abs(m - a) <= 1e-12
        note = note or "zero variance, exact match required"
    return Check(name, a, m, sigma, PASS if ok else FAIL, note)


def crossval(config: NetworkConfig, settings: montecarlo.SimulationSettings | None = None,
             spec: CrossvalSpec = CrossvalSpec(), qsettings: QuadratureSettings = DEFAULT_SETTINGS,
             mc_config: NetworkConfig | None = None) -> CrossvalReport:
    """Association, pinned-r success probability and local delay, both engines.

    ``mc_config`` lets the simulator run on a different configuration than
    the analysis (a mutation test: the report should then show failures).
    """
    settings = settings or montecarlo.SimulationSettings()
    mc_cfg = mc_config if mc_config is not None else config
    report = CrossvalReport()
    ns = spec.n_sigma

    assoc = analysis.association_probabilities(config, qsettings)
    est = montecarlo.estimate_association(mc_cfg, settings)
    for k in range(config.n_tiers):
        for label, a, m in (("A", assoc.a_total[k], est.freq_total[k]),
                            ("A_FD", assoc.a_fd[k], est.freq_fd[k]),
                            ("A_HD", assoc.a_hd[k], est.freq_hd[k])):
            report.checks.append(_compare(f"association {label} tier {k + 1}", a, m, est.stderr(a), ns))

    k = spec.success_tier
    for r in spec.r_grid:
        for mode in DuplexMode:
            name = f"P_suc tier {k + 1} r={r:g} m {mode.name}"
            a = analysis.success_probability(config, k, r, mode, qsettings)
            try:
                e = montecarlo.estimate_success_probability(mc_cfg, settings, k, r, mode)
            except montecarlo.InsufficientGuard as exc:
                report.checks.append(Check(name, a, math.nan, math.nan, FAIL, str(exc)))
                continue
            n = e.n_trials
            sigma = max(e.stderr, math.sqrt(a * (1.0 - a) / n))
            report.checks.append(_compare(name, a, e.value, sigma, ns,
                                          f"edge bias ≤ {e.edge_bias:.1e}" if e.edge_bias else ""))

    dcfg, dmc = config, mc_cfg
    if spec.delay_tau_db is not None:
        tau = db_to_linear(spec.delay_tau_db)
        dcfg = config.with_all_tiers(sir_threshold=tau)
        dmc = mc_cfg.with_all_tiers(sir_threshold=tau)
    dset = replace(settings, n_realizations=spec.delay_links, delay_cap=spec.delay_cap)
    res = analysis.delay(dcfg, settings=qsettings)
    mc = montecarlo.estimate_local_delay(dmc, dset)
    where = f" τ={spec.delay_tau_db:g} dB" if spec.delay_tau_db is not None else ""
    for mode, an, me in ((DuplexMode.FD, res.fd, mc.fd), (DuplexMode.HD, res.hd, mc.hd)):
        name = f"delay {mode.name}{where}"
        if an.diverged:
            ok = me.truncated_fraction > 0
            report.checks.append(Check(name, math.inf, me.value, me.stderr, PASS if ok else FAIL,
                                       f"analysis diverged; MC truncated fraction {me.truncated_fraction:.3g}"))
        elif not analysis.delay_variance_finite(dcfg, mode, qsettings):
            report.checks.append(Check(name, an.value, me.value, me.stderr, SKIP,
                                       "per-link delay has infinite variance, σ meaningless"))
        else:
            report.checks.append(_compare(name, an.value, me.value, me.stderr, ns,
                                          f"truncated {me.truncated_fraction:.3g}" if me.truncated_fraction else ""))
    return report
