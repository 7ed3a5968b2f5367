"""Association, success probability, local delay and energy efficiency.

Distances are in meters, densities in points per m², powers in watts.  Tiers
are indexed from 0.  All heavy lifting is cached per (config, settings), both
of which are frozen and hashable.

Two independent routes to the local delay exist:

* :func:`local_delay` integrates ``f_k(r) / P_suc(r)`` numerically for any mix
  of path-loss exponents, with the interference integrals computed by
  quadrature.
* :func:`special_case_delay` needs a single exponent everywhere; the HD part
  is then closed form and the FD part a short finite integral, with the
  interference integrals taken from the hypergeometric form of :func:`rho`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .model import DuplexMode, NetworkConfig
from .quadrature import (DEFAULT_SETTINGS, NonFinite, QuadratureSettings, QuadResult,
                         integrate_finite, integrate_semi_infinite)

DEFAULT_CEILING = 1e9


class AnalysisError(ValueError):
    pass


class DegenerateTier(AnalysisError):
    """A tier that never serves anyone (zero association weight)."""


class AlphaMismatch(AnalysisError):
    pass


class ThresholdMismatch(AnalysisError):
    pass


# ---------------------------------------------------------------- geometry

def exclusion_radius(config: NetworkConfig, k: int, j: int, r):
    """Closest possible tier-j interferer for a user served by tier k at r."""
    tk, tj = config.tiers[k], config.tiers[j]
    r = np.asarray(r, dtype=float)
    out = (tj.tx_power / tk.tx_power * r ** tk.pathloss_alpha) ** (1.0 / tj.pathloss_alpha)
    return out if out.ndim else float(out)


def _log_excl_sq(config: NetworkConfig, k: int, j: int, log_r):
    tk, tj = config.tiers[k], config.tiers[j]
    return (2.0 / tj.pathloss_alpha) * (math.log(tj.tx_power / tk.tx_power)
                                         + tk.pathloss_alpha * log_r)


def _log_assoc_density(config: NetworkConfig, k: int, r):
    """log of 2πλ_k r exp(-π Σ_j λ_j e_kj(r)²), the unnormalized distance law."""
    r = np.asarray(r, dtype=float)
    flat = np.atleast_1d(r)
    out = np.full(flat.shape, -np.inf)
    pos = flat > 0
    lr = np.log(flat[pos])
    void = sum(tj.density * np.exp(_log_excl_sq(config, k, j, lr))
               for j, tj in enumerate(config.tiers))
    out[pos] = math.log(2.0 * math.pi * config.tiers[k].density) + lr - math.pi * void
    return out.reshape(r.shape)


def _assoc_scale(config: NetworkConfig, k: int) -> float:
    return 1.0 / math.sqrt(math.pi * config.tiers[k].density)


# ------------------------------------------------------------- association

@lru_cache(maxsize=512)
def _association_part(config: NetworkConfig, k: int, part: str,
                      settings: QuadratureSettings) -> QuadResult:
    theta = config.tiers[k].fd_distance

    def f(r):
        return np.exp(_log_assoc_density(config, k, r))

    scale = _assoc_scale(config, k)
    if part == "fd":
        return integrate_finite(f, 0.0, theta, settings)
    if part == "hd":
        return integrate_semi_infinite(f, theta, settings, scale=max(scale, theta))
    return integrate_semi_infinite(f, 0.0, settings, scale=scale)


def association_fd(config: NetworkConfig, k: int, settings=DEFAULT_SETTINGS) -> float:
    return _association_part(config, k, "fd", settings).value


def association_hd(config: NetworkConfig, k: int, settings=DEFAULT_SETTINGS) -> float:
    return _association_part(config, k, "hd", settings).value


def association_total(config: NetworkConfig, k: int, settings=DEFAULT_SETTINGS) -> float:
    # Integrated over the full range on its own, so that FD + HD = total is a
    # genuine consistency check rather than an identity.
    return _association_part(config, k, "total", settings).value


@dataclass(frozen=True)
class AssociationProbabilities:
    a_fd: tuple[float, ...]
    a_hd: tuple[float, ...]
    a_total: tuple[float, ...]
    err_fd: tuple[float, ...]
    err_hd: tuple[float, ...]
    err_total: tuple[float, ...]

    def weight(self, k: int, mode: DuplexMode) -> float:
        return self.a_fd[k] if mode is DuplexMode.FD else self.a_hd[k]

    def weight_error(self, k: int, mode: DuplexMode) -> float:
        return self.err_fd[k] if mode is DuplexMode.FD else self.err_hd[k]


@lru_cache(maxsize=256)
def association_probabilities(config: NetworkConfig,
                              settings: QuadratureSettings = DEFAULT_SETTINGS) -> AssociationProbabilities:
    parts = {p: [_association_part(config, k, p, settings) for k in range(config.n_tiers)]
             for p in ("fd", "hd", "total")}
    return AssociationProbabilities(
        a_fd=tuple(q.value for q in parts["fd"]),
        a_hd=tuple(q.value for q in parts["hd"]),
        a_total=tuple(q.value for q in parts["total"]),
        err_fd=tuple(q.error for q in parts["fd"]),
        err_hd=tuple(q.error for q in parts["hd"]),
        err_total=tuple(q.error for q in parts["total"]),
    )


def fd_user_density(config: NetworkConfig, j: int, settings=DEFAULT_SETTINGS) -> float:
    """Density of FD uplink interferers attached to tier j: (A_j^FD/A_j)(1-χ_j)λ_u."""
    assoc = association_probabilities(config, settings)
    if assoc.a_total[j] <= 0.0:
        raise DegenerateTier(f"tier {j + 1} never wins association (A = 0)")
    return assoc.a_fd[j] / assoc.a_total[j] * (1.0 - config.tiers[j].silence_prob) * config.user.density


def fd_distance_pdf(config: NetworkConfig, k: int, r, settings=DEFAULT_SETTINGS):
    """Serving-distance pdf of a tier-k user conditioned on being in FD mode."""
    a_fd = association_probabilities(config, settings).a_fd[k]
    if a_fd <= 0.0:
        raise DegenerateTier(f"tier {k + 1} has no FD users (A_FD = 0)")
    r = np.asarray(r, dtype=float)
    pdf = np.exp(_log_assoc_density(config, k, r)) / a_fd
    out = np.where(r <= config.tiers[k].fd_distance, pdf, 0.0)
    return out if out.ndim else float(out)


# ------------------------------------------------------------ interference

def rho(q, alpha):
    """∫_1^∞ q / (q + u^{α/2}) du, via the Gauss hypergeometric function.

    With p = α/(α-2) the integral is (2/(α-2)) q ∫_0^1 dt / (1 + q t^p).  For
    q ≤ 1 that inner integral is 2F1(1, 1/p; 1+1/p; -q); for q > 1 it is
    rewritten around the complete integral (π/p)/sin(π/p) so the series
    argument stays inside the unit disk.
    """
    q = np.asarray(q, dtype=float)
    alpha = float(alpha)
    p = alpha / (alpha - 2.0)
    b = 2.0 / (alpha - 2.0)
    out = np.empty_like(q)
    small = q <= 1.0
    qs = q[small]
    out[small] = b * qs * special.hyp2f1(1.0, 1.0 / p, 1.0 + 1.0 / p, -qs)
    ql = q[~small]
    if ql.size:
        x = ql ** (1.0 / p)
        complete = (math.pi / p) / math.sin(math.pi / p)
        tail = x ** (1.0 - p) / (p - 1.0) * special.hyp2f1(1.0, 1.0 - 1.0 / p, 2.0 - 1.0 / p, -1.0 / ql)
        out[~small] = b * ql * (complete - tail) / x
    return out if out.ndim else float(out)


@lru_cache(maxsize=4096)
def rho_quad(q: float, alpha: float, settings: QuadratureSettings = DEFAULT_SETTINGS) -> QuadResult:
    """Same integral as :func:`rho`, by adaptive quadrature."""
    q, alpha = float(q), float(alpha)
    if q == 0.0:
        return QuadResult(0.0, 0.0)
    half = alpha / 2.0

    def f(u):
        return q / (q + u ** half)

    return integrate_semi_infinite(f, 1.0, settings, scale=max(1.0, q ** (1.0 / half)),
                                   power=2.0 / (alpha - 2.0))


def _log_success(config: NetworkConfig, k: int, r, mode: DuplexMode,
                 settings: QuadratureSettings, rho_const) -> np.ndarray:
    tk = config.tiers[k]
    user = config.user
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if tk.silence_prob >= 1.0:
        return np.full(r.shape, -np.inf)
    out = np.full(r.shape, math.log1p(-tk.silence_prob))
    pos = r > 0
    if not np.any(pos):
        return out
    lr = np.log(r[pos])
    log_s = math.log(tk.sir_threshold / tk.tx_power) + tk.pathloss_alpha * lr
    loss = np.zeros(lr.shape)
    if mode is DuplexMode.FD and user.si_residual > 0:
        loss += np.exp(log_s) * user.si_residual * user.tx_power
    for j, tj in enumerate(config.tiers):
        log_e2 = _log_excl_sq(config, k, j, lr)
        e2 = np.exp(log_e2)
        if tj.silence_prob < 1.0:
            loss += math.pi * (1.0 - tj.silence_prob) * tj.density * e2 * \
                rho_const(tk.sir_threshold, tj.pathloss_alpha)
        lam_fd = fd_user_density(config, j, settings)
        if lam_fd > 0.0:
            if user.pathloss_alpha == tj.pathloss_alpha == tk.pathloss_alpha:
                # q = s p_u e^{-α} collapses to τ p_u / p_j when exponents agree.
                ru = rho_const(tk.sir_threshold * user.tx_power / tj.tx_power, user.pathloss_alpha)
            else:
                q = np.exp(log_s + math.log(user.tx_power) - 0.5 * user.pathloss_alpha * log_e2)
                ru = rho(q, user.pathloss_alpha)
            loss += math.pi * lam_fd * e2 * ru
    out[pos] -= loss
    return out


def _quad_rho_const(settings):
    return lambda q, alpha: rho_quad(q, alpha, settings).value


def success_probability(config: NetworkConfig, k: int, r, mode: DuplexMode,
                        settings: QuadratureSettings = DEFAULT_SETTINGS):
    """Per-slot success probability of a tier-k link of length r."""
    scalar = np.ndim(r) == 0
    out = np.exp(_log_success(config, k, r, mode, settings, _quad_rho_const(settings)))
    return float(out[0]) if scalar else out


# ------------------------------------------------------------ local delay

@dataclass(frozen=True)
class ModeDelay:
    """Local delay of one duplex mode.

    ``value`` sums the per-tier integrals against the unnormalized distance
    law, so it is the mode's share of the overall delay.  ``tier_values``
    hold the per-tier delays conditioned on the tier and mode (divided by
    A_k^FD or A_k^HD); they are nan where that weight is zero.
    """

    mode: DuplexMode
    value: float
    error: float
    diverged: bool
    tier_values: tuple[float, ...]
    tier_errors: tuple[float, ...]
    tier_diverged: tuple[bool, ...]
    tier_weights: tuple[float, ...]

    @property
    def conditional(self) -> float:
        """Delay of a user known to be in this mode."""
        w = sum(self.tier_weights)
        return self.value / w if w > 0 else math.nan


def _tail_diverges(logg, start: float) -> bool:
    """True when log g(r) decays slower than -log r far out (integral diverges)."""
    r = start * np.logspace(6.0, 9.0, 4)
    with np.errstate(all="ignore"):
        v = np.asarray(logg(r), dtype=float)
    if np.any(np.isnan(v)) or v[-1] == np.inf:
        return True
    if v[-1] == -np.inf:
        return False
    slope = np.diff(v) / np.diff(np.log(r))
    return bool(slope[-1] > -1.0)


def _finish(mode, config, assoc, raw, ceiling) -> ModeDelay:
    """Normalize per-tier integrals and apply the ceiling; raw[k] = (value, err) or None."""
    values, errors, flags, weights = [], [], [], []
    total, total_err, any_div = 0.0, 0.0, False
    for k, item in enumerate(raw):
        w = assoc.weight(k, mode)
        werr = assoc.weight_error(k, mode)
        weights.append(w)
        if w <= 0.0:
            values.append(math.nan)
            errors.append(math.nan)
            flags.append(False)
            continue
        if item is None:
            values.append(math.inf)
            errors.append(math.nan)
            flags.append(True)
            any_div = True
            continue
        v, e = item
        d = v / w
        if not math.isfinite(d) or d > ceiling:
            values.append(math.inf)
            errors.append(math.nan)
            flags.append(True)
            any_div = True
            continue
        values.append(d)
        errors.append(e / w + abs(d) * werr / w)
        flags.append(False)
        total += v
        total_err += e
    if any_div or total > ceiling:
        total, total_err, any_div = math.inf, math.nan, True
    return ModeDelay(mode, total, total_err, any_div, tuple(values), tuple(errors),
                     tuple(flags), tuple(weights))


@lru_cache(maxsize=512)
def local_delay(config: NetworkConfig, mode: DuplexMode,
                settings: QuadratureSettings = DEFAULT_SETTINGS,
                ceiling: float = DEFAULT_CEILING) -> ModeDelay:
    """Local delay of ``mode`` by direct integration of f_k(r)/P_suc(r)."""
    assoc = association_probabilities(config, settings)
    rho_const = _quad_rho_const(settings)
    raw = []
    for k, tk in enumerate(config.tiers):
        if assoc.weight(k, mode) <= 0.0:
            raw.append((0.0, 0.0))
            continue
        if tk.silence_prob >= 1.0:
            raw.append(None)
            continue

        def logg(r, k=k):
            return _log_assoc_density(config, k, r) - _log_success(config, k, r, mode, settings, rho_const)

        def g(r, logg=logg):
            return np.exp(logg(r))

        theta = tk.fd_distance
        try:
            if mode is DuplexMode.FD:
                res = integrate_finite(g, 0.0, theta, settings)
            else:
                start = max(theta, _assoc_scale(config, k))
                if _tail_diverges(logg, start):
                    raw.append(None)
                    continue
                res = integrate_semi_infinite(g, theta, settings, scale=start)
        except NonFinite:
            raw.append(None)
            continue
        raw.append((res.value, res.error))
    return _finish(mode, config, assoc, raw, ceiling)


def interference_coefficient(config: NetworkConfig, k: int,
                             settings: QuadratureSettings = DEFAULT_SETTINGS) -> float:
    """Net Gaussian rate of the HD delay integrand when every exponent is equal.

    The HD integrand of tier k is 2πλ_k r exp(-π c r²)/(1-χ_k) with c the value
    returned here; c ≤ 0 means the HD delay of every tier with this threshold
    is infinite.
    """
    alpha = config.common_alpha
    if alpha is None:
        raise AlphaMismatch("closed form needs one path-loss exponent for all tiers and users")
    tk = config.tiers[k]
    tau = tk.sir_threshold
    rho_bs = rho(tau, alpha)
    c = 0.0
    for j, tj in enumerate(config.tiers):
        rho_u = rho(tau * config.user.tx_power / tj.tx_power, alpha)
        bracket = tj.density * (1.0 - (1.0 - tj.silence_prob) * rho_bs) \
            - fd_user_density(config, j, settings) * rho_u
        c += (tj.tx_power / tk.tx_power) ** (2.0 / alpha) * bracket
    return c


@lru_cache(maxsize=512)
def special_case_delay(config: NetworkConfig, mode: DuplexMode,
                       settings: QuadratureSettings = DEFAULT_SETTINGS,
                       ceiling: float = DEFAULT_CEILING) -> ModeDelay:
    """Local delay of ``mode`` when all path-loss exponents coincide."""
    alpha = config.common_alpha
    if alpha is None:
        raise AlphaMismatch("closed form needs one path-loss exponent for all tiers and users")
    assoc = association_probabilities(config, settings)
    user = config.user
    raw = []
    for k, tk in enumerate(config.tiers):
        if assoc.weight(k, mode) <= 0.0:
            raw.append((0.0, 0.0))
            continue
        if tk.silence_prob >= 1.0:
            raw.append(None)
            continue
        c = interference_coefficient(config, k, settings)
        active = 1.0 - tk.silence_prob
        theta = tk.fd_distance
        if mode is DuplexMode.HD:
            if c <= 0.0:
                raw.append(None)
                continue
            raw.append((tk.density * math.exp(-math.pi * c * theta ** 2) / (active * c), 0.0))
            continue
        si = tk.sir_threshold * user.si_residual * user.tx_power / tk.tx_power
        pref = 2.0 * math.pi * tk.density / active

        def g(r):
            return pref * r * np.exp(si * r ** alpha - math.pi * c * r * r)

        try:
            res = integrate_finite(g, 0.0, theta, settings)
        except NonFinite:
            raw.append(None)
            continue
        raw.append((res.value, res.error))
    return _finish(mode, config, assoc, raw, ceiling)


@dataclass(frozen=True)
class TierDelay:
    d_fd: float
    d_hd: float
    d_total: float
    diverged: bool


@dataclass(frozen=True)
class DelayResult:
    fd: ModeDelay
    hd: ModeDelay
    per_tier: tuple[TierDelay, ...]

    @property
    def d_fd(self) -> float:
        return self.fd.value

    @property
    def d_hd(self) -> float:
        return self.hd.value


def per_tier_delay(config: NetworkConfig, fd: ModeDelay | None = None, hd: ModeDelay | None = None,
                   settings: QuadratureSettings = DEFAULT_SETTINGS) -> tuple[TierDelay, ...]:
    """Delay of each tier's users, mixing the FD and HD parts by their weights."""
    fd = fd if fd is not None else local_delay(config, DuplexMode.FD, settings)
    hd = hd if hd is not None else local_delay(config, DuplexMode.HD, settings)
    assoc = association_probabilities(config, settings)
    out = []
    for k in range(config.n_tiers):
        wf, wh = assoc.a_fd[k], assoc.a_hd[k]
        parts = [(w, m.tier_values[k], m.tier_diverged[k]) for w, m in ((wf, fd), (wh, hd)) if w > 0.0]
        diverged = any(flag for _, _, flag in parts)
        if diverged:
            d = math.inf
        elif parts:
            d = sum(w * v for w, v, _ in parts) / sum(w for w, _, _ in parts)
        else:
            d = math.nan
        out.append(TierDelay(fd.tier_values[k], hd.tier_values[k], d, diverged))
    return tuple(out)


def delay(config: NetworkConfig, method: str = "general",
          settings: QuadratureSettings = DEFAULT_SETTINGS,
          ceiling: float = DEFAULT_CEILING) -> DelayResult:
    """Both mode delays plus the per-tier split; method is 'general' or 'special'."""
    if method == "general":
        fn = local_delay
    elif method == "special":
        fn = special_case_delay
    else:
        raise ValueError(f"unknown method {method!r}")
    fd = fn(config, DuplexMode.FD, settings, ceiling)
    hd = fn(config, DuplexMode.HD, settings, ceiling)
    return DelayResult(fd, hd, per_tier_delay(config, fd, hd, settings))


def delay_variance_finite(config: NetworkConfig, mode: DuplexMode,
                          settings: QuadratureSettings = DEFAULT_SETTINGS) -> bool:
    """Whether E[1/P_suc²] over serving distances is finite for ``mode``.

    When it is not, a sample mean of per-link delays has no usable standard
    error even though the mean itself may exist.
    """
    rho_const = _quad_rho_const(settings)
    assoc = association_probabilities(config, settings)
    for k, tk in enumerate(config.tiers):
        if assoc.weight(k, mode) <= 0.0:
            continue
        if tk.silence_prob >= 1.0:
            return False
        if mode is DuplexMode.FD:
            continue

        def logg(r, k=k):
            return _log_assoc_density(config, k, r) - 2.0 * _log_success(config, k, r, mode, settings,
                                                                          rho_const)

        if _tail_diverges(logg, max(tk.fd_distance, _assoc_scale(config, k))):
            return False
    return True


# ------------------------------------------------------- energy efficiency

@dataclass(frozen=True)
class EnergyResult:
    throughput_fd: float
    throughput_hd: float
    power_area: float
    eta: float


def _delay_value(d) -> float:
    if isinstance(d, ModeDelay):
        return math.inf if d.diverged else d.value
    return float(d)


def energy_efficiency(config: NetworkConfig, delay_fd, delay_hd,
                      settings: QuadratureSettings = DEFAULT_SETTINGS) -> EnergyResult:
    """Throughput per watt.  Delays may be ModeDelay objects or plain numbers;
    an infinite or nan delay is treated as diverged and earns no throughput."""
    tau = config.common_threshold
    if tau is None:
        raise ThresholdMismatch("energy efficiency needs a single SIR threshold shared by all tiers")
    assoc = association_probabilities(config, settings)
    rate = math.log1p(tau)
    through = {}
    power = 0.0
    for mode, d in ((DuplexMode.FD, delay_fd), (DuplexMode.HD, delay_hd)):
        d = _delay_value(d)
        active_share = 0.0
        for k, tk in enumerate(config.tiers):
            share = assoc.weight(k, mode) / assoc.a_total[k] if assoc.a_total[k] > 0 else 0.0
            active_share += (1.0 - tk.silence_prob) * share
            on = tk.power_static + tk.power_slope * tk.tx_power + mode.indicator * config.user.p_sic
            power += share * ((1.0 - tk.silence_prob) * on + tk.silence_prob * tk.power_sleep)
        through[mode] = rate * active_share / d if math.isfinite(d) and d > 0 else 0.0
    num = through[DuplexMode.FD] + through[DuplexMode.HD]
    if power > 0:
        eta = num / power
    else:
        eta = 0.0 if num == 0 else math.inf
    return EnergyResult(through[DuplexMode.FD], through[DuplexMode.HD], power, eta)
