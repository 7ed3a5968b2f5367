"""Monte Carlo counterpart of the analysis module.

Two layers live here.

Explicit realizations (:class:`Realization`) hold 2-D base-station and user
points with per-slot activity and fading marks.  They drive association
sampling, the per-slot SIR of :func:`slot_sir`, and the slower exploratory
paths (quenched geometry, interferers taken from the realization's own
associated FD users).

The default estimators use an annealed radial kernel instead.  For a typical
user at the origin served at distance r by tier k, tier-j interferers form a
PPP outside the exclusion radius e_kj(r).  Interference only depends on their
distances, so each trial draws a Poisson count per population and radii with
y² uniform on [e², R²].  R is chosen per population so the neglected
interference beyond it shifts the success probability by at most
``edge_tol`` (the bound is returned as ``edge_bias``), capped at
``window_radius``.

Randomness is split into Philox streams keyed by (seed, purpose, round,
chunk).  Chunk boundaries depend only on the workload, so serial and
parallel runs produce bit-identical results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.spatial import cKDTree

from . import analysis
from .model import DuplexMode, NetworkConfig

_TAG_SUCCESS = 1
_TAG_ASSOC = 2
_TAG_LINKS = 3
_TAG_DELAY = 4
_TAG_REALIZATION = 5

# Upper bound on expected interferer points handled by one chunk.
_POINTS_PER_CHUNK = 2_000_000
_MAX_TRIALS_PER_CHUNK = 50_000
_ASSOC_CHUNK = 500

FD_USER_MODELS = ("thinned", "associated")
DELAY_ESTIMATORS = ("first_success", "inverse_frequency")


class MonteCarloError(RuntimeError):
    pass


class InsufficientGuard(MonteCarloError):
    pass


class EmptyRealization(MonteCarloError):
    pass


@dataclass(frozen=True)
class SimulationSettings:
    """Knobs of the simulator.

    ``guard_radius`` defaults to ten times the 99th-percentile distance to the
    nearest base station of the sparsest tier, and ``window_radius`` to ten
    times the guard radius.  The window is only a cap; see the module
    docstring for how the sampled radius is chosen.

    ``fd_user_model`` picks where FD uplink interferers come from: "thinned"
    draws them as a PPP of density (A_j^FD/A_j)(1-χ_j)λ_u outside e_kj(r), the
    same approximation the analysis makes; "associated" uses the users of an
    explicit realization that associate and select FD themselves.
    """

    n_realizations: int = 10_000
    n_slots_per_realization: int = 1
    rng_seed: int = 0
    window_radius: float | None = None
    guard_radius: float | None = None
    delay_cap: float = 1e6
    edge_tol: float = 1e-3
    fd_user_model: str = "thinned"
    quenched: bool = False
    delay_estimator: str = "first_success"
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_realizations < 1 or self.n_slots_per_realization < 1:
            raise ValueError("realization and slot counts must be at least 1")
        if not 0 <= int(self.rng_seed) < 2 ** 64:
            raise ValueError("rng_seed must fit in 64 bits")
        if self.guard_radius is not None and not self.guard_radius > 0:
            raise ValueError("guard_radius must be positive")
        if self.window_radius is not None and self.guard_radius is not None \
                and not self.window_radius > self.guard_radius:
            raise ValueError("window_radius must exceed guard_radius")
        if self.window_radius is not None and not self.window_radius > 0:
            raise ValueError("window_radius must be positive")
        if not self.delay_cap >= 1:
            raise ValueError("delay_cap must be at least one slot")
        if not 0 < self.edge_tol < 1:
            raise ValueError("edge_tol must lie in (0, 1)")
        if self.fd_user_model not in FD_USER_MODELS:
            raise ValueError(f"fd_user_model must be one of {FD_USER_MODELS}")
        if self.delay_estimator not in DELAY_ESTIMATORS:
            raise ValueError(f"delay_estimator must be one of {DELAY_ESTIMATORS}")

    def resolved(self, config: NetworkConfig) -> "SimulationSettings":
        guard = self.guard_radius
        if guard is None:
            sparsest = min(t.density for t in config.tiers)
            guard = 10.0 * math.sqrt(-math.log(0.01) / (math.pi * sparsest))
        window = self.window_radius if self.window_radius is not None else 10.0 * guard
        if not window > guard:
            raise ValueError(f"window_radius {window} must exceed guard_radius {guard}")
        return replace(self, guard_radius=guard, window_radius=window)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *key])))


def _run(jobs, n_jobs: int):
    if n_jobs == 1 or len(jobs) <= 1:
        return [fn(*args) for fn, args in jobs]
    return Parallel(n_jobs=n_jobs)(delayed(fn)(*args) for fn, args in jobs)


# ------------------------------------------------------ explicit realizations

def sample_ppp(density: float, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous PPP on the disk of ``radius`` around the origin, shape (n, 2)."""
    if density < 0 or not radius > 0:
        raise ValueError("need density >= 0 and radius > 0")
    n = rng.poisson(density * math.pi * radius * radius) if density > 0 else 0
    rad = radius * np.sqrt(rng.random(n))
    ang = 2.0 * math.pi * rng.random(n)
    return np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])


def select_mode(r: float, fd_distance: float) -> DuplexMode:
    return DuplexMode.FD if r <= fd_distance else DuplexMode.HD


@dataclass(frozen=True)
class Association:
    tier: int
    index: int
    distance: float


@dataclass
class Realization:
    """One network snapshot plus ``n_slots`` slots of marks.

    Per tier j: ``bs[j]`` positions (n_j, 2), ``bs_active[j]`` and
    ``bs_fading[j]`` of shape (n_slots, n_j).  The fading entry is the gain of
    that BS's channel to the observation point.  Users carry their serving
    tier/index (-1 for the analytical PPP stand-ins), FD flag, per-slot
    transmit marks and fading.
    """

    bs: tuple[np.ndarray, ...]
    bs_active: tuple[np.ndarray, ...]
    bs_fading: tuple[np.ndarray, ...]
    users: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    user_tier: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    user_bs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    user_fd: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    user_active: np.ndarray = field(default_factory=lambda: np.zeros((1, 0), dtype=bool))
    user_fading: np.ndarray = field(default_factory=lambda: np.zeros((1, 0)))
    serving: Association | None = None

    @property
    def n_slots(self) -> int:
        return self.bs_active[0].shape[0]


def _draw_bs_marks(config, bs, rng, n_slots):
    active = tuple(rng.random((n_slots, len(p))) >= t.silence_prob for t, p in zip(config.tiers, bs))
    fading = tuple(rng.standard_exponential((n_slots, len(p))) for p in bs)
    return active, fading


def _nearest_per_tier(bs, points):
    """Distance and index of the nearest BS of every tier for each point."""
    dist, idx = [], []
    for p in bs:
        if len(p) == 0:
            dist.append(np.full(len(points), np.inf))
            idx.append(np.full(len(points), -1))
            continue
        d, i = cKDTree(p).query(points)
        dist.append(np.asarray(d, dtype=float))
        idx.append(np.asarray(i))
    return np.array(dist), np.array(idx)


def _best_tier(config, dist):
    """Max-DRP tier per column of ``dist`` (tiers x points); ties go to the
    smaller distance, then the lower tier."""
    with np.errstate(divide="ignore"):
        logdrp = np.array([math.log(t.tx_power) - t.pathloss_alpha * np.log(d)
                           for t, d in zip(config.tiers, dist)])
    cand = logdrp == logdrp.max(axis=0)
    nearest = np.where(cand, dist, np.inf).min(axis=0)
    return np.argmax(cand & (dist == nearest), axis=0)


def _attach_users(config, bs, bs_active, users, rng, n_slots):
    dist, idx = _nearest_per_tier(bs, users)
    if len(users):
        tier = _best_tier(config, dist)
        cols = np.arange(len(users))
        r = dist[tier, cols]
        bsi = idx[tier, cols]
        theta = np.array([t.fd_distance for t in config.tiers])[tier]
        fd = r <= theta
        active = np.zeros((n_slots, len(users)), dtype=bool)
        for j in range(len(config.tiers)):
            mine = np.flatnonzero((tier == j) & fd)
            if len(mine):
                active[:, mine] = bs_active[j][:, bsi[mine]]
    else:
        tier = np.zeros(0, dtype=int)
        bsi = np.zeros(0, dtype=int)
        fd = np.zeros(0, dtype=bool)
        active = np.zeros((n_slots, 0), dtype=bool)
    fading = rng.standard_exponential((n_slots, len(users)))
    return tier, bsi, fd, active, fading


def sample_network(config: NetworkConfig, radius: float, rng: np.random.Generator,
                   n_slots: int = 1, with_users: bool = True) -> Realization:
    """Unconditioned snapshot on a disk: BSs per tier, users attached by max DRP."""
    bs = tuple(sample_ppp(t.density, radius, rng) for t in config.tiers)
    active, fading = _draw_bs_marks(config, bs, rng, n_slots)
    real = Realization(bs, active, fading)
    if with_users:
        users = sample_ppp(config.user.density, radius, rng)
        real.users = users
        (real.user_tier, real.user_bs, real.user_fd,
         real.user_active, real.user_fading) = _attach_users(config, bs, active, users, rng, n_slots)
    return real


def associate(realization: Realization, config: NetworkConfig,
              position: Sequence[float] = (0.0, 0.0)) -> Association:
    """Serving BS of a user at ``position`` under max average received power."""
    if sum(len(p) for p in realization.bs) == 0:
        raise EmptyRealization("no base station in the realization")
    pos = np.asarray(position, dtype=float).reshape(2)
    dist = np.full((len(realization.bs), 1), np.inf)
    idx = np.full((len(realization.bs), 1), -1)
    for j, p in enumerate(realization.bs):
        if len(p):
            d = np.hypot(p[:, 0] - pos[0], p[:, 1] - pos[1])
            idx[j, 0] = int(np.argmin(d))
            dist[j, 0] = d[idx[j, 0]]
    k = int(_best_tier(config, dist)[0])
    return Association(k, int(idx[k, 0]), float(dist[k, 0]))


def sample_link_realization(config: NetworkConfig, k: int, r: float, radius: float,
                            rng: np.random.Generator, n_slots: int = 1,
                            fd_user_model: str = "thinned") -> Realization:
    """Snapshot conditioned on the origin being served by tier k at distance r.

    The serving BS sits at (r, 0) as index 0 of tier k; other tier-j BSs form a
    PPP outside e_kj(r), which is exactly the conditioning event for a PPP.
    """
    bs = []
    for j, t in enumerate(config.tiers):
        e = analysis.exclusion_radius(config, k, j, r)
        pts = _sample_annulus(t.density, e, radius, rng)
        if j == k:
            pts = np.vstack([[r, 0.0], pts])
        bs.append(pts)
    bs = tuple(bs)
    active, fading = _draw_bs_marks(config, bs, rng, n_slots)
    real = Realization(bs, active, fading, serving=Association(k, 0, float(r)))
    if fd_user_model == "associated":
        users = sample_ppp(config.user.density, radius, rng)
        real.users = users
        (real.user_tier, real.user_bs, real.user_fd,
         real.user_active, real.user_fading) = _attach_users(config, bs, active, users, rng, n_slots)
    else:
        pts, tiers = [], []
        assoc = analysis.association_probabilities(config)
        for j, t in enumerate(config.tiers):
            dens = config.user.density * assoc.a_fd[j] / assoc.a_total[j]
            e = analysis.exclusion_radius(config, k, j, r)
            p = _sample_annulus(dens, e, radius, rng)
            pts.append(p)
            tiers.append(np.full(len(p), j))
        users = np.vstack(pts)
        tier = np.concatenate(tiers).astype(int)
        chi = np.array([t.silence_prob for t in config.tiers])[tier]
        real.users = users
        real.user_tier = tier
        real.user_bs = np.full(len(users), -1)
        real.user_fd = np.ones(len(users), dtype=bool)
        real.user_active = rng.random((n_slots, len(users))) >= chi
        real.user_fading = rng.standard_exponential((n_slots, len(users)))
    return real


def _sample_annulus(density, inner, outer, rng):
    if outer <= inner or density <= 0:
        return np.zeros((0, 2))
    n = rng.poisson(density * math.pi * (outer * outer - inner * inner))
    rad = np.sqrt(inner * inner + rng.random(n) * (outer * outer - inner * inner))
    ang = 2.0 * math.pi * rng.random(n)
    return np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])


def slot_sir(realization: Realization, config: NetworkConfig, serving: Association, t: int,
             position: Sequence[float] = (0.0, 0.0)) -> float:
    """SIR at ``position`` in slot t, served by ``serving``; +inf with no interference."""
    pos = np.asarray(position, dtype=float)
    k = serving.tier
    tk = config.tiers[k]
    mode = select_mode(serving.distance, tk.fd_distance)
    signal = tk.tx_power * realization.bs_fading[k][t, serving.index] * serving.distance ** -tk.pathloss_alpha
    interference = 0.0
    for j, (p, tj) in enumerate(zip(realization.bs, config.tiers)):
        on = realization.bs_active[j][t].copy()
        if j == k:
            on[serving.index] = False
        if on.any():
            d = np.hypot(*(p[on] - pos).T)
            interference += float(np.sum(tj.tx_power * realization.bs_fading[j][t, on] * d ** -tj.pathloss_alpha))
    tx = realization.user_fd & realization.user_active[t]
    if tx.any():
        d = np.hypot(*(realization.users[tx] - pos).T)
        u = config.user
        interference += float(np.sum(u.tx_power * realization.user_fading[t, tx] * d ** -u.pathloss_alpha))
    interference += mode.indicator * config.user.si_residual * config.user.tx_power
    if interference == 0.0:
        return math.inf
    return signal / interference


@dataclass(frozen=True)
class LinkSample:
    tier: int
    distance: float
    mode: DuplexMode
    sir: np.ndarray
    success: np.ndarray


def link_sample(realization: Realization, config: NetworkConfig,
                serving: Association | None = None) -> LinkSample:
    serving = serving or realization.serving or associate(realization, config)
    tk = config.tiers[serving.tier]
    sir = np.array([slot_sir(realization, config, serving, t) for t in range(realization.n_slots)])
    active = realization.bs_active[serving.tier][:, serving.index]
    return LinkSample(serving.tier, serving.distance, select_mode(serving.distance, tk.fd_distance),
                      sir, active & (sir > tk.sir_threshold))


# ------------------------------------------------------ annealed radial kernel

@dataclass(frozen=True)
class _Population:
    density: float
    activity: float
    power: float
    alpha: float
    tier: int


def _populations(config: NetworkConfig) -> list[_Population]:
    assoc = analysis.association_probabilities(config)
    pops = [_Population(t.density, 1.0 - t.silence_prob, t.tx_power, t.pathloss_alpha, j)
            for j, t in enumerate(config.tiers)]
    u = config.user
    for j, t in enumerate(config.tiers):
        dens = u.density * assoc.a_fd[j] / assoc.a_total[j] if assoc.a_total[j] > 0 else 0.0
        pops.append(_Population(dens, 1.0 - t.silence_prob, u.tx_power, u.pathloss_alpha, j))
    return [p for p in pops if p.density > 0 and p.activity > 0]


def _link_geometry(config, pops, k, r, window, edge_tol):
    """Inner/outer radii per population for links (k[i], r[i]) plus the edge bound."""
    k = np.asarray(k)
    r = np.asarray(r, dtype=float)
    p_k = np.array([t.tx_power for t in config.tiers])[k]
    a_k = np.array([t.pathloss_alpha for t in config.tiers])[k]
    tau_k = np.array([t.sir_threshold for t in config.tiers])[k]
    s = tau_k * r ** a_k / p_k
    share = edge_tol / max(len(pops), 1)
    inner, outer, bias = [], [], np.zeros(len(r))
    for pop in pops:
        p_j = config.tiers[pop.tier].tx_power
        a_j = config.tiers[pop.tier].pathloss_alpha
        e = (p_j / p_k * r ** a_k) ** (1.0 / a_j)
        lam = pop.density * pop.activity
        with np.errstate(divide="ignore"):
            need = (2.0 * math.pi * lam * s * pop.power / ((pop.alpha - 2.0) * share)) ** (1.0 / (pop.alpha - 2.0))
        rad = np.maximum(np.minimum(need, window), e)
        bias += 2.0 * math.pi * lam * s * pop.power * rad ** (2.0 - pop.alpha) / (pop.alpha - 2.0)
        inner.append(e)
        outer.append(rad)
    return inner, outer, -np.expm1(-bias)


def _expected_points(pops, inner, outer, n_slots, n):
    tot = np.zeros(n)
    for pop, e, R in zip(pops, inner, outer):
        lam = pop.density * (pop.activity if n_slots == 1 else 1.0)
        tot = tot + lam * math.pi * (R * R - e * e)
    return tot


def _interference(rng, pops, inner, outer, n, n_slots):
    """Aggregate interference, shape (n_slots, n_trials).

    With one slot only active points are drawn; with several, the geometry is
    shared across the slots and activity is re-drawn per slot.
    """
    out = np.zeros((n_slots, n))
    for pop, e, R in zip(pops, inner, outer):
        lam = pop.density * pop.activity if n_slots == 1 else pop.density
        span = R * R - e * e
        counts = rng.poisson(lam * math.pi * span)
        tot = int(counts.sum())
        if tot == 0:
            continue
        owner = np.repeat(np.arange(n), counts)
        y2 = (e * e)[owner] + rng.random(tot) * span[owner]
        gain = pop.power * y2 ** (-0.5 * pop.alpha)
        for t in range(n_slots):
            w = gain * rng.standard_exponential(tot)
            if n_slots > 1 and pop.activity < 1.0:
                w = w * (rng.random(tot) < pop.activity)
            out[t] += np.bincount(owner, weights=w, minlength=n)
    return out


def _success_chunk(config, pops, k, r, fd, window, edge_tol, n_slots, seed, key):
    """Success indicators (n_slots, n_trials) for links (k[i], r[i], fd[i])."""
    rng = _stream(seed, *key)
    inner, outer, _ = _link_geometry(config, pops, k, r, window, edge_tol)
    interf = _interference(rng, pops, inner, outer, len(r), n_slots)
    k = np.asarray(k)
    r = np.asarray(r, dtype=float)
    p_k = np.array([t.tx_power for t in config.tiers])[k]
    a_k = np.array([t.pathloss_alpha for t in config.tiers])[k]
    tau_k = np.array([t.sir_threshold for t in config.tiers])[k]
    chi_k = np.array([t.silence_prob for t in config.tiers])[k]
    u = config.user
    noise = np.where(fd, u.si_residual * u.tx_power, 0.0)
    h = rng.standard_exponential((n_slots, len(r)))
    on = rng.random((n_slots, len(r))) >= chi_k
    with np.errstate(divide="ignore"):
        signal = p_k * h * r ** (-a_k)
    return on & (signal > tau_k * (interf + noise))


def _chunks_by_points(points_per_trial: np.ndarray):
    """Split trial indices into consecutive chunks of bounded expected work."""
    bounds = [0]
    acc = 0.0
    for i, w in enumerate(points_per_trial):
        if i > bounds[-1] and (acc + w > _POINTS_PER_CHUNK or i - bounds[-1] >= _MAX_TRIALS_PER_CHUNK):
            bounds.append(i)
            acc = 0.0
        acc += w
    bounds.append(len(points_per_trial))
    return list(zip(bounds[:-1], bounds[1:]))


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    n_trials: int
    edge_bias: float = 0.0


def _check_guard(config, settings, k, r):
    reach = r + max(analysis.exclusion_radius(config, k, j, r) for j in range(config.n_tiers))
    if reach > settings.guard_radius:
        raise InsufficientGuard(
            f"r = {r} m needs a guard radius of at least {reach:.1f} m, have {settings.guard_radius:.1f} m")


def estimate_success_probability(config: NetworkConfig, settings: SimulationSettings, k: int,
                                 r: float, mode: DuplexMode) -> MCEstimate:
    """Fraction of trials in which the serving BS is on and SIR clears τ_k.

    A trial is one slot of one realization; the standard error treats the
    slots of a realization as a cluster (binomial when there is one slot).
    """
    settings = settings.resolved(config)
    _check_guard(config, settings, k, r)
    n_real = settings.n_realizations
    n_slots = settings.n_slots_per_realization
    fd = mode is DuplexMode.FD
    if settings.fd_user_model == "associated" or settings.quenched:
        return _success_by_realizations(config, settings, k, r, mode)
    pops = _populations(config)
    inner, outer, bias = _link_geometry(config, pops, np.array([k]), np.array([r]),
                                        settings.window_radius, settings.edge_tol)
    per_trial = float(_expected_points(pops, inner, outer, n_slots, 1)[0])
    size = int(max(1, min(_MAX_TRIALS_PER_CHUNK, _POINTS_PER_CHUNK // max(per_trial * n_slots, 1.0))))
    jobs = []
    for c, start in enumerate(range(0, n_real, size)):
        m = min(size, n_real - start)
        jobs.append((_success_chunk, (config, pops, np.full(m, k), np.full(m, float(r)), np.full(m, fd),
                                      settings.window_radius, settings.edge_tol, n_slots,
                                      settings.rng_seed, (_TAG_SUCCESS, k, c))))
    hits = np.concatenate([s.mean(axis=0) for s in _run(jobs, settings.n_jobs)], axis=0)
    return _summarize(hits, n_real * n_slots, float(bias[0]))


def _summarize(per_realization: np.ndarray, n_trials: int, bias: float) -> MCEstimate:
    p = float(per_realization.mean())
    se = math.sqrt(float(np.mean((per_realization - p) ** 2)) / len(per_realization))
    return MCEstimate(p, se, n_trials, bias)


def _success_by_realizations(config, settings, k, r, mode):
    radius = settings.guard_radius
    n_slots = settings.n_slots_per_realization
    tk = config.tiers[k]
    fracs = np.empty(settings.n_realizations)
    for i in range(settings.n_realizations):
        rng = _stream(settings.rng_seed, _TAG_REALIZATION, k, i)
        real = sample_link_realization(config, k, r, radius, rng, n_slots, settings.fd_user_model)
        fracs[i] = _pinned_link(real, config, mode).mean()
    return _summarize(fracs, settings.n_realizations * n_slots, math.nan)


def _pinned_link(real: Realization, config: NetworkConfig, mode: DuplexMode) -> np.ndarray:
    # slot_sir picks the mode from the distance; a pinned-mode trial may ask
    # for the other one, so the self-interference term is corrected here.
    s = real.serving
    tk = config.tiers[s.tier]
    natural = select_mode(s.distance, tk.fd_distance)
    si = config.user.si_residual * config.user.tx_power
    out = np.empty(real.n_slots, dtype=bool)
    for t in range(real.n_slots):
        sir = slot_sir(real, config, s, t)
        if natural is not mode and si > 0 and math.isfinite(sir):
            signal = tk.tx_power * real.bs_fading[s.tier][t, s.index] * s.distance ** -tk.pathloss_alpha
            denom = signal / sir + (si if mode is DuplexMode.FD else -si)
            sir = math.inf if denom <= 0 else signal / denom
        out[t] = real.bs_active[s.tier][t, s.index] and sir > tk.sir_threshold
    return out


# -------------------------------------------------------------- association

def _assoc_chunk(config, radius, seed, tag, chunk, n):
    rng = _stream(seed, tag, chunk)
    tiers = np.empty(n, dtype=int)
    dists = np.empty(n)
    for i in range(n):
        bs = tuple(sample_ppp(t.density, radius, rng) for t in config.tiers)
        a = associate(Realization(bs, (), ()), config)
        tiers[i], dists[i] = a.tier, a.distance
    return tiers, dists


def sample_links(config: NetworkConfig, settings: SimulationSettings, n: int, tag: int = _TAG_ASSOC):
    """Serving tier and distance of the origin in ``n`` fresh realizations
    (base stations sampled on the guard disk)."""
    settings = settings.resolved(config)
    jobs = [(_assoc_chunk, (config, settings.guard_radius, settings.rng_seed, tag, c,
                            min(_ASSOC_CHUNK, n - start)))
            for c, start in enumerate(range(0, n, _ASSOC_CHUNK))]
    parts = _run(jobs, settings.n_jobs)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


@dataclass(frozen=True)
class AssociationEstimate:
    freq_total: tuple[float, ...]
    freq_fd: tuple[float, ...]
    freq_hd: tuple[float, ...]
    n: int

    def stderr(self, p: float) -> float:
        return math.sqrt(p * (1.0 - p) / self.n)


def estimate_association(config: NetworkConfig, settings: SimulationSettings) -> AssociationEstimate:
    n = settings.n_realizations
    tiers, dists = sample_links(config, settings, n)
    theta = np.array([t.fd_distance for t in config.tiers])[tiers]
    fd = dists <= theta
    K = config.n_tiers
    tot = tuple(float(np.mean(tiers == j)) for j in range(K))
    ffd = tuple(float(np.mean((tiers == j) & fd)) for j in range(K))
    fhd = tuple(float(np.mean((tiers == j) & ~fd)) for j in range(K))
    return AssociationEstimate(tot, ffd, fhd, n)


# -------------------------------------------------------------- local delay

@dataclass(frozen=True)
class ModeDelayEstimate:
    mode: DuplexMode
    value: float             # mean of delay * 1{link in mode}, comparable to ModeDelay.value
    stderr: float
    conditional: float       # mean delay of links in this mode
    conditional_stderr: float
    tier_values: tuple[float, ...]
    tier_stderr: tuple[float, ...]
    tier_counts: tuple[int, ...]
    truncated_fraction: float


@dataclass(frozen=True)
class DelayEstimate:
    fd: ModeDelayEstimate
    hd: ModeDelayEstimate
    n_links: int
    truncated_fraction: float

    def mode(self, mode: DuplexMode) -> ModeDelayEstimate:
        return self.fd if mode is DuplexMode.FD else self.hd


def _first_success(config, settings, pops, k, r, fd):
    """Slots until first success per link (capped), annealed: every slot is a fresh trial."""
    n = len(r)
    cap = int(settings.delay_cap)
    delay = np.full(n, float(cap))
    done = np.zeros(n, dtype=bool)
    used = np.zeros(n, dtype=np.int64)
    rnd = 0
    while True:
        live = np.flatnonzero(~done & (used < cap))
        if len(live) == 0:
            break
        m = int(min(2 ** min(rnd, 10), cap))
        reps = np.minimum(m, cap - used[live])
        idx = np.repeat(live, reps)
        offset = np.concatenate([np.arange(c) for c in reps])
        inner, outer, _ = _link_geometry(config, pops, k[idx], r[idx], settings.window_radius, settings.edge_tol)
        work = _expected_points(pops, inner, outer, 1, len(idx))
        jobs = [(_success_chunk, (config, pops, k[idx[a:b]], r[idx[a:b]], fd[idx[a:b]],
                                  settings.window_radius, settings.edge_tol, 1,
                                  settings.rng_seed, (_TAG_DELAY, rnd, c)))
                for c, (a, b) in enumerate(_chunks_by_points(work))]
        hit = np.concatenate([s[0] for s in _run(jobs, settings.n_jobs)])
        # earliest successful offset per link in this round
        first = np.full(n, np.iinfo(np.int64).max)
        np.minimum.at(first, idx[hit], offset[hit])
        got = live[first[live] < np.iinfo(np.int64).max]
        delay[got] = used[got] + first[got] + 1
        done[got] = True
        used[live] += reps
        rnd += 1
    return delay, ~done


def _inverse_frequency(config, settings, pops, k, r, fd):
    n = len(r)
    slots = settings.n_slots_per_realization
    idx = np.repeat(np.arange(n), slots)
    inner, outer, _ = _link_geometry(config, pops, k[idx], r[idx], settings.window_radius, settings.edge_tol)
    work = _expected_points(pops, inner, outer, 1, len(idx))
    jobs = [(_success_chunk, (config, pops, k[idx[a:b]], r[idx[a:b]], fd[idx[a:b]],
                              settings.window_radius, settings.edge_tol, 1,
                              settings.rng_seed, (_TAG_DELAY, 0, c)))
            for c, (a, b) in enumerate(_chunks_by_points(work))]
    hit = np.concatenate([s[0] for s in _run(jobs, settings.n_jobs)])
    succ = np.bincount(idx, weights=hit, minlength=n)
    with np.errstate(divide="ignore"):
        delay = np.where(succ > 0, slots / succ, settings.delay_cap)
    return np.minimum(delay, settings.delay_cap), succ == 0


def _realization_delays(config, settings, k, r, fd):
    """Per-link delay on explicit realizations (quenched or associated users)."""
    n = len(r)
    cap = int(settings.delay_cap)
    radius = settings.guard_radius
    delay = np.empty(n)
    trunc = np.zeros(n, dtype=bool)
    block = settings.n_slots_per_realization
    for i in range(n):
        mode = DuplexMode.FD if fd[i] else DuplexMode.HD
        rng = _stream(settings.rng_seed, _TAG_DELAY, 1 << 20, i)
        if settings.delay_estimator == "inverse_frequency":
            if settings.quenched:
                hits = _pinned_link(sample_link_realization(config, int(k[i]), r[i], radius, rng, block,
                                                            settings.fd_user_model), config, mode)
            else:
                hits = np.array([_pinned_link(sample_link_realization(config, int(k[i]), r[i], radius, rng, 1,
                                                                      settings.fd_user_model), config, mode)[0]
                                 for _ in range(block)])
            s = hits.sum()
            delay[i] = min(block / s, cap) if s else cap
            trunc[i] = s == 0
            continue
        used = 0
        base = sample_link_realization(config, int(k[i]), r[i], radius, rng, 1, settings.fd_user_model)
        found = False
        while used < cap and not found:
            if settings.quenched:
                active, fading = _draw_bs_marks(config, base.bs, rng, 1)
                real = replace(base, bs_active=active, bs_fading=fading,
                               user_fading=rng.standard_exponential((1, len(base.users))))
                real.user_active = _redraw_user_activity(config, real, rng)
            else:
                real = base if used == 0 else sample_link_realization(config, int(k[i]), r[i], radius, rng, 1,
                                                                      settings.fd_user_model)
            used += 1
            found = bool(_pinned_link(real, config, mode)[0])
        delay[i] = used if found else cap
        trunc[i] = not found
    return delay, trunc


def _redraw_user_activity(config, real, rng):
    if (real.user_bs >= 0).any():
        act = np.zeros((1, len(real.users)), dtype=bool)
        for j in range(config.n_tiers):
            mine = np.flatnonzero((real.user_tier == j) & real.user_fd)
            if len(mine):
                act[:, mine] = real.bs_active[j][:, real.user_bs[mine]]
        return act
    chi = np.array([t.silence_prob for t in config.tiers])[real.user_tier]
    return rng.random((1, len(real.users))) >= chi


def estimate_local_delay(config: NetworkConfig, settings: SimulationSettings,
                         mode: DuplexMode | None = None):
    """Local delay from typical-user links.

    Links come from fresh realizations (serving tier and distance of the
    origin); each link's delay is the slot count until its first success
    (default) or n_slots / successes over n_slots_per_realization slots,
    truncated at ``delay_cap``.  Returns a DelayEstimate, or only the
    requested mode's part.
    """
    settings = settings.resolved(config)
    n = settings.n_realizations
    k, r = sample_links(config, settings, n, tag=_TAG_LINKS)
    theta = np.array([t.fd_distance for t in config.tiers])[k]
    fd = r <= theta
    if settings.quenched or settings.fd_user_model == "associated":
        d, trunc = _realization_delays(config, settings, k, r, fd)
    else:
        pops = _populations(config)
        if settings.delay_estimator == "first_success":
            d, trunc = _first_success(config, settings, pops, k, r, fd)
        else:
            d, trunc = _inverse_frequency(config, settings, pops, k, r, fd)
    parts = {}
    for m, mask in ((DuplexMode.FD, fd), (DuplexMode.HD, ~fd)):
        contrib = np.where(mask, d, 0.0)
        value = float(contrib.mean())
        se = float(contrib.std() / math.sqrt(n))
        sel = d[mask]
        cond = float(sel.mean()) if len(sel) else math.nan
        cond_se = float(sel.std() / math.sqrt(len(sel))) if len(sel) > 1 else math.nan
        tv, ts, tc = [], [], []
        for j in range(config.n_tiers):
            dj = d[mask & (k == j)]
            tc.append(len(dj))
            tv.append(float(dj.mean()) if len(dj) else math.nan)
            ts.append(float(dj.std() / math.sqrt(len(dj))) if len(dj) > 1 else math.nan)
        tf = float(trunc[mask].mean()) if mask.any() else 0.0
        parts[m] = ModeDelayEstimate(m, value, se, cond, cond_se, tuple(tv), tuple(ts), tuple(tc), tf)
    est = DelayEstimate(parts[DuplexMode.FD], parts[DuplexMode.HD], n, float(trunc.mean()))
    return est if mode is None else est.mode(mode)
