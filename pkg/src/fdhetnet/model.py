"""Network parameters, unit conversions and configuration checks.

Everything inside the package works in SI units: meters, watts, points per
square meter and linear power ratios.  dB, dBm and per-km² only show up at the
config-file boundary (see ``fdhetnet.configio``).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace
from typing import Iterable, Sequence

KM2_PER_M2 = 1e-6


def dbm_to_watts(x):
    return 10.0 ** (x / 10.0) / 1000.0


def watts_to_dbm(w):
    return 10.0 * math.log10(w * 1000.0)


def db_to_linear(x):
    return 10.0 ** (x / 10.0)


def linear_to_db(v):
    return 10.0 * math.log10(v)


def per_km2_to_per_m2(x):
    return x * KM2_PER_M2


def per_m2_to_per_km2(x):
    return x / KM2_PER_M2


class DuplexMode(enum.Enum):
    FD = "fd"
    HD = "hd"

    @property
    def indicator(self) -> int:
        return 1 if self is DuplexMode.FD else 0


@dataclass(frozen=True)
class TierParams:
    """One tier of base stations.

    ``fd_distance`` is the radius inside which an associated user runs full
    duplex.  The three power-model coefficients only matter for energy
    efficiency and default to zero.
    """

    density: float
    tx_power: float
    sir_threshold: float
    silence_prob: float
    pathloss_alpha: float
    fd_distance: float
    power_static: float = 0.0
    power_slope: float = 0.0
    power_sleep: float = 0.0


@dataclass(frozen=True)
class UserParams:
    density: float
    tx_power: float
    pathloss_alpha: float
    si_residual: float
    p_sic: float = 0.0


@dataclass(frozen=True)
class NetworkConfig:
    tiers: tuple[TierParams, ...]
    user: UserParams
    # Carried for bookkeeping only; delays are always counted in slots.
    slot_duration: float = 1.0

    def __post_init__(self):
        # Lists are accepted for convenience but stored as a tuple so the
        # config stays hashable (analysis results are cached per config).
        if not isinstance(self.tiers, tuple):
            object.__setattr__(self, "tiers", tuple(self.tiers))

    @property
    def n_tiers(self) -> int:
        return len(self.tiers)

    def with_tier(self, k: int, **changes) -> "NetworkConfig":
        tiers = list(self.tiers)
        tiers[k] = replace(tiers[k], **changes)
        return replace(self, tiers=tuple(tiers))

    def with_all_tiers(self, **changes) -> "NetworkConfig":
        return replace(self, tiers=tuple(replace(t, **changes) for t in self.tiers))

    def with_user(self, **changes) -> "NetworkConfig":
        return replace(self, user=replace(self.user, **changes))

    @property
    def common_threshold(self) -> float | None:
        """The shared SIR threshold, or None when tiers use different ones."""
        taus = {t.sir_threshold for t in self.tiers}
        return taus.pop() if len(taus) == 1 else None

    @property
    def common_alpha(self) -> float | None:
        """The shared path-loss exponent of every tier and the users, if any."""
        alphas = {t.pathloss_alpha for t in self.tiers} | {self.user.pathloss_alpha}
        return alphas.pop() if len(alphas) == 1 else None


class ValidationError(ValueError):
    """Raised by :func:`validate`; ``problems`` lists every violated rule."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("invalid network configuration:\n  " + "\n  ".join(self.problems))


def _check(problems: list, where: str, name: str, value, ok, rule: str):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        problems.append(f"{where}: {name} must be a real number, got {value!r}")
    elif not math.isfinite(value):
        problems.append(f"{where}: {name} must be finite, got {value!r}")
    elif not ok(value):
        problems.append(f"{where}: {rule} (got {name} = {value!r})")


def _tier_problems(t: TierParams, where: str) -> Iterable[str]:
    p: list[str] = []
    _check(p, where, "density", t.density, lambda v: v > 0, "density must be positive")
    _check(p, where, "tx_power", t.tx_power, lambda v: v > 0, "transmit power must be positive")
    _check(p, where, "sir_threshold", t.sir_threshold, lambda v: v > 0,
           "SIR threshold must be positive")
    _check(p, where, "silence_prob", t.silence_prob, lambda v: 0 <= v <= 1,
           "silence probability outside [0,1]")
    _check(p, where, "pathloss_alpha", t.pathloss_alpha, lambda v: v > 2,
           "α ≤ 2 breaks path-loss integrability, α must exceed 2")
    _check(p, where, "fd_distance", t.fd_distance, lambda v: v >= 0,
           "FD distance threshold must be non-negative")
    _check(p, where, "power_static", t.power_static, lambda v: v >= 0,
           "static power must be non-negative")
    _check(p, where, "power_slope", t.power_slope, lambda v: v >= 0,
           "power slope must be non-negative")
    _check(p, where, "power_sleep", t.power_sleep, lambda v: v >= 0,
           "sleep power must be non-negative")
    sleep, static = t.power_sleep, t.power_static
    if all(isinstance(v, (int, float)) and math.isfinite(v) for v in (sleep, static)):
        if sleep > static:
            p.append(f"{where}: sleep power exceeds static power ({sleep!r} > {static!r})")
    return p


def _user_problems(u: UserParams) -> Iterable[str]:
    p: list[str] = []
    _check(p, "user", "density", u.density, lambda v: v > 0, "density must be positive")
    _check(p, "user", "tx_power", u.tx_power, lambda v: v > 0, "transmit power must be positive")
    _check(p, "user", "pathloss_alpha", u.pathloss_alpha, lambda v: v > 2,
           "α ≤ 2 breaks path-loss integrability, α must exceed 2")
    _check(p, "user", "si_residual", u.si_residual, lambda v: 0 <= v <= 1,
           "residual self-interference outside [0,1]")
    _check(p, "user", "p_sic", u.p_sic, lambda v: v >= 0, "SIC power must be non-negative")
    return p


def problems(config: NetworkConfig) -> list[str]:
    """All violated rules, empty when the config is valid."""
    out: list[str] = []
    if len(config.tiers) < 1:
        out.append("network: at least one tier is required")
    for i, tier in enumerate(config.tiers, start=1):
        if not isinstance(tier, TierParams):
            out.append(f"tier {i}: expected TierParams, got {type(tier).__name__}")
            continue
        out.extend(_tier_problems(tier, f"tier {i}"))
    if not isinstance(config.user, UserParams):
        out.append(f"user: expected UserParams, got {type(config.user).__name__}")
    else:
        out.extend(_user_problems(config.user))
    sd = config.slot_duration
    if not (isinstance(sd, (int, float)) and math.isfinite(sd) and sd > 0):
        out.append(f"network: slot duration must be positive and finite (got {sd!r})")
    return out


def validate(config: NetworkConfig) -> NetworkConfig:
    """Return ``config`` unchanged, or raise ValidationError naming each problem."""
    found = problems(config)
    if found:
        raise ValidationError(found)
    return config


def field_names(cls) -> tuple[str, ...]:
    return tuple(f.name for f in fields(cls))
