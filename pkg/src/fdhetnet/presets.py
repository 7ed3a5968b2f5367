"""Bundled figure presets: a pinned configuration plus the sweep that draws it."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .configio import loads
from .model import NetworkConfig
from .sweep import SweepSpec, parse_grid

TAU_GRID = parse_grid("-10:10:1")
CHI_SERIES = (0.1, 0.5, 0.9)
RATIO_SERIES = (2.0, 5.0, 10.0)
BETA_SERIES = (-50.0, -70.0, -90.0)

_DELAY_AXIS = "local delay (slots)"
_EE_AXIS = "energy efficiency (nats/Joule/Hz)"
_TAU_AXIS = "SIR threshold τ (dB)"


@dataclass(frozen=True)
class Panel:
    ylabel: str
    columns: tuple[str, ...]
    log_y: bool = False


@dataclass(frozen=True)
class FigurePreset:
    name: str
    title: str
    config: NetworkConfig
    sweep: SweepSpec
    xlabel: str
    panels: tuple[Panel, ...]


def preset_text(name: str) -> str:
    try:
        return resources.files("fdhetnet.preset_files").joinpath(f"{name}.ini").read_text(encoding="utf-8")
    except FileNotFoundError:
        raise KeyError(f"no preset named {name!r}; choose from {PRESET_NAMES}") from None


def preset_config(name: str) -> NetworkConfig:
    return loads(preset_text(name))


def _delay_ee(prefix=("d_fd", "d_hd")):
    return (Panel(_DELAY_AXIS, prefix, log_y=True), Panel(_EE_AXIS, ("eta",)))


def get_preset(name: str) -> FigurePreset:
    cfg = preset_config(name)
    if name == "fig2":
        sweep = SweepSpec(cfg, "tau_db", TAU_GRID, "chi", CHI_SERIES, outputs=("delay_fd", "delay_hd", "ee"))
        return FigurePreset(name, "Delay and EE vs τ, two tiers, by silence probability", cfg, sweep,
                            _TAU_AXIS, _delay_ee())
    if name == "fig3":
        sweep = SweepSpec(cfg, "tau_db", TAU_GRID, "chi", CHI_SERIES, outputs=("delay_fd", "delay_hd", "ee"))
        return FigurePreset(name, "Delay and EE vs τ, three tiers, by silence probability", cfg, sweep,
                            _TAU_AXIS, _delay_ee())
    if name == "fig4":
        sweep = SweepSpec(cfg, "tau_db", TAU_GRID, "tier[2].density_ratio", RATIO_SERIES,
                          outputs=("delay_fd", "delay_hd", "ee"))
        return FigurePreset(name, "Delay and EE vs τ, by λ2/λ1", cfg, sweep, _TAU_AXIS, _delay_ee())
    if name == "fig5":
        sweep = SweepSpec(cfg, "tier[2].silence_prob", parse_grid("0:0.9:0.1"), "tier[2].density_ratio",
                          RATIO_SERIES, outputs=("delay_fd", "delay_hd", "ee"))
        return FigurePreset(name, "Delay and EE vs tier-2 silence probability, by λ2/λ1", cfg, sweep,
                            "tier-2 silence probability χ2", _delay_ee())
    if name == "fig6":
        sweep = SweepSpec(cfg, "tau_db", TAU_GRID, "beta_db", BETA_SERIES, outputs=("delay_fd",))
        return FigurePreset(name, "FD delay vs τ, by residual self-interference β (dB)", cfg, sweep,
                            _TAU_AXIS, (Panel(_DELAY_AXIS, ("d_fd",), log_y=True),))
    if name == "fig7":
        sweep = SweepSpec(cfg, "tau_db", TAU_GRID, "chi", CHI_SERIES, outputs=("per_tier",))
        return FigurePreset(name, "Per-tier delay vs τ, by silence probability", cfg, sweep, _TAU_AXIS,
                            (Panel(_DELAY_AXIS, ("d1", "d2"), log_y=True),))
    raise KeyError(f"no preset named {name!r}; choose from {PRESET_NAMES}")


PRESET_NAMES = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7")
