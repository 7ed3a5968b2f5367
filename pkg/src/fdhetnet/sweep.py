"""Parameter sweeps over a base configuration, written out as CSV.

Parameter paths
---------------
``tau_db``                common SIR threshold of every tier, in dB
``chi``                   common silence probability of every tier
``beta_db``               residual self-interference, in dB
``tier[i].<field>``       any TierParams field of tier i (1-based), SI units,
                          plus ``sir_threshold_db``, ``tx_power_dbm``,
                          ``density_km2`` and ``density_ratio`` (λ_i / λ_1)
``user.<field>``          any UserParams field, plus ``si_residual_db``,
                          ``tx_power_dbm`` and ``density_km2``

CSV columns, in order
---------------------
series, series_value, param, value, engine,
d_fd, d_fd_err, d_hd, d_hd_err,
then per tier k = 1..K: d{k}_fd, d{k}_hd, d{k},
eta, diverged_fd, diverged_hd, agreement_fd, agreement_hd, truncated,
wall_time, error

Diverged delays are written as ``div``; not-applicable cells are empty.
``agreement_*`` is |analytical − MC| / σ_MC on Monte Carlo rows of a
two-engine run.  ``wall_time`` is only filled when timing is requested, so
that repeated runs give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import math
import re
import time
from dataclasses import dataclass, fields, replace

from joblib import Parallel, delayed

from . import analysis, montecarlo
from .model import (DuplexMode, NetworkConfig, TierParams, UserParams, db_to_linear, dbm_to_watts,
                    per_km2_to_per_m2, validate)
from .quadrature import DEFAULT_SETTINGS, QuadratureSettings

ENGINES = ("analytical", "mc", "both")
OUTPUTS = ("delay_fd", "delay_hd", "per_tier", "ee")
DIV = "div"


class SweepError(ValueError):
    pass


_TIER_PATH = re.compile(r"^tier\[(\d+)\]\.(\w+)$")
_USER_PATH = re.compile(r"^user\.(\w+)$")
_TIER_FIELDS = {f.name for f in fields(TierParams)}
_USER_FIELDS = {f.name for f in fields(UserParams)}


def apply_param(config: NetworkConfig, path: str, value: float) -> NetworkConfig:
    """Copy of ``config`` with the parameter at ``path`` set to ``value``."""
    v = float(value)
    if path == "tau_db":
        return config.with_all_tiers(sir_threshold=db_to_linear(v))
    if path == "chi":
        return config.with_all_tiers(silence_prob=v)
    if path == "beta_db":
        return config.with_user(si_residual=db_to_linear(v))
    m = _TIER_PATH.match(path)
    if m:
        i, name = int(m.group(1)), m.group(2)
        if not 1 <= i <= config.n_tiers:
            raise SweepError(f"{path}: tier index out of range 1..{config.n_tiers}")
        k = i - 1
        if name in _TIER_FIELDS:
            return config.with_tier(k, **{name: v})
        if name == "sir_threshold_db":
            return config.with_tier(k, sir_threshold=db_to_linear(v))
        if name == "tx_power_dbm":
            return config.with_tier(k, tx_power=dbm_to_watts(v))
        if name == "density_km2":
            return config.with_tier(k, density=per_km2_to_per_m2(v))
        if name == "density_ratio":
            return config.with_tier(k, density=v * config.tiers[0].density)
        raise SweepError(f"{path}: unknown tier parameter {name!r}")
    m = _USER_PATH.match(path)
    if m:
        name = m.group(1)
        if name in _USER_FIELDS:
            return config.with_user(**{name: v})
        if name == "si_residual_db":
            return config.with_user(si_residual=db_to_linear(v))
        if name == "tx_power_dbm":
            return config.with_user(tx_power=dbm_to_watts(v))
        if name == "density_km2":
            return config.with_user(density=per_km2_to_per_m2(v))
        raise SweepError(f"{path}: unknown user parameter {name!r}")
    raise SweepError(f"parameter path {path!r} not understood")


def parse_grid(text: str) -> tuple[float, ...]:
    """``start:stop:step`` (stop included) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        try:
            a, b, s = (float(x) for x in text.split(":"))
        except ValueError as exc:
            raise SweepError(f"grid {text!r}: expected start:stop:step") from exc
        if s == 0 or (b - a) / s < 0:
            raise SweepError(f"grid {text!r}: step does not reach stop")
        n = int(math.floor((b - a) / s + 1e-9)) + 1
        return tuple(round(a + i * s, 12) for i in range(n))
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise SweepError(f"grid {text!r}: not a list of numbers") from exc


def _monotone(grid) -> bool:
    d = [b - a for a, b in zip(grid, grid[1:])]
    return all(x > 0 for x in d) or all(x < 0 for x in d)


@dataclass(frozen=True)
class SweepSpec:
    base: NetworkConfig
    param: str
    grid: tuple[float, ...]
    series_param: str | None = None
    series_values: tuple[float, ...] = ()
    engine: str = "analytical"
    outputs: tuple[str, ...] = OUTPUTS

    def check(self) -> "SweepSpec":
        if not self.grid:
            raise SweepError("grid is empty")
        if not _monotone(self.grid):
            raise SweepError("grid must be strictly monotone")
        if self.engine not in ENGINES:
            raise SweepError(f"engine must be one of {ENGINES}")
        bad = [o for o in self.outputs if o not in OUTPUTS]
        if bad:
            raise SweepError(f"unknown outputs {bad}; choose from {OUTPUTS}")
        apply_param(self.base, self.param, self.grid[0])
        if self.series_param is not None:
            if not self.series_values:
                raise SweepError("series parameter given without values")
            apply_param(self.base, self.series_param, self.series_values[0])
        return self

    def points(self):
        """(series value or None, grid value, config) in output order."""
        series = self.series_values if self.series_param is not None else (None,)
        for s in series:
            cfg = self.base if s is None else apply_param(self.base, self.series_param, s)
            for v in self.grid:
                yield s, v, apply_param(cfg, self.param, v)


def columns(n_tiers: int) -> list[str]:
    cols = ["series", "series_value", "param", "value", "engine",
            "d_fd", "d_fd_err", "d_hd", "d_hd_err"]
    for k in range(1, n_tiers + 1):
        cols += [f"d{k}_fd", f"d{k}_hd", f"d{k}"]
    cols += ["eta", "diverged_fd", "diverged_hd", "agreement_fd", "agreement_hd",
             "truncated", "wall_time", "error"]
    return cols


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return ""
    if math.isinf(x):
        return DIV
    return repr(x)


def _analytical_row(config, outputs, qset, method):
    validate(config)
    fn = analysis.local_delay if method == "general" else analysis.special_case_delay
    fd = fn(config, DuplexMode.FD, qset)
    hd = fn(config, DuplexMode.HD, qset)
    row = {"engine": "analytical", "diverged_fd": fd.diverged, "diverged_hd": hd.diverged}
    if "delay_fd" in outputs or "ee" in outputs:
        row["d_fd"], row["d_fd_err"] = fd.value, fd.error
    if "delay_hd" in outputs or "ee" in outputs:
        row["d_hd"], row["d_hd_err"] = hd.value, hd.error
    if "per_tier" in outputs:
        for k, t in enumerate(analysis.per_tier_delay(config, fd, hd, qset), start=1):
            row[f"d{k}_fd"], row[f"d{k}_hd"], row[f"d{k}"] = t.d_fd, t.d_hd, t.d_total
    if "ee" in outputs:
        row["eta"] = analysis.energy_efficiency(config, fd, hd, qset).eta
    return row


def _mc_row(config, outputs, qset, mset):
    validate(config)
    est = montecarlo.estimate_local_delay(config, mset)
    row = {"engine": "mc", "d_fd": est.fd.value, "d_fd_err": est.fd.stderr,
           "d_hd": est.hd.value, "d_hd_err": est.hd.stderr,
           "diverged_fd": False, "diverged_hd": False, "truncated": est.truncated_fraction}
    if "per_tier" in outputs:
        for k in range(config.n_tiers):
            nf, nh = est.fd.tier_counts[k], est.hd.tier_counts[k]
            vf, vh = est.fd.tier_values[k], est.hd.tier_values[k]
            both = [(n, v) for n, v in ((nf, vf), (nh, vh)) if n > 0]
            tot = sum(n * v for n, v in both) / sum(n for n, _ in both) if both else math.nan
            row[f"d{k + 1}_fd"], row[f"d{k + 1}_hd"], row[f"d{k + 1}"] = vf, vh, tot
    if "ee" in outputs:
        row["eta"] = analysis.energy_efficiency(config, est.fd.value, est.hd.value, qset).eta
    return row


def evaluate_point(config: NetworkConfig, engine: str = "analytical", outputs=OUTPUTS,
                   qsettings: QuadratureSettings = DEFAULT_SETTINGS,
                   msettings: montecarlo.SimulationSettings | None = None,
                   method: str = "general", timing: bool = False) -> list[dict]:
    """Rows for one configuration; per-engine failures become an ``error`` cell."""
    msettings = msettings or montecarlo.SimulationSettings()
    engines = ("analytical", "mc") if engine == "both" else (engine,)
    rows = []
    for eng in engines:
        t0 = time.perf_counter()
        try:
            if eng == "analytical":
                row = _analytical_row(config, outputs, qsettings, method)
            else:
                row = _mc_row(config, outputs, qsettings, msettings)
        except Exception as exc:  # recorded in the row, the sweep goes on
            row = {"engine": eng, "error": f"{type(exc).__name__}: {exc}".replace("\n", " ")}
        if timing:
            row["wall_time"] = round(time.perf_counter() - t0, 6)
        rows.append(row)
    if engine == "both" and "error" not in rows[0] and "error" not in rows[1]:
        an, mc = rows
        for m in ("fd", "hd"):
            a, b, se = an.get(f"d_{m}"), mc.get(f"d_{m}"), mc.get(f"d_{m}_err")
            if a is not None and b is not None and se and math.isfinite(a):
                mc[f"agreement_{m}"] = abs(a - b) / se
    return rows


def _point_job(idx, s, v, config, spec, qset, mset, method, timing):
    rows = evaluate_point(config, spec.engine, spec.outputs, qset, mset, method, timing)
    for r in rows:
        r.update({"series": spec.series_param or "", "series_value": s, "param": spec.param, "value": v})
    return idx, rows


def run_sweep(spec: SweepSpec, qsettings: QuadratureSettings = DEFAULT_SETTINGS,
              msettings: montecarlo.SimulationSettings | None = None, method: str = "general",
              n_jobs: int = 1, timing: bool = False) -> list[dict]:
    """All rows of the sweep, ordered by series then grid index."""
    spec.check()
    jobs = [(i, s, v, cfg) for i, (s, v, cfg) in enumerate(spec.points())]
    args = (spec, qsettings, msettings, method, timing)
    if n_jobs == 1:
        done = [_point_job(*j, *args) for j in jobs]
    else:
        done = Parallel(n_jobs=n_jobs)(delayed(_point_job)(*j, *args) for j in jobs)
    done.sort(key=lambda t: t[0])
    return [r for _, rows in done for r in rows]


def write_csv(rows: list[dict], n_tiers: int, out=None) -> str:
    """Serialize rows; returns the text and writes it to ``out`` (path or file) if given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = columns(n_tiers)
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    text = buf.getvalue()
    if out is not None:
        if hasattr(out, "write"):
            out.write(text)
        else:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    return text
