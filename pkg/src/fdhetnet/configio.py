"""Reading and writing network configurations as INI text.

One ``[tierN]`` section per tier (numbered from 1 without gaps) and one
``[user]`` section.  Values carry explicit units::

    [tier1]
    density = 1 /km2            ; or /m2
    tx_power = 46 dBm           ; dBm, W or mW
    sir_threshold = 0 dB        ; dB, or a bare linear ratio
    silence_prob = 0.5
    pathloss_alpha = 3.5
    fd_distance = 300 m         ; m or km
    power_static = 139 W        ; optional, default 0
    power_slope = 5             ; optional, default 0
    power_sleep = 80 W          ; optional, default 0

    [user]
    density = 50 /km2
    tx_power = 23 dBm
    pathloss_alpha = 3.5
    si_residual = -70 dB
    p_sic = 50 mW               ; optional, default 0

An optional ``[network]`` section may set ``slot_duration`` (seconds).
"""
from __future__ import annotations

import configparser
import math
import re
from pathlib import Path

from .model import (NetworkConfig, TierParams, UserParams, db_to_linear, dbm_to_watts,
                    per_km2_to_per_m2, validate)

_POWER_KEYS = {"tx_power", "power_static", "power_sleep", "p_sic"}
_RATIO_KEYS = {"sir_threshold", "si_residual"}
_PLAIN_KEYS = {"silence_prob", "pathloss_alpha", "power_slope"}
_DENSITY_KEYS = {"density"}
_LENGTH_KEYS = {"fd_distance"}

_TIER_REQUIRED = ("density", "tx_power", "sir_threshold", "silence_prob", "pathloss_alpha", "fd_distance")
_TIER_OPTIONAL = ("power_static", "power_slope", "power_sleep")
_USER_REQUIRED = ("density", "tx_power", "pathloss_alpha", "si_residual")
_USER_OPTIONAL = ("p_sic",)

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_VALUE = re.compile(rf"^\s*({_NUMBER})\s*([^\s].*?)?\s*$")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for n, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip().lower()
            if key is None and current == section:
                return n
            continue
        if current == section and key is not None and re.match(rf"^{re.escape(key)}\s*[=:]", s, re.I):
            return n
    return None


def _convert(key: str, raw: str, line, where: str) -> float:
    m = _VALUE.match(raw)
    if not m:
        raise ParseError(f"{where}: cannot read a number from {raw!r}", line, key)
    x = float(m.group(1))
    unit = (m.group(2) or "").strip()
    lu = unit.lower().replace("²", "2").replace(" ", "")
    if key in _POWER_KEYS:
        if lu == "dbm":
            return dbm_to_watts(x)
        if lu == "w":
            return x
        if lu == "mw":
            return x / 1000.0
        if not unit:
            raise ParseError(f"{where}: {key} needs an explicit unit (dBm, W or mW)", line, key)
    elif key in _RATIO_KEYS:
        if lu == "db":
            return db_to_linear(x)
        if not unit:
            return x
    elif key in _DENSITY_KEYS:
        if lu in ("/km2", "perkm2"):
            return per_km2_to_per_m2(x)
        if lu in ("/m2", "perm2"):
            return x
        if not unit:
            raise ParseError(f"{where}: {key} needs an explicit unit (/km2 or /m2)", line, key)
    elif key in _LENGTH_KEYS:
        if lu in ("", "m"):
            return x
        if lu == "km":
            return x * 1000.0
    elif key in _PLAIN_KEYS or key == "slot_duration":
        if lu in ("", "s") and (key == "slot_duration" or not unit):
            return x
    raise ParseError(f"{where}: unit {unit!r} not understood for {key}", line, key)


def _read_section(parser, text, name, required, optional, where):
    sec = parser[name]
    out = {}
    for key in sec:
        if key not in required and key not in optional:
            raise ParseError(f"{where}: unknown key {key!r}", _line_of(text, name, key), key)
        out[key] = _convert(key, sec[key], _line_of(text, name, key), where)
    for key in required:
        if key not in out:
            raise ParseError(f"{where}: missing required key {key!r}", _line_of(text, name), key)
    return out


def loads(text: str, check: bool = True) -> NetworkConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str.lower
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ParseError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from exc
    names = [s.lower() for s in parser.sections()]
    tier_ids = []
    for s in names:
        m = re.fullmatch(r"tier(\d+)", s)
        if m:
            tier_ids.append(int(m.group(1)))
        elif s not in ("user", "network"):
            raise ParseError(f"unknown section [{s}]", _line_of(text, s))
    if not tier_ids:
        raise ParseError("no [tierN] section found")
    if sorted(tier_ids) != list(range(1, len(tier_ids) + 1)):
        raise ParseError(f"tier sections must be numbered 1..K without gaps, got {sorted(tier_ids)}")
    if "user" not in names:
        raise ParseError("missing [user] section")
    sections = {s.lower(): s for s in parser.sections()}
    tiers = []
    for i in range(1, len(tier_ids) + 1):
        vals = _read_section(parser, text, sections[f"tier{i}"], _TIER_REQUIRED, _TIER_OPTIONAL, f"tier {i}")
        tiers.append(TierParams(**vals))
    user = UserParams(**_read_section(parser, text, sections["user"], _USER_REQUIRED, _USER_OPTIONAL, "user"))
    slot = 1.0
    if "network" in sections:
        net = _read_section(parser, text, sections["network"], (), ("slot_duration",), "network")
        slot = net.get("slot_duration", 1.0)
    config = NetworkConfig(tuple(tiers), user, slot)
    return validate(config) if check else config


def load_config(path, check: bool = True) -> NetworkConfig:
    text = Path(path).read_text(encoding="utf-8")
    return loads(text, check)


def _num(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else str(x)


def dumps(config: NetworkConfig) -> str:
    """INI text in SI units; reading it back gives an identical config."""
    lines = ["# fdhetnet network configuration (SI units)", ""]
    if config.slot_duration != 1.0:
        lines += ["[network]", f"slot_duration = {_num(config.slot_duration)}", ""]
    for i, t in enumerate(config.tiers, start=1):
        lines += [
            f"[tier{i}]",
            f"density = {_num(t.density)} /m2",
            f"tx_power = {_num(t.tx_power)} W",
            f"sir_threshold = {_num(t.sir_threshold)}",
            f"silence_prob = {_num(t.silence_prob)}",
            f"pathloss_alpha = {_num(t.pathloss_alpha)}",
            f"fd_distance = {_num(t.fd_distance)} m",
            f"power_static = {_num(t.power_static)} W",
            f"power_slope = {_num(t.power_slope)}",
            f"power_sleep = {_num(t.power_sleep)} W",
            "",
        ]
    u = config.user
    lines += [
        "[user]",
        f"density = {_num(u.density)} /m2",
        f"tx_power = {_num(u.tx_power)} W",
        f"pathloss_alpha = {_num(u.pathloss_alpha)}",
        f"si_residual = {_num(u.si_residual)}",
        f"p_sic = {_num(u.p_sic)} W",
        "",
    ]
    return "\n".join(lines)


def dump_config(config: NetworkConfig, path) -> None:
    Path(path).write_text(dumps(config), encoding="utf-8")
