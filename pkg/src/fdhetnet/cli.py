"""Command-line entry point: ``fdhetnet {eval,sweep,preset,crossval}``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import configio, crossval as xval, montecarlo, presets, sweep
from .model import ValidationError, db_to_linear
from .plotting import PlotScriptError, emit_plot_script
from .quadrature import QuadratureSettings


def _common(p: argparse.ArgumentParser, engine=True, delay_cap=1e6):
    if engine:
        p.add_argument("--engine", choices=sweep.ENGINES, default="analytical")
    p.add_argument("--seed", type=int, default=0, help="Monte Carlo seed (unsigned 64-bit)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--tol", type=float, default=1e-9, help="relative quadrature tolerance")
    p.add_argument("--realizations", type=int, default=2000,
                   help="Monte Carlo realizations (links for delay, trials for success probability)")
    p.add_argument("--slots", type=int, default=1, help="slots per realization")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--delay-cap", type=float, default=delay_cap, help="per-link delay truncation (slots)")


def _settings(args):
    q = QuadratureSettings(rel_tol=args.tol)
    m = montecarlo.SimulationSettings(n_realizations=args.realizations, n_slots_per_realization=args.slots,
                                      rng_seed=args.seed, n_jobs=args.jobs, delay_cap=args.delay_cap)
    return q, m


def _emit(text: str, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _outputs(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())


def cmd_eval(args):
    cfg = configio.load_config(args.config)
    q, m = _settings(args)
    rows = sweep.evaluate_point(cfg, args.engine, sweep.OUTPUTS, q, m, args.method, args.timing)
    _emit(sweep.write_csv(rows, cfg.n_tiers), args.out)
    return 0


def cmd_sweep(args):
    cfg = configio.load_config(args.config)
    q, m = _settings(args)
    spec = sweep.SweepSpec(cfg, args.param, sweep.parse_grid(args.grid), args.series,
                           sweep.parse_grid(args.series_values) if args.series_values else (),
                           args.engine, _outputs(args.outputs))
    rows = sweep.run_sweep(spec, q, m, args.method, args.jobs, args.timing)
    _emit(sweep.write_csv(rows, cfg.n_tiers), args.out)
    return 0


def cmd_preset(args):
    pre = presets.get_preset(args.name)
    if args.write_config:
        with open(args.write_config, "w", encoding="utf-8") as fh:
            fh.write(presets.preset_text(args.name))
    q, m = _settings(args)
    spec = replace(pre.sweep, engine=args.engine)
    rows = sweep.run_sweep(spec, q, m, args.method, args.jobs, args.timing)
    text = sweep.write_csv(rows, pre.config.n_tiers)
    _emit(text, args.out)
    if args.plot:
        if not args.out:
            raise PlotScriptError("--plot needs --out so the script knows which CSV to read")
        path = emit_plot_script(args.out, pre, args.plot)
        print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_crossval(args):
    if args.config:
        cfg = configio.load_config(args.config)
    else:
        cfg = presets.preset_config(args.preset)
    q, m = _settings(args)
    mc_cfg = None
    if args.mc_beta_db is not None:
        mc_cfg = cfg.with_user(si_residual=db_to_linear(args.mc_beta_db))
    spec = xval.CrossvalSpec(delay_links=args.delay_links,
                             delay_tau_db=None if args.delay_tau_db == "config" else float(args.delay_tau_db),
                             delay_cap=args.delay_cap)
    report = xval.crossval(cfg, m, spec, q, mc_cfg)
    _emit(report.format() + "\n", args.out)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdhetnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--method", choices=("general", "special"), default="general")
    p.add_argument("--timing", action="store_true", help="fill the wall_time column")
    _common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="sweep one parameter (optionally per series value)")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True, help="parameter path, e.g. tau_db or tier[2].silence_prob")
    p.add_argument("--grid", required=True, help="start:stop:step or comma list")
    p.add_argument("--series", help="second parameter path drawn as separate curves")
    p.add_argument("--series-values", help="values of the series parameter")
    p.add_argument("--outputs", default=",".join(sweep.OUTPUTS))
    p.add_argument("--method", choices=("general", "special"), default="general")
    p.add_argument("--timing", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("preset", help="run a bundled figure preset")
    p.add_argument("name", choices=presets.PRESET_NAMES)
    p.add_argument("--plot", help="also write a plotting script at this path")
    p.add_argument("--write-config", help="copy the preset's config file here")
    p.add_argument("--method", choices=("general", "special"), default="general")
    p.add_argument("--timing", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("crossval", help="compare analytical and Monte Carlo engines")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config")
    src.add_argument("--preset", choices=presets.PRESET_NAMES)
    p.add_argument("--delay-links", type=int, default=4000)
    p.add_argument("--delay-tau-db", default="-10", help="τ for the delay check, or 'config'")
    p.add_argument("--mc-beta-db", type=float, help="run the simulator with this β instead (mutation test)")
    _common(p, engine=False, delay_cap=1e4)
    p.set_defaults(func=cmd_crossval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (configio.ParseError, ValidationError, sweep.SweepError, PlotScriptError,
            ValueError, KeyError) as exc:
        print(f"fdhetnet: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
