import csv
import io
import math
import subprocess
import sys

import pytest

from fdhetnet import analysis, montecarlo, sweep
from fdhetnet.model import DuplexMode, db_to_linear
from fdhetnet.plotting import PlotScriptError, emit_plot_script
from fdhetnet.presets import PRESET_NAMES, get_preset
from fdhetnet.sweep import SweepError, SweepSpec, apply_param, parse_grid, run_sweep, write_csv


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_parse_grid():
    assert parse_grid("-10:10:1") == tuple(float(x) for x in range(-10, 11))
    assert parse_grid("0:0.9:0.1")[-1] == 0.9
    assert len(parse_grid("0:0.9:0.1")) == 10
    assert parse_grid("1, 2,5") == (1.0, 2.0, 5.0)
    with pytest.raises(SweepError):
        parse_grid("0:1:-1")
    with pytest.raises(SweepError):
        parse_grid("a,b")


def test_apply_param_paths(fig2):
    assert apply_param(fig2, "tau_db", 3).common_threshold == pytest.approx(db_to_linear(3))
    assert apply_param(fig2, "tier[2].silence_prob", 0.7).tiers[1].silence_prob == 0.7
    assert apply_param(fig2, "tier[2].density_ratio", 10).tiers[1].density == pytest.approx(1e-5)
    assert apply_param(fig2, "user.si_residual_db", -90).user.si_residual == pytest.approx(1e-9)
    assert apply_param(fig2, "beta_db", -50).user.si_residual == pytest.approx(1e-5)
    for bad in ("tier[3].density", "tier[1].colour", "user.speed", "gamma"):
        with pytest.raises(SweepError):
            apply_param(fig2, bad, 1.0)


def test_spec_invariants(fig2):
    with pytest.raises(SweepError, match="empty"):
        SweepSpec(fig2, "tau_db", ()).check()
    with pytest.raises(SweepError, match="monotone"):
        SweepSpec(fig2, "tau_db", (0.0, 1.0, 1.0)).check()
    with pytest.raises(SweepError):
        SweepSpec(fig2, "tier[9].density", (1.0,)).check()
    with pytest.raises(SweepError):
        SweepSpec(fig2, "tau_db", (1.0,), outputs=("latency",)).check()


def test_fig2_preset_grid_size():
    pre = get_preset("fig2")
    rows = rows_of(write_csv(run_sweep(pre.sweep), 2))
    assert len(rows) == 63
    assert [r["series_value"] for r in rows[::21]] == ["0.1", "0.5", "0.9"]
    assert all(r["error"] == "" for r in rows)


def test_single_point_matches_direct(fig2):
    rows = run_sweep(SweepSpec(fig2, "tau_db", (-4.0,)))
    cfg = apply_param(fig2, "tau_db", -4.0)
    res = analysis.delay(cfg)
    assert rows[0]["d_fd"] == res.d_fd
    assert rows[0]["d_hd"] == res.d_hd
    assert rows[0]["d2"] == res.per_tier[1].d_total
    assert rows[0]["eta"] == analysis.energy_efficiency(cfg, res.fd, res.hd).eta


def test_diverged_written_as_div(fig2):
    spec = SweepSpec(fig2, "tau_db", (10.0,), "chi", (0.1,))
    row = rows_of(write_csv(run_sweep(spec), 2))[0]
    assert row["d_hd"] == "div" and row["diverged_hd"] == "1"
    assert row["diverged_fd"] == "0" and float(row["d_fd"]) > 0


def test_failure_recorded_in_row(fig2):
    spec = SweepSpec(fig2.with_tier(1, pathloss_alpha=4.0), "tau_db", (-10.0, 0.0))
    rows = run_sweep(spec, method="special")
    assert all("AlphaMismatch" in r["error"] for r in rows)


def test_columns_order():
    assert sweep.columns(2)[:9] == ["series", "series_value", "param", "value", "engine",
                                    "d_fd", "d_fd_err", "d_hd", "d_hd_err"]
    assert sweep.columns(3)[9:18] == ["d1_fd", "d1_hd", "d1", "d2_fd", "d2_hd", "d2", "d3_fd", "d3_hd", "d3"]


def test_both_engines_agreement_column(fig2):
    spec = SweepSpec(fig2, "tau_db", (-10.0,), engine="both", outputs=("delay_fd", "delay_hd"))
    m = montecarlo.SimulationSettings(n_realizations=400, delay_cap=1e3)
    an, mc = run_sweep(spec, msettings=m)
    assert an["engine"] == "analytical" and mc["engine"] == "mc"
    assert mc["agreement_fd"] == pytest.approx(abs(an["d_fd"] - mc["d_fd"]) / mc["d_fd_err"])
    assert "agreement_fd" not in an


def test_analytical_csv_repeatable(fig2):
    spec = SweepSpec(fig2, "tau_db", parse_grid("-10:10:5"), "chi", (0.1, 0.9))
    assert write_csv(run_sweep(spec), 2) == write_csv(run_sweep(spec, n_jobs=2), 2)


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_presets_resolve(name):
    pre = get_preset(name)
    pre.sweep.check()
    assert pre.panels
    if name == "fig6":
        assert len(pre.panels) == 1 and pre.panels[0].columns == ("d_fd",)
    if name in ("fig2", "fig3"):
        assert [p.columns for p in pre.panels] == [("d_fd", "d_hd"), ("eta",)]


def test_plot_script_two_panels(tmp_path):
    pre = get_preset("fig2")
    csv_path = tmp_path / "fig2.csv"
    write_csv(run_sweep(SweepSpec(pre.config, "tau_db", (-5.0, 0.0), "chi", (0.5,))), 2, csv_path)
    script = emit_plot_script(csv_path, pre)
    text = script.read_text()
    assert "energy efficiency (nats/Joule/Hz)" in text and "local delay (slots)" in text
    assert "SIR threshold τ (dB)" in text
    pytest.importorskip("matplotlib")
    subprocess.run([sys.executable, str(script)], check=True)
    assert (tmp_path / "fig2.png").stat().st_size > 0


def test_plot_script_fig6_single_panel(tmp_path):
    pre = get_preset("fig6")
    csv_path = tmp_path / "fig6.csv"
    write_csv(run_sweep(SweepSpec(pre.config, "tau_db", (-5.0, 0.0), "beta_db", (-70.0,),
                                  outputs=("delay_fd",))), 2, csv_path)
    text = emit_plot_script(csv_path, pre).read_text()
    assert "PANELS = [('local delay (slots)', ['d_fd'], True)]" in text


def test_plot_script_refuses_empty_csv(tmp_path):
    pre = get_preset("fig2")
    empty = tmp_path / "empty.csv"
    empty.write_text(",".join(sweep.columns(2)) + "\n")
    with pytest.raises(PlotScriptError, match="no data rows"):
        emit_plot_script(empty, pre)
    assert not (tmp_path / "plot_fig2.py").exists()
    with pytest.raises(PlotScriptError, match="no such"):
        emit_plot_script(tmp_path / "missing.csv", pre)


def test_plot_script_missing_column(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("series,series_value,value,engine,d_fd\n,,1,analytical,2\n")
    with pytest.raises(PlotScriptError, match="d_hd, eta"):
        emit_plot_script(bad, get_preset("fig2"))
