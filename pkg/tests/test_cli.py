import csv
import io

import pytest

from fdhetnet import cli
from fdhetnet.presets import preset_text


@pytest.fixture
def fig2_file(tmp_path):
    p = tmp_path / "fig2.ini"
    p.write_text(preset_text("fig2"))
    return p


def rows(path):
    return list(csv.DictReader(open(path, newline="")))


def test_eval(fig2_file, tmp_path):
    out = tmp_path / "e.csv"
    assert cli.main(["eval", "--config", str(fig2_file), "--out", str(out)]) == 0
    (row,) = rows(out)
    assert row["engine"] == "analytical" and float(row["d_fd"]) > 0 and row["wall_time"] == ""


def test_eval_special_matches_general(fig2_file, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(["eval", "--config", str(fig2_file), "--out", str(a)])
    cli.main(["eval", "--config", str(fig2_file), "--method", "special", "--out", str(b)])
    assert float(rows(a)[0]["d_fd"]) == pytest.approx(float(rows(b)[0]["d_fd"]), rel=1e-6)


def test_sweep_to_stdout(fig2_file, capsys):
    code = cli.main(["sweep", "--config", str(fig2_file), "--param", "tier[2].silence_prob",
                     "--grid", "0.1,0.5", "--outputs", "delay_fd,ee"])
    assert code == 0
    got = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [r["value"] for r in got] == ["0.1", "0.5"]
    assert got[0]["d_hd"] != "" and got[0]["d1"] == ""


def test_preset_with_plot(tmp_path):
    out, plot, ini = tmp_path / "f6.csv", tmp_path / "p.py", tmp_path / "f6.ini"
    assert cli.main(["preset", "fig6", "--out", str(out), "--plot", str(plot),
                     "--write-config", str(ini)]) == 0
    assert len(rows(out)) == 63
    assert plot.exists() and ini.read_text() == preset_text("fig6")


def test_preset_repeatable(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(["preset", "fig7", "--out", str(a)])
    cli.main(["preset", "fig7", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_bad_config_reports_error(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text(preset_text("fig2").replace("tx_power = 46 dBm", "tx_power = 46"))
    assert cli.main(["eval", "--config", str(bad)]) == 2
    assert "explicit unit" in capsys.readouterr().err


def test_bad_sweep_path(fig2_file, capsys):
    assert cli.main(["sweep", "--config", str(fig2_file), "--param", "tier[4].density",
                     "--grid", "1,2"]) == 2
    assert "out of range" in capsys.readouterr().err


def test_plot_needs_out():
    assert cli.main(["preset", "fig2", "--plot", "x.py"]) == 2


def test_crossval_exit_codes(tmp_path):
    args = ["crossval", "--preset", "fig2", "--realizations", "2000", "--delay-links", "300"]
    assert cli.main(args + ["--out", str(tmp_path / "ok.txt")]) == 0
    assert cli.main(args + ["--mc-beta-db", "-40", "--out", str(tmp_path / "bad.txt")]) == 1
    assert "failed" in (tmp_path / "bad.txt").read_text()
