"""Emit stand-alone matplotlib scripts that redraw a preset from its CSV."""
from __future__ import annotations

import csv
from pathlib import Path

from .presets import FigurePreset

_TEMPLATE = '''"""Redraw {name}: {title}.

Generated by fdhetnet; reads {csv_name} and writes {png_name} next to it.
Cells marked "div" (diverged) become gaps in the curves.
"""
import csv
import math
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
CSV_PATH = os.path.join(HERE, {csv_name!r})
OUT_PATH = os.path.join(HERE, {png_name!r})
PANELS = {panels!r}
XLABEL = {xlabel!r}


def cell(text):
    if text in ("", "div"):
        return math.nan
    return float(text)


def main():
    with open(CSV_PATH, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    engines = sorted({{r["engine"] for r in rows}})
    series = []
    for r in rows:
        if r["series_value"] not in series:
            series.append(r["series_value"])
    label_of = rows[0]["series"] or "series"
    fig, axes = plt.subplots(1, len(PANELS), figsize=(5.5 * len(PANELS), 4.2), squeeze=False)
    for ax, (ylabel, cols, log_y) in zip(axes[0], PANELS):
        for eng in engines:
            for s in series:
                pick = [r for r in rows if r["engine"] == eng and r["series_value"] == s]
                x = [float(r["value"]) for r in pick]
                for col in cols:
                    y = [cell(r[col]) for r in pick]
                    name = col if s == "" else f"{{col}}, {{label_of}} = {{s}}"
                    if len(engines) > 1:
                        name += f" ({{eng}})"
                    style = "--" if eng == "mc" else "-"
                    ax.plot(x, y, style, marker="o", markersize=3, label=name)
        ax.set_xlabel(XLABEL)
        ax.set_ylabel(ylabel)
        if log_y:
            ax.set_yscale("log")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=7)
    fig.suptitle({title!r})
    fig.tight_layout()
    fig.savefig(OUT_PATH, dpi=150)


if __name__ == "__main__":
    main()
'''


class PlotScriptError(ValueError):
    pass


def emit_plot_script(csv_path, preset: FigurePreset, script_path=None) -> Path:
    """Write the plotting script for ``preset`` beside ``csv_path`` (or at ``script_path``)."""
    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise PlotScriptError(f"{csv_path}: no such CSV file")
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        first = next(reader, None)
    if header is None or first is None:
        raise PlotScriptError(f"{csv_path}: CSV has no data rows")
    need = {"series", "series_value", "value", "engine"}
    for p in preset.panels:
        need.update(p.columns)
    missing = sorted(need - set(header))
    if missing:
        raise PlotScriptError(f"{csv_path}: missing column(s) {', '.join(missing)}")
    script_path = Path(script_path) if script_path else csv_path.with_name(f"plot_{preset.name}.py")
    panels = [(p.ylabel, list(p.columns), p.log_y) for p in preset.panels]
    rel_csv = Path(csv_path.resolve()).relative_to(script_path.resolve().parent) \
        if csv_path.resolve().parent == script_path.resolve().parent else csv_path.resolve()
    text = _TEMPLATE.format(name=preset.name, title=preset.title, csv_name=str(rel_csv),
                            png_name=f"{preset.name}.png", panels=panels, xlabel=preset.xlabel)
    script_path.write_text(text, encoding="utf-8")
    return script_path
