"""Figure rendering from report manifests.

Four figure kinds are supported: log-log decay plots (with the fitted line
drawn from the slope and intercept stored in the report), histograms,
integer-labelled strata heatmaps, and 3-D path traces.  Annotations show
report metrics to three decimals.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib import colors

SUPPORTED_SCHEMA = 1


class SchemaMismatchError(Exception):
    """Report or manifest schema version not supported by this renderer."""


@dataclass(frozen=True)
class RenderedFigure:
    output: str
    kind: str
    paths: list = field(default_factory=list)
    classes: tuple = ()


def _load_json(path: Path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _read_series(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    cols = {name: [] for name in header}
    for row in rows:
        for name, cell in zip(header, row):
            cols[name].append(cell)
    out = {}
    for name, cells in cols.items():
        try:
            out[name] = np.asarray(cells, dtype=float)
        except ValueError:
            out[name] = np.asarray(cells)
    return out


def _metric_values(report: dict) -> dict[str, float]:
    return {m["name"]: float(m["value"]) for m in report.get("metrics", [])}


def _annotation_lines(figure: dict, metrics: dict[str, float]) -> list[str]:
    lines = []
    for label, metric_name in figure.get("annotate", {}).items():
        if metric_name in metrics:
            lines.append(f"{label} = {metrics[metric_name]:.3f}")
    return lines


def _apply_annotations(ax, lines: list[str]) -> None:
    if not lines:
        return
    writer = getattr(ax, "text2D", ax.text)
    writer(0.03, 0.03, "\n".join(lines), transform=ax.transAxes,
           fontsize=9, va="bottom", ha="left",
           bbox={"boxstyle": "round", "facecolor": "white", "alpha": 0.8})


def _render_decay(ax, figure, series, metrics):
    x = series[figure["x"]]
    y = series[figure["y"]]
    good = (x > 0) & (y > 0)
    ax.plot(x[good], y[good], "o", color="tab:blue")
    if good.sum() >= 2:
        ax.set_xscale("log")
        ax.set_yscale("log")
        slope_name = figure.get("annotate", {}).get("slope")
        icept_name = figure.get("annotate", {}).get("intercept")
        if slope_name in metrics and icept_name in metrics:
            slope = metrics[slope_name]
            icept = metrics[icept_name]
            xs = np.geomspace(x[good].min(), x[good].max(), 50)
            ax.plot(xs, np.exp(icept) * xs ** slope, "-", color="tab:orange",
                    label="stored fit")
            ax.legend(loc="upper left", fontsize=8)
    ax.set_xlabel(figure["x"])
    ax.set_ylabel(figure["y"])


def _render_histogram(ax, figure, series, metrics):
    vals = series[figure["x"]]
    ax.hist(np.asarray(vals, float), bins=24, color="tab:blue", alpha=0.8)
    ax.set_xlabel(figure["x"])
    ax.set_ylabel("count")


def _render_strata(ax, figure, series, metrics) -> tuple:
    ii = series[figure["x"]].astype(int)
    jj = series[figure["y"]].astype(int)
    vals = series[figure["value"]].astype(int)
    grid = np.full((ii.max() - ii.min() + 1, jj.max() - jj.min() + 1), np.nan)
    grid[ii - ii.min(), jj - jj.min()] = vals
    labels = tuple(sorted(np.unique(vals).tolist()))
    cmap = plt.get_cmap("viridis", len(labels))
    norm = colors.BoundaryNorm(
        [lab - 0.5 for lab in labels] + [labels[-1] + 0.5], len(labels))
    im = ax.imshow(grid.T, origin="lower", cmap=cmap, norm=norm,
                   interpolation="nearest")
    cbar = ax.figure.colorbar(im, ax=ax, ticks=list(labels))
    cbar.set_label(figure["value"])
    ax.set_xlabel(figure["x"])
    ax.set_ylabel(figure["y"])
    return labels


def _render_path3d(fig, figure, series, metrics):
    ax = fig.add_subplot(projection="3d")
    ax.plot(series[figure["x"]], series[figure["y"]], series[figure["z"]],
            color="tab:blue")
    ax.set_xlabel(figure["x"])
    ax.set_ylabel(figure["y"])
    ax.set_zlabel(figure["z"])
    return ax


def render_figures(manifest_path, out_dir, formats=("svg", "png")) -> list[RenderedFigure]:
    """Render every figure in the manifest; returns one record per figure.

    Figures with a missing series file are skipped with a warning.  A schema
    version other than the supported one raises SchemaMismatchError.
    """
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    manifest = _load_json(manifest_path)
    if manifest.get("schema_version") != SUPPORTED_SCHEMA:
        raise SchemaMismatchError(
            f"manifest schema {manifest.get('schema_version')!r}, "
            f"renderer supports {SUPPORTED_SCHEMA}"
        )
    report = _load_json(base / manifest["report"])
    if report.get("schema_version") != SUPPORTED_SCHEMA:
        raise SchemaMismatchError(
            f"report schema {report.get('schema_version')!r}, "
            f"renderer supports {SUPPORTED_SCHEMA}"
        )
    metrics = _metric_values(report)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rendered: list[RenderedFigure] = []
    for figure in manifest.get("figures", []):
        series_name = figure.get("series")
        series_path = base / series_name if series_name else None
        if series_path is None or not series_path.exists():
            warnings.warn(f"missing series {series_name!r}; skipping "
                          f"{figure.get('output')}")
            continue
        series = _read_series(series_path)
        classes: tuple = ()
        if figure["kind"] == "path3d":
            fig = plt.figure(figsize=(6, 5))
            ax = _render_path3d(fig, figure, series, metrics)
        else:
            fig, ax = plt.subplots(figsize=(6, 4.5))
            if figure["kind"] == "decay":
                _render_decay(ax, figure, series, metrics)
            elif figure["kind"] == "histogram":
                _render_histogram(ax, figure, series, metrics)
            elif figure["kind"] == "strata":
                classes = _render_strata(ax, figure, series, metrics)
            else:
                warnings.warn(f"unknown figure kind {figure['kind']!r}; skipping")
                plt.close(fig)
                continue
        _apply_annotations(ax, _annotation_lines(figure, metrics))
        ax.set_title(figure.get("title", figure["output"]))
        paths = []
        for fmt in formats:
            path = out_dir / f"{figure['output']}.{fmt}"
            fig.savefig(path, bbox_inches="tight")
            paths.append(path)
        plt.close(fig)
        rendered.append(RenderedFigure(figure["output"], figure["kind"],
                                       paths, classes))
    return rendered
