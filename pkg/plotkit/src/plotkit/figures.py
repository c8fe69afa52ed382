"""Render simulator CSV artifacts into figures.

Strict consumer of the simulator's CSV schemas: rate sweeps
(P_max_dBm, method, sum_rate, ...), BER sweeps (N0, receiver, ber, ...), and
beam maps (x, y, power_dbm). Comment lines starting with '#' carry run
provenance and are ignored. No domain quantity is computed here; plotting is
a pure function of the CSV content plus the figure specification.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


class PlotError(ValueError):
    """Base error for unrenderable input."""


class MissingColumnError(PlotError):
    def __init__(self, column: str, path: str, available):
        super().__init__(
            f"{path}: required column {column!r} not found (available: {', '.join(available)})"
        )
        self.column = column


class EmptyDataError(PlotError):
    def __init__(self, path: str):
        super().__init__(f"{path}: no data rows to plot")


class RaggedGridError(PlotError):
    def __init__(self, path: str, detail: str):
        super().__init__(f"{path}: grid is not a complete lattice ({detail})")


@dataclass(frozen=True)
class Marker:
    x: float
    y: float
    role: str  # "user" or "eve"


@dataclass(frozen=True)
class FigureSpec:
    """What to render: input CSVs, column mapping, axes, and marker overlay."""

    csv_paths: tuple
    kind: str  # "line" or "heatmap"
    x_column: str
    y_column: str
    series_column: str | None = None
    x_label: str = ""
    y_label: str = ""
    title: str = ""
    log_y: bool = False
    display_floor: float | None = None  # display-only clamp for log axes
    markers: tuple = field(default_factory=tuple)


def _read_csv(path) -> pd.DataFrame:
    frame = pd.read_csv(path, comment="#")
    if frame.empty:
        raise EmptyDataError(str(path))
    return frame


def _require(frame: pd.DataFrame, column: str, path) -> None:
    if column not in frame.columns:
        raise MissingColumnError(column, str(path), list(frame.columns))


def lines_figure(spec: FigureSpec):
    """Build the line figure; one curve per series value, legend from it."""
    frames = []
    for path in spec.csv_paths:
        frame = _read_csv(path)
        _require(frame, spec.x_column, path)
        _require(frame, spec.y_column, path)
        if spec.series_column is not None:
            _require(frame, spec.series_column, path)
        frames.append(frame)
    data = pd.concat(frames, ignore_index=True)
    data = data.dropna(subset=[spec.y_column])
    if data.empty:
        raise EmptyDataError(", ".join(str(p) for p in spec.csv_paths))

    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    groups = (
        [(label, grp) for label, grp in data.groupby(spec.series_column, sort=True)]
        if spec.series_column is not None
        else [("", data)]
    )
    for label, grp in groups:
        grp = grp.sort_values(spec.x_column)
        y = grp[spec.y_column].to_numpy(dtype=float)
        if spec.log_y and spec.display_floor is not None:
            y = np.maximum(y, spec.display_floor)
        ax.plot(grp[spec.x_column].to_numpy(dtype=float), y, marker="o", label=str(label))
    if spec.log_y:
        ax.set_yscale("log")
    if spec.series_column is not None:
        ax.legend()
    ax.set_xlabel(spec.x_label or spec.x_column)
    ax.set_ylabel(spec.y_label or spec.y_column)
    if spec.title:
        ax.set_title(spec.title)
    ax.grid(True, alpha=0.3)
    return fig, ax


def heatmap_figure(spec: FigureSpec, value_column: str | None = None):
    """Build the heatmap figure with user asterisks and an eavesdropper circle."""
    if len(spec.csv_paths) != 1:
        raise PlotError("heatmaps take exactly one CSV input")
    path = spec.csv_paths[0]
    frame = _read_csv(path)
    value_column = value_column or spec.y_column
    for column in (spec.x_column, "y", value_column):
        _require(frame, column, path)
    xs = np.sort(frame[spec.x_column].unique())
    ys = np.sort(frame["y"].unique())
    if len(frame) != len(xs) * len(ys):
        raise RaggedGridError(
            str(path), f"{len(frame)} rows != {len(xs)} x {len(ys)} lattice points"
        )
    pivot = frame.pivot_table(index="y", columns=spec.x_column, values=value_column, aggfunc="first")
    if pivot.isna().any().any():
        raise RaggedGridError(str(path), "missing lattice points after pivot")
    grid = pivot.to_numpy(dtype=float)

    fig, ax = plt.subplots(figsize=(6.0, 5.0), dpi=120)
    mesh = ax.pcolormesh(xs, ys, grid, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=spec.y_label or value_column)
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    for marker in spec.markers:
        if not (x_lo <= marker.x <= x_hi and y_lo <= marker.y <= y_hi):
            warnings.warn(
                f"marker at ({marker.x}, {marker.y}) outside grid extent; clipped",
                stacklevel=2,
            )
            continue
        if marker.role == "eve":
            ax.plot(marker.x, marker.y, "o", markerfacecolor="none",
                    markeredgecolor="red", markersize=12, markeredgewidth=2)
        else:
            ax.plot(marker.x, marker.y, "*", color="red", markersize=14)
    ax.set_xlabel(spec.x_label or spec.x_column)
    ax.set_ylabel("y")
    if spec.title:
        ax.set_title(spec.title)
    return fig, ax


def _save(fig, out_path) -> Path:
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    # Strip the library version text so re-renders are byte-stable.
    fig.savefig(out, metadata={"Software": None})
    plt.close(fig)
    return out


def plot_lines(spec: FigureSpec, out_path) -> Path:
    fig, _ = lines_figure(spec)
    return _save(fig, out_path)


def plot_heatmap(spec: FigureSpec, out_path, value_column: str | None = None) -> Path:
    fig, _ = heatmap_figure(spec, value_column=value_column)
    return _save(fig, out_path)


def rate_sweep_spec(csv_paths, markers=()) -> FigureSpec:
    """Preset for the simulator's rate-sweep schema."""
    return FigureSpec(
        csv_paths=tuple(csv_paths),
        kind="line",
        x_column="P_max_dBm",
        y_column="sum_rate",
        series_column="method",
        x_label="transmit power budget (dBm)",
        y_label="sum rate (bits/s/Hz)",
        title="Achievable sum rate",
        markers=tuple(markers),
    )


def ber_sweep_spec(csv_paths, markers=()) -> FigureSpec:
    """Preset for the simulator's BER-sweep schema (log BER, display floor)."""
    return FigureSpec(
        csv_paths=tuple(csv_paths),
        kind="line",
        x_column="N0",
        y_column="ber",
        series_column="receiver",
        x_label="noise spectral density N0 (mW/Hz)",
        y_label="bit error rate",
        title="Bit error rate",
        log_y=True,
        display_floor=1e-6,
        markers=tuple(markers),
    )


def beammap_spec(csv_path, markers=()) -> FigureSpec:
    """Preset for the simulator's beam-map schema."""
    return FigureSpec(
        csv_paths=(csv_path,),
        kind="heatmap",
        x_column="x",
        y_column="power_dbm",
        x_label="x (m)",
        y_label="received power (dBm)",
        title="Beam response",
        markers=tuple(markers),
    )
