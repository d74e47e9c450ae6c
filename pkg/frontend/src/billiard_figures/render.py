"""Render eigencurve, scan, and population figures from simulator CSVs.

Inputs are the primary toolkit's artifacts: a ``# manifest:`` comment line,
a header row, then numeric rows.  Rendering never recomputes physics; the
CSV is the single source of numerical truth.  Output is deterministic for
a given style version (fixed hash salt, no timestamps in metadata).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

STYLE_VERSION = "billiard-figures-style-1"
KINDS = ("eigencurves", "scan", "populations")

plt.rcParams["svg.hashsalt"] = STYLE_VERSION


class SchemaError(ValueError):
    """CSV does not carry the columns the figure kind needs."""


@dataclass
class FigureSpec:
    kind: str
    inputs: list[Path]
    output: Path
    overlay: Path | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind: {self.kind}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")


@dataclass
class Table:
    columns: list[str]
    data: np.ndarray
    manifest: dict = field(default_factory=dict)

    def col(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]


def read_csv(path: Path) -> Table:
    path = Path(path)
    manifest: dict = {}
    rows: list[list[str]] = []
    header: list[str] | None = None
    with open(path, newline="") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# manifest:"):
                    try:
                        manifest = json.loads(line.split(":", 1)[1])
                    except json.JSONDecodeError:
                        manifest = {}
                continue
            if header is None:
                header = next(csv.reader([line]))
            else:
                rows.append(next(csv.reader([line])))
    if header is None:
        raise SchemaError(f"{path}: no header row")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric cell ({exc})") from exc
    if data.shape[1] != len(header):
        raise SchemaError(f"{path}: ragged rows vs header {header}")
    return Table(header, data, manifest)


def _require(table: Table, names: list[str], path: Path) -> None:
    missing = [n for n in names if n not in table.columns]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")


def _render_eigencurves(spec: FigureSpec):
    table = read_csv(spec.inputs[0])
    _require(table, ["tau"], spec.inputs[0])
    curves = [c for c in table.columns if c.startswith("e_")]
    if not curves:
        raise SchemaError(f"{spec.inputs[0]}: missing column(s) e_1 ...")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    tau = table.col("tau")
    for name in curves:
        ax.plot(tau, table.col(name), lw=1.0)
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel(r"$E_n(\tau)$")
    ax.set_xlim(float(tau.min()), float(tau.max()))
    return fig


def _render_scan(spec: FigureSpec):
    table = read_csv(spec.inputs[0])
    _require(table, ["omega", "e_min", "e_max"], spec.inputs[0])
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    omega = table.col("omega")
    if spec.overlay is not None:
        ov = read_csv(spec.overlay)
        _require(ov, ["omega_res", "tau_int"], spec.overlay)
        tau_int = ov.col("tau_int")
        # darker vertical lines for longer interaction times
        log_ti = np.log10(np.clip(tau_int, 1.0, None))
        hi = max(float(log_ti.max()), 1e-9)
        for w, s in zip(ov.col("omega_res"), log_ti):
            gray = 0.75 * (1.0 - s / hi)
            ax.axvline(w, color=(gray, gray, gray), lw=1.0, zorder=1)
    ax.plot(omega, table.col("e_max"), lw=1.2, color="tab:red", zorder=2)
    ax.plot(omega, table.col("e_min"), lw=1.2, color="tab:blue", zorder=2)
    ax.set_xlabel(r"$\omega$")
    ax.set_ylabel(r"$E_{\min},\ E_{\max}$")
    ax.set_xlim(float(omega.min()), float(omega.max()))
    return fig


def _render_populations(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    t_hi = 0.0
    for path in spec.inputs:
        table = read_csv(path)
        _require(table, ["tau"], path)
        traces = [c for c in table.columns if c.startswith("p_")]
        if not traces:
            raise SchemaError(f"{path}: missing column(s) p_*")
        tau = table.col("tau")
        t_hi = max(t_hi, float(tau.max()))
        for name in traces:
            style = "--" if name.endswith("_pred") else "-"
            ax.plot(tau, table.col(name), style, lw=1.0, label=name)
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel(r"$p_n(\tau)$")
    ax.set_xlim(0.0, t_hi)
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="upper right", fontsize=7)
    return fig


_RENDERERS = {
    "eigencurves": _render_eigencurves,
    "scan": _render_scan,
    "populations": _render_populations,
}


def render(spec: FigureSpec) -> list[Path]:
    """Render one figure; writes both PNG and SVG next to ``spec.output``."""
    fig = _RENDERERS[spec.kind](spec)
    base = Path(spec.output)
    if base.suffix:
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    outputs = []
    png = base.with_suffix(".png")
    fig.savefig(png, dpi=160, metadata={"Software": STYLE_VERSION})
    outputs.append(png)
    svg = base.with_suffix(".svg")
    fig.savefig(svg, metadata={"Date": None, "Creator": STYLE_VERSION})
    outputs.append(svg)
    plt.close(fig)
    return outputs
