"""Figure rendering from fvsim CSV artifacts.

Four figure kinds, one function each, dispatched by `render`:

* qsd_overlay        -- one line per (x, density) CSV, overlaid
* convergence        -- W1 vs N on log-log axes with the fitted slope annotated
* killing_linearity  -- the jump exponent J against time plus its linear fit
* bifurcation        -- stationary means against the interaction strength

Inputs are never modified; rendering the same inputs twice produces the
same image bytes (fixed style, no timestamps).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np
import pandas as pd

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

__all__ = ["FigureRequest", "SchemaError", "render", "FIGURE_KINDS"]

FIGURE_KINDS = ("qsd_overlay", "convergence", "killing_linearity", "bifurcation")

STYLE = {
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 130,
    "savefig.dpi": 130,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
}


class SchemaError(ValueError):
    """An input CSV is missing a required column."""


@dataclass(frozen=True)
class FigureRequest:
    kind: str
    inputs: tuple[Path, ...]
    output: Path

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def _load(path: Path, required: tuple[str, ...]) -> pd.DataFrame:
    if not Path(path).exists():
        raise FileNotFoundError(f"input file {path} does not exist")
    df = pd.read_csv(path)
    for col in required:
        if col not in df.columns:
            raise SchemaError(f"column {col!r} missing from {path}")
    return df


def _save(fig, output: Path) -> None:
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, metadata={"Software": "fvplots"})
    plt.close(fig)


def _render_qsd_overlay(req: FigureRequest) -> dict:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for path in req.inputs:
            df = _load(path, ("x", "density"))
            ax.plot(df["x"], df["density"], label=Path(path).stem)
        ax.set_xlabel("x")
        ax.set_ylabel("density")
        ax.set_title("stationary profile overlay")
        ax.legend()
        _save(fig, req.output)
    return {"curves": len(req.inputs)}


def _render_convergence(req: FigureRequest) -> dict:
    df = _load(req.inputs[0], ("N", "w1"))
    grouped = df.groupby("N")["w1"].median()
    ns = grouped.index.to_numpy(dtype=float)
    w1 = grouped.to_numpy(dtype=float)
    if len(ns) < 2:
        raise SchemaError(f"need at least two distinct N values in {req.inputs[0]}")
    slope, intercept = np.polyfit(np.log(ns), np.log(w1), 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(df["N"], df["w1"], "o", alpha=0.45, label="runs")
        ax.loglog(ns, np.exp(intercept) * ns**slope, "-",
                  label=f"fit: slope {slope:.3f}")
        ax.set_xlabel("N")
        ax.set_ylabel("W1 distance to the deterministic profile")
        ax.set_title("empirical-measure convergence")
        ax.annotate(f"log-log slope = {slope:.3f}", xy=(0.05, 0.08),
                    xycoords="axes fraction")
        ax.legend()
        _save(fig, req.output)
    return {"slope": float(slope)}


def _render_killing_linearity(req: FigureRequest) -> dict:
    df = _load(req.inputs[0], ("t", "J"))
    per_t = df.groupby("t")["J"].first()  # trajectory.csv repeats J per particle row
    t = per_t.index.to_numpy(dtype=float)
    j = per_t.to_numpy(dtype=float)
    if len(t) < 3:
        raise SchemaError(f"need at least three snapshot times in {req.inputs[0]}")
    lo = t[0] + 0.25 * (t[-1] - t[0])  # fit past the initial transient
    mask = t >= lo
    slope, intercept = np.polyfit(t[mask], j[mask], 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(t, j, label="J(t)")
        ax.plot(t[mask], slope * t[mask] + intercept, "--",
                label=f"fit: rate {slope:.4f}")
        ax.set_xlabel("t")
        ax.set_ylabel("normalized jumps J")
        ax.set_title("kill-rate linearity")
        ax.legend()
        _save(fig, req.output)
    return {"rate": float(slope)}


def _render_bifurcation(req: FigureRequest) -> dict:
    df = _load(req.inputs[0], ("gamma", "root"))
    counts = df.groupby("gamma")["root"].count()
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(df["gamma"], df["root"], ".", markersize=4, color="tab:blue")
        ax.set_xlabel("interaction strength gamma")
        ax.set_ylabel("stationary mean")
        ax.set_title("stationary-mean branches")
        _save(fig, req.output)
    return {"max_branches": int(counts.max())}


_RENDERERS = {
    "qsd_overlay": _render_qsd_overlay,
    "convergence": _render_convergence,
    "killing_linearity": _render_killing_linearity,
    "bifurcation": _render_bifurcation,
}


def render(req: FigureRequest) -> dict:
    """Render one figure; returns a small metadata dict (fit slopes etc.)."""
    return _RENDERERS[req.kind](req)
