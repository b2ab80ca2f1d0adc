"""Figures from jumpfield result files.

The report layer reads only the published CSV/JSON artifacts; it never
imports the simulation package.  Four figure kinds:

  rate-plot        log-log deviation vs eps from a hydro ladder CSV, with
                   the least-squares slope annotated
  profile-overlay  MC density histogram with error bars against the
                   evolved-intensity reference, from profile.csv
  trajectory       large-time pairing vs t with the asymptote line
  envelope         ball averages vs radius with the oscillation envelope

Rendering is read-only and deterministic: figures are written without
timestamp metadata so re-running a spec reproduces identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


class ReportError(Exception):
    pass


class EmptyInput(ReportError):
    pass


class MissingColumn(ReportError):
    pass


KINDS = ("rate-plot", "profile-overlay", "trajectory", "envelope")


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple
    output: str
    xlabel: str = ""
    ylabel: str = ""
    title: str = ""
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ReportError(f"unknown figure kind '{self.kind}'")
        if not self.inputs:
            raise ReportError("figure spec needs at least one input")


def read_csv(path):
    path = Path(path)
    if not path.exists():
        raise EmptyInput(f"input {path} does not exist")
    text = path.read_text().strip()
    if not text:
        raise EmptyInput(f"input {path} is empty")
    lines = text.split("\n")
    columns = lines[0].split(",")
    if len(lines) == 1:
        raise EmptyInput(f"input {path} has a header but no rows")
    data = {c: [] for c in columns}
    for line in lines[1:]:
        for c, cell in zip(columns, line.split(",")):
            try:
                data[c].append(float(cell))
            except ValueError:
                data[c].append(np.nan if cell == "" else cell)
    return {c: np.asarray(v) for c, v in data.items()}


def require(data, columns, path):
    for c in columns:
        if c not in data:
            raise MissingColumn(f"column '{c}' missing from {path}")


def _save(fig, output):
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    targets = []
    for ext in (".png", ".svg"):
        target = output if output.suffix == ext \
            else output.with_name(output.stem + ext)
        fig.savefig(target, metadata={"Date": None} if ext == ".png"
                    else {"Date": None}, dpi=120)
        targets.append(target)
    plt.close(fig)
    return targets


def fitted_slope(eps, deviation):
    """Least-squares slope of log2(deviation) against log2(eps)."""
    eps = np.asarray(eps, dtype=float)
    dev = np.asarray(deviation, dtype=float)
    keep = (eps > 0) & (dev > 0)
    if keep.sum() < 2:
        raise EmptyInput("need two positive rungs for a rate fit")
    return float(np.polyfit(np.log2(eps[keep]), np.log2(dev[keep]), 1)[0])


def render_rate_plot(spec: FigureSpec):
    data = read_csv(spec.inputs[0])
    require(data, ("eps", "deviation"), spec.inputs[0])
    slope = fitted_slope(data["eps"], data["deviation"])
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.loglog(data["eps"], data["deviation"], "o-", base=2)
    ax.set_xlabel(spec.xlabel or "eps")
    ax.set_ylabel(spec.ylabel or "deviation from limit")
    ax.set_title(spec.title or "convergence rate")
    ax.annotate(f"fitted slope {slope:.3f}", xy=(0.05, 0.9),
                xycoords="axes fraction")
    ax.grid(True, which="both", alpha=0.3)
    paths = _save(fig, spec.output)
    return {"slope": slope, "files": paths}


def render_profile_overlay(spec: FigureSpec):
    data = read_csv(spec.inputs[0])
    require(data, ("bin_center", "rho_hat", "stderr", "reference"),
            spec.inputs[0])
    times = np.unique(data["time"]) if "time" in data else [None]
    pick = float(spec.options.get("time", times[-1]))
    mask = data["time"] == pick if "time" in data \
        else np.ones(data["bin_center"].size, bool)
    if not mask.any():
        raise EmptyInput(f"no rows at time {pick}")
    x = data["bin_center"][mask]
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.errorbar(x, data["rho_hat"][mask], yerr=3.0 * data["stderr"][mask],
                fmt="o", ms=3, capsize=2, label="MC histogram (3 se)")
    ax.plot(x, data["reference"][mask], "-", label="evolved intensity")
    ax.set_xlabel(spec.xlabel or "x")
    ax.set_ylabel(spec.ylabel or "density")
    ax.set_title(spec.title or f"density profile, t={pick}")
    ax.legend(loc="best", fontsize=8)
    covered = np.abs(data["rho_hat"][mask] - data["reference"][mask]) \
        <= 3.0 * data["stderr"][mask]
    paths = _save(fig, spec.output)
    return {"within_bars_fraction": float(covered.mean()), "files": paths}


def render_trajectory(spec: FigureSpec):
    data = read_csv(spec.inputs[0])
    require(data, ("t", "value"), spec.inputs[0])
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.plot(data["t"], data["value"], "o-", label="pairing")
    if "reference" in data and np.isfinite(data["reference"]).any():
        ref = float(np.asarray(data["reference"])[np.isfinite(
            data["reference"])][-1])
        ax.axhline(ref, ls="--", color="gray", label="asymptote")
    ax.set_xlabel(spec.xlabel or "t")
    ax.set_ylabel(spec.ylabel or "<e^{tA} phi, z>")
    ax.set_title(spec.title or "large-time trajectory")
    ax.legend(loc="best", fontsize=8)
    paths = _save(fig, spec.output)
    return {"files": paths}


def render_envelope(spec: FigureSpec):
    data = read_csv(spec.inputs[0])
    require(data, ("radius", "average"), spec.inputs[0])
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.semilogx(data["radius"], data["average"], "o-", base=2)
    tail = data["average"][-6:] if data["average"].size >= 6 \
        else data["average"]
    for level, label in ((tail.min(), "liminf"), (tail.max(), "limsup")):
        ax.axhline(level, ls=":", color="gray")
        ax.annotate(f"{label} {level:.3f}",
                    xy=(float(data["radius"][0]), level),
                    fontsize=7, va="bottom")
    ax.set_xlabel(spec.xlabel or "radius")
    ax.set_ylabel(spec.ylabel or "ball average")
    ax.set_title(spec.title or "oscillating mean envelope")
    paths = _save(fig, spec.output)
    return {"envelope": (float(tail.min()), float(tail.max())),
            "files": paths}


_RENDERERS = {
    "rate-plot": render_rate_plot,
    "profile-overlay": render_profile_overlay,
    "trajectory": render_trajectory,
    "envelope": render_envelope,
}


def render(spec: FigureSpec):
    """Render one figure; returns the renderer's summary dict."""
    return _RENDERERS[spec.kind](spec)
