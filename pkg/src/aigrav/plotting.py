"""Static SVG figures."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class Trace:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    style: str = "-"


def emit_plot(traces, path, *, style="line", xlabel="", ylabel="", title="", note="", timestamp=True, markers=()):
    """Write ``traces`` to a self-contained SVG file.

    ``style`` is ``'line'`` or ``'loglog'``. ``markers`` are vertical
    reference lines given as ``(x, label)`` pairs. With ``timestamp=False``
    the file carries no creation date and is byte-identical across runs.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if isinstance(traces, Trace):
        traces = [traces]
    traces = list(traces)
    if not traces or any(np.asarray(t.x).size == 0 for t in traces):
        raise ValueError("nothing to plot: empty data")
    for t in traces:
        if not (np.all(np.isfinite(t.x)) and np.all(np.isfinite(t.y))):
            raise ValueError(f"trace {t.label!r} holds non-finite values")
    if style not in ("line", "loglog"):
        raise ValueError(f"unknown plot style {style!r}")

    with matplotlib.rc_context({"svg.hashsalt": "aigrav", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7.5, 4.5))
        for t in traces:
            x, y = np.asarray(t.x, float), np.asarray(t.y, float)
            if style == "loglog":
                keep = (x > 0) & (y > 0)
                x, y = x[keep], y[keep]
            ax.plot(x, y, t.style, lw=1.0, label=t.label or None)
        for xm, label in markers:
            ax.axvline(xm, color="0.4", ls=":", lw=0.8)
            if label:
                ax.annotate(label, (xm, 1.0), xycoords=("data", "axes fraction"), rotation=90, fontsize=7, va="top")
        if style == "loglog":
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title, fontsize=10)
        ax.grid(True, which="both", ls=":", lw=0.5, alpha=0.6)
        if any(t.label for t in traces):
            ax.legend(fontsize=8)
        if note:
            fig.text(0.01, 0.01, note, fontsize=7, color="0.3")
        fig.tight_layout()
        metadata = {} if timestamp else {"Date": None}
        fig.savefig(path, format="svg", metadata=metadata)
        plt.close(fig)
    return path


def decimate_for_plot(x, y, max_points=4000, log=False):
    """Thin dense traces to at most ``max_points`` by taking the max within buckets."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size <= max_points:
        return x, y
    if log:
        keep = x > 0
        x, y = x[keep], y[keep]
        edges = np.geomspace(x[0], x[-1], max_points + 1)
    else:
        edges = np.linspace(x[0], x[-1], max_points + 1)
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, max_points - 1)
    out_x, out_y = [], []
    for b in np.unique(idx):
        sel = np.flatnonzero(idx == b)
        j = sel[np.argmax(y[sel])]
        out_x.append(x[j])
        out_y.append(y[j])
    return np.asarray(out_x), np.asarray(out_y)


def format_title(what: str, scenario: str, seed) -> str:
    seed_part = "" if seed is None else f", seed {seed}"
    return f"{what} [{scenario}{seed_part}]"


def nice(x: float) -> str:
    if x == 0 or not math.isfinite(x):
        return str(x)
    return f"{x:.4g}"
