"""Precision and success plots in the OTB style, written straight to file.

Figures are built on the object API (no pyplot state), so plotting is safe
from worker threads, and SVG output is made reproducible by pinning the hash
salt and dropping the date metadata.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from coarsefine.bench.metrics import PRECISION_THRESHOLDS, SUCCESS_THRESHOLDS

STYLE = {
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "coarsefine",
    "svg.fonttype": "path",
}


def _save(fig: Figure, path: Path) -> Path:
    FigureCanvasAgg(fig)
    fig.savefig(path, format=path.suffix.lstrip(".") or "svg", metadata={"Date": None})
    return path


def _curve_figure(x, main, per_sequence, title, xlabel, label, xlim):
    fig = Figure(figsize=(4.0, 3.2), layout="constrained")
    ax = fig.add_subplot()
    for name, curve in sorted(per_sequence.items()):
        ax.plot(x, curve, color="0.7", lw=0.6)
    ax.plot(x, main, color="C0", lw=1.8, label=label)
    ax.set_xlim(*xlim)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("fraction of frames")
    ax.set_title(title)
    ax.legend(loc="lower right" if xlabel.startswith("location") else "lower left", frameon=False)
    return fig


def plot_precision(curve, path, per_sequence=None) -> Path:
    """Precision plot; ``per_sequence`` maps names to curves drawn faintly behind."""
    with matplotlib.rc_context(STYLE):
        fig = _curve_figure(PRECISION_THRESHOLDS, curve, per_sequence or {},
                            "Precision plots of OPE", "location error threshold (px)",
                            f"overall [{curve[20]:.3f}]", (0, 50))
        return _save(fig, Path(path))


def plot_success(curve, path, per_sequence=None) -> Path:
    """Success plot; the legend carries the AUC."""
    with matplotlib.rc_context(STYLE):
        fig = _curve_figure(SUCCESS_THRESHOLDS, curve, per_sequence or {},
                            "Success plots of OPE", "overlap threshold",
                            f"overall [{curve.mean():.3f}]", (0, 1))
        return _save(fig, Path(path))
