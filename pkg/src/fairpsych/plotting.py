"""SVG line charts of validation sweeps."""

from __future__ import annotations

from pathlib import Path

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .evaluate import SweepCurve

FAIRNESS_SERIES = {
    "di_error": ("di_error", "Disparate impact error"),
    "aod": ("aod", "Average odds difference"),
}


def _series(values):
    return [float("nan") if v is None else v for v in values]


def plot_sweep(curve: SweepCurve, threshold: float, fairness: str, path: Path, title: str = "") -> Path:
    """Balanced accuracy and one fairness metric against the threshold.

    The dotted vertical line marks ``threshold``. Output is SVG with a fixed
    hash salt and no date, so identical inputs give identical files.
    """
    attr, label = FAIRNESS_SERIES[fairness]
    fig = Figure(figsize=(6.4, 4.0))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot()
    ax.plot(curve.thresholds, _series(curve.balanced_accuracy), label="Balanced accuracy")
    ax.plot(curve.thresholds, _series(getattr(curve, attr)), label=label)
    ax.axvline(threshold, linestyle=":", color="black", linewidth=1.2)
    if fairness == "aod":
        ax.axhline(0.0, color="grey", linewidth=0.6)
    ax.set_xlabel("Classification threshold")
    ax.set_xlim(0.0, 1.0)
    ax.legend(loc="best")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": "fairpsych", "svg.fonttype": "path"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path
