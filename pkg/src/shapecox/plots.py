"""Matplotlib figures rendered next to the delimited outputs."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_component_figure(curves, path, title=None):
    """Render centered component curves, one panel per covariate.

    ``curves`` is a sequence of dicts with keys ``covariate``, ``x``,
    ``value`` and ``is_knot`` (the report's component-curve table format).
    """
    n = len(curves)
    if n == 0:
        raise ValueError("no component curves to plot")
    ncols = min(3, n)
    nrows = math.ceil(n / ncols)
    fig, axes = plt.subplots(nrows, ncols, figsize=(4.2 * ncols, 3.2 * nrows),
                             squeeze=False)
    for ax in axes.flat[n:]:
        ax.set_axis_off()
    for ax, curve in zip(axes.flat, curves):
        x = np.asarray(curve["x"], dtype=float)
        y = np.asarray(curve["value"], dtype=float)
        knots = np.asarray(curve["is_knot"], dtype=bool)
        ax.plot(x, y, color="tab:green", lw=1.5)
        if knots.any():
            ax.plot(x[knots], y[knots], "r*", ms=5, label="knots")
            ax.legend(loc="best", fontsize=8)
        ax.set_xlabel(curve["covariate"])
        ax.set_ylabel("centered effect")
        ax.grid(alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_curve_figure(x, value, is_knot, covariate, path):
    """Render one exported component curve to a file."""
    save_component_figure(
        [{"covariate": covariate, "x": x, "value": value, "is_knot": is_knot}],
        path,
    )
