"""SVG density figures for mixed finite-sample and limiting distributions."""
from __future__ import annotations

import math
from typing import Optional

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402

from .montecarlo import MixedDistributionSummary  # noqa: E402

RC = {
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.linewidth": 0.6,
    "lines.linewidth": 1.2,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "legend.frameon": False,
    "legend.fontsize": 7,
    "svg.hashsalt": "alcoint",
    "svg.fonttype": "path",
}

COLORS = {"al": "#1f4e9c", "ols": "#888888", "limit": "#c0392b"}


def _draw_atom(ax, summary: MixedDistributionSummary, clip: float, color: str, label=None):
    if summary.atom_prob <= 0 or not math.isfinite(summary.atom_location):
        return
    loc = summary.atom_location
    shown = min(max(loc, -clip), clip)
    ax.vlines(shown, 0, summary.atom_prob, colors=color, linewidth=2.0, label=label)
    if shown != loc:
        # atom outside the plotted window: mark it at the edge with an arrow
        direction = -1 if loc < 0 else 1
        ax.annotate("", xy=(shown + 0.6 * direction * clip / 4, summary.atom_prob),
                    xytext=(shown, summary.atom_prob),
                    arrowprops={"arrowstyle": "->", "color": color, "lw": 1.0})
        ax.text(shown, summary.atom_prob, f" {loc:.3g}", color=color, fontsize=6,
                ha="left" if direction < 0 else "right", va="bottom")


def plot_cell(out_path, al: MixedDistributionSummary, ols: Optional[MixedDistributionSummary],
              limit: Optional[MixedDistributionSummary], title: str = "", clip: float = 4.0,
              width: float = 3.2, height: float = 2.4) -> None:
    """Render one cell: atom spikes (height = probability) plus KDE curves."""
    with matplotlib.rc_context(RC):
        fig = Figure(figsize=(width, height))
        ax = fig.add_subplot(1, 1, 1)
        series = (("al", al, "adaptive LASSO"), ("ols", ols, "OLS"), ("limit", limit, "limit"))
        for key, summ, label in series:
            if summ is None:
                continue
            if summ.kde is not None:
                ax.plot(summ.kde.x, summ.kde.density, color=COLORS[key], label=label,
                        linestyle="--" if key == "limit" else "-")
                label = None
            _draw_atom(ax, summ, clip, COLORS[key], label)
        ax.set_xlim(-clip, clip)
        ax.set_ylim(bottom=0)
        if title:
            ax.set_title(title, fontsize=8)
        ax.legend(loc="upper right")
        fig.tight_layout()
        fig.savefig(out_path, format="svg", metadata={"Date": None})
