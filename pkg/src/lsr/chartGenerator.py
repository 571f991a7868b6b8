"""Charts for feature-selection diagnostics and complexity comparison.

Draws the sorted RFT loss curve of a trained branch with its selection
cut-off and elbow marked, and side-by-side FLOPs-per-pixel and model-size
bars for a set of compared methods.
"""

from pathlib import Path
from typing import Optional

import matplotlib.pyplot as plt
from matplotlib.ticker import MaxNLocator
import numpy as np
import pandas as pd

from lsr.config import settings
from lsr.rft import elbow_count


class ChartGenerator:
    """Generates publication-style charts from models and complexity tables.

    Attributes:
        verbose: Print what is being drawn.
    """

    def __init__(self, verbose: bool = False):
        self.verbose = verbose
        self._configure_matplotlib()

    def _configure_matplotlib(self) -> None:
        """Apply the shared figure style (resolution and fonts come from settings)."""
        plt.rcParams.update(
            {
                "figure.dpi": settings.chart_dpi,
                "savefig.dpi": settings.chart_dpi,
                "font.size": settings.chart_font_size,
                "axes.edgecolor": settings.edgecolor,
                "axes.labelcolor": settings.edgecolor,
                "xtick.color": settings.edgecolor,
                "ytick.color": settings.edgecolor,
                "legend.fontsize": settings.chart_font_size - 1,
            }
        )

    def rft_curve(
        self,
        losses: np.ndarray,
        output_path: str,
        selected: Optional[int] = None,
        title: str = "",
    ) -> int:
        """Plot a sorted loss curve.

        Args:
            losses: RFT losses sorted ascending.
            output_path: Where the figure is written.
            selected: Number of kept features, drawn as a vertical line.
            title: Optional axis title.

        Returns:
            The elbow feature count that was marked.
        """
        losses = np.asarray(losses, dtype=np.float64)
        elbow = elbow_count(losses)
        if self.verbose:
            print(f"Plotting RFT curve of {len(losses)} features (elbow at {elbow})")

        fig, ax = plt.subplots(figsize=(4.5, 3))
        ranks = np.arange(1, len(losses) + 1)
        ax.plot(ranks, losses, color=settings.curve_color, linewidth=1.2, label="RFT loss")
        if elbow:
            ax.scatter(
                [elbow],
                [losses[elbow - 1]],
                color=settings.elbow_color,
                zorder=3,
                s=18,
                label=f"Elbow ({elbow})",
            )
        if selected:
            ax.axvline(
                selected,
                color=settings.edgecolor,
                linestyle=":",
                linewidth=1.0,
                label=f"Selected ({selected})",
            )
        ax.set_xlabel("Feature rank")
        ax.set_ylabel("Loss")
        if title:
            ax.set_title(title)

        self._configure_axis(ax, rank_axis=True)
        self._finalize_figure(fig, output_path, ncol=3)
        return elbow

    def complexity_bars(self, comparison: pd.DataFrame, output_path: str) -> None:
        """Two panels: FLOPs per pixel and model size per method (log scale).

        Args:
            comparison: Frame with ``method``, ``F_p`` and ``M`` columns, as
                returned by ``compare_methods``.
            output_path: Where the figure is written.
        """
        if self.verbose:
            print(f"Plotting complexity of {len(comparison)} methods")
        fig, ax = plt.subplots(1, 2, figsize=(7, 3))
        x = np.arange(len(comparison))
        labels = list(comparison["method"])
        panels = ((ax[0], "F_p", "FLOPs per pixel"), (ax[1], "M", "Parameters"))
        for panel, column, ylabel in panels:
            bars = panel.bar(
                x,
                comparison[column],
                settings.bar_width * 2,
                facecolor=settings.facecolors[0 if column == "F_p" else 2],
                edgecolor=settings.edgecolor,
                hatch=settings.hatch_patterns[0 if column == "F_p" else 1],
                label=ylabel,
            )
            panel.set_yscale("log")
            panel.set_ylabel(ylabel)
            panel.set_xticks(x)
            panel.set_xticklabels(labels, rotation=20)
            panel.bar_label(bars, padding=2, fontsize=6, fmt="%.0f")
            self._configure_axis(panel)
        self._finalize_figure(fig, output_path, ncol=2)

    def _configure_axis(self, ax, rank_axis: bool = False) -> None:
        """Dashed value grid, with minor lines on log-scaled panels.

        Args:
            ax: Axis to style.
            rank_axis: The x axis is a feature rank, so it gets a grid and
                integer ticks; categorical method axes get neither.
        """
        log_scale = ax.get_yscale() == "log"
        ax.grid(True, axis="y", which="major", linestyle="--", linewidth=0.5, color="0.75")
        if log_scale:
            ax.grid(True, axis="y", which="minor", linestyle=":", linewidth=0.4, color="0.88")
        if rank_axis:
            ax.grid(True, axis="x", which="major", linestyle="--", linewidth=0.5, color="0.85")
            ax.xaxis.set_major_locator(MaxNLocator(integer=True))
            ax.set_xlim(left=0)
        ax.set_axisbelow(True)
        for side in ("top", "right"):
            ax.spines[side].set_visible(False)

    def _finalize_figure(self, fig, output_path: str, ncol: int = 3) -> Path:
        """Put one legend above all panels, save and close the figure.

        The output directory is created when missing; the format follows the
        file suffix (PNG, PDF, SVG).
        """
        handles, labels = [], []
        for ax in fig.axes:
            for handle, label in zip(*ax.get_legend_handles_labels()):
                if label not in labels:
                    handles.append(handle)
                    labels.append(label)
        if handles:
            fig.legend(
                handles,
                labels,
                frameon=False,
                ncol=min(ncol, len(handles)),
                bbox_to_anchor=(0.5, 1.02),
                loc="upper center",
            )
            fig.tight_layout(rect=[0, 0, 1, 0.9])
        else:
            fig.tight_layout()
        path = Path(output_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, bbox_inches="tight")
        plt.close(fig)
        if self.verbose:
            print(f"Wrote {path}")
        return path
