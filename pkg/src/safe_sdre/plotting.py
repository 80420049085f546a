"""Figure rendering for simulation runs.

Produces a three-panel summary figure per run: the output-plane paths
against the desired trajectory and the unsafe geometry, the safety function
values over time, and the tracking-error norm.  Files only (Agg backend);
the CSV remains the primary data product.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_run"]

_RC = {
    "figure.figsize": (7.0, 8.5),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.4,
    "lines.linewidth": 1.4,
    "legend.fontsize": 8,
    "savefig.dpi": 150,
}


def _draw_geometry(ax, geometry):
    for shape in geometry:
        kind = shape[0]
        if kind == "circle":
            _, center, radius = shape
            ax.add_patch(plt.Circle(center, radius, color="0.6", zorder=0))
        elif kind == "box_complement":
            half = shape[1]
            ax.add_patch(plt.Rectangle((-half, -half), 2 * half, 2 * half,
                                       facecolor="#caf0ca", edgecolor="none", zorder=-1))


def _output_curves(log, scenario):
    """(label, path, desired) per output-plane pair; scalar outputs fall back
    to a time plot handled by the caller."""
    H = np.atleast_2d(scenario.plant.H_of(log.states[0]))
    l = H.shape[0]
    ys = np.array([scenario.plant.output(x) for x in log.states])
    yds = np.array([scenario.ref.output(v) for v in log.refs])
    pairs = []
    for j in range(0, l - 1, 2):
        pairs.append((f"y{j + 1}-y{j + 2}", ys[:, j:j + 2], yds[:, j:j + 2]))
    return pairs


def render_run(log, scenario, out_path):
    """Render the run summary figure to ``out_path`` (format by extension)."""
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(3, 1)
        ax = axes[0]
        _draw_geometry(ax, scenario.geometry)
        for label, y, yd in _output_curves(log, scenario):
            (line,) = ax.plot(y[:, 0], y[:, 1], label=label)
            ax.plot(yd[:, 0], yd[:, 1], "--", color=line.get_color(), alpha=0.6,
                    label=f"{label} desired")
            ax.plot(y[0, 0], y[0, 1], "s", color=line.get_color(), ms=5)
        ax.set_xlabel("first output coordinate")
        ax.set_ylabel("second output coordinate")
        ax.set_title(f"{scenario.name}: output plane (status: {log.status})")
        ax.legend(loc="best")
        ax.set_aspect("equal", adjustable="datalim")

        ax = axes[1]
        for j, name in enumerate(log.constraint_names):
            ax.plot(log.times, log.constraint_values[:, j], label=f"s_{name}")
        ax.axhline(0.0, color="k", lw=0.8)
        ax.set_xlabel("time [s]")
        ax.set_ylabel("safety functions")
        ax.legend(loc="best")

        ax = axes[2]
        ax.plot(log.times, log.error_norms, color="tab:red")
        ax.axhline(scenario.settle_threshold, color="k", lw=0.8, ls=":")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("tracking error norm")

        fig.tight_layout()
        fig.savefig(out_path)
        plt.close(fig)
    return out_path
