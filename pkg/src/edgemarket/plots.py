"""Figure rendering for experiment result tables.

Every experiment gets one PNG next to its CSV: mean curves per metric
with a one-standard-deviation band over seeds.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .experiments import ResultTable  # noqa: E402

_AXIS_LABELS = {
    "price": "edge price ($/cycle unit)",
    "Q": "monthly data cap (GB)",
    "pi": "overage fee ($/GB)",
    "Pi": "subscription fee ($/month)",
    "d_bar": "max data-usage level (GB/slot)",
    "r_bar": "max raw-data amount (GB/slot)",
    "c_bar": "max computing amount (cycle units/slot)",
}

# metric groups drawn into one panel: (title, y-label, [(metric, label)])
_PANELS = {
    "strategies": ("monthly payoff by strategy", "payoff ($)",
                   [("payoff_opt", "hindsight"), ("payoff_alg1", "adaptive"),
                    ("payoff_greedy", "myopic")]),
    "revenue": ("edge revenue", "revenue ($)",
                [("revenue_opt", "best fixed price"),
                 ("revenue_alg2", "dynamic policy")]),
    "ratio": ("fraction of best fixed-price revenue", "ratio",
              [("ratio", "policy / optimum")]),
    "mu": ("user payoffs", "total payoff ($)",
           [("mu_payoff_none", "no edge"), ("mu_payoff_edge", "edge")]),
    "cp": ("content-provider revenue", "revenue ($)",
           [("cp_revenue_none", "no edge"), ("cp_revenue_edge", "edge")]),
    "isp": ("carrier revenue", "revenue ($)",
            [("isp_revenue_none", "no edge"), ("isp_revenue_edge", "edge")]),
    "welfare": ("social welfare", "welfare ($)",
                [("welfare_none", "no edge"),
                 ("welfare_edge", "edge (providers only)"),
                 ("welfare_edge_with_esp", "edge incl. edge provider")]),
}

_LAYOUT = {
    "fig3a": ["strategies"], "fig3b": ["strategies"], "fig3c": ["strategies"],
    "custom": ["strategies"],
    "fig4": ["revenue", "ratio"], "fig5": ["revenue", "ratio"],
    "fig6": ["mu", "cp", "isp", "welfare"],
}


def render_figure(experiment: str, table: ResultTable, path: Path) -> Path:
    panels = _LAYOUT[experiment]
    ncols = min(len(panels), 2)
    nrows = -(-len(panels) // ncols)
    fig, axes = plt.subplots(nrows, ncols, squeeze=False,
                             figsize=(5.2 * ncols, 3.6 * nrows))
    summary = table.summary()
    values = [v for v, _ in summary]
    for ax, panel in zip(axes.flat, panels):
        title, ylabel, series = _PANELS[panel]
        for metric, label in series:
            if metric not in table.metrics:
                continue
            means = [stats[metric][0] for _, stats in summary]
            stds = [stats[metric][1] for _, stats in summary]
            line, = ax.plot(values, means, marker="o", label=label)
            lo = [m - s for m, s in zip(means, stds)]
            hi = [m + s for m, s in zip(means, stds)]
            ax.fill_between(values, lo, hi, alpha=0.15,
                            color=line.get_color())
        ax.set_title(title)
        ax.set_xlabel(_AXIS_LABELS.get(table.sweep_name, table.sweep_name))
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        ax.legend()
    for ax in axes.flat[len(panels):]:
        ax.set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
