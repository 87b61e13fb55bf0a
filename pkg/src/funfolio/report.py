"""Figure rendering for study tables and backtest reports.

Figures are written next to the delimited outputs so a report directory
is self-contained: the CSVs carry the numbers, the PNGs the pictures.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_sim_figure", "save_backtest_figure"]


def save_sim_figure(rows: list, path) -> None:
    """Bar chart of the mean performance deltas per grid point.

    One pair of bars per (objective, lb) row: plug-in minus baseline and
    functional minus baseline, with standard deviations as error bars.
    """
    labels = [f"{r['objective']}\nlb={r['lb']}" for r in rows]
    d_pi = [r["delta_pi_mean"] if r["delta_pi_mean"] is not None else np.nan
            for r in rows]
    d_fun = [r["delta_fun_mean"] if r["delta_fun_mean"] is not None else np.nan
             for r in rows]
    s_pi = [r["delta_pi_sd"] or 0.0 for r in rows]
    s_fun = [r["delta_fun_sd"] or 0.0 for r in rows]

    x = np.arange(len(rows))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(6.0, 1.8 * len(rows)), 4.0))
    ax.bar(x - width / 2, d_pi, width, yerr=s_pi, capsize=3,
           label="plug-in - baseline", color="#888888")
    ax.bar(x + width / 2, d_fun, width, yerr=s_fun, capsize=3,
           label="functional - baseline", color="#2265a3")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("mean realized objective delta")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_backtest_figure(report, path) -> None:
    """Cumulative excess return curves for the two strategies."""
    fig, ax = plt.subplots(figsize=(8.0, 4.0))
    x = np.arange(len(report.months))
    ax.plot(x, report.cum_pi, label="plug-in", color="#888888")
    ax.plot(x, report.cum_fun, label="functional", color="#2265a3")
    ticks = np.linspace(0, max(len(x) - 1, 1), min(8, len(x)), dtype=int)
    ax.set_xticks(ticks)
    ax.set_xticklabels([report.months[i] for i in ticks], rotation=30, fontsize=8)
    ax.set_ylabel("cumulative excess return")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
