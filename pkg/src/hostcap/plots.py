"""Optional SVG emitters for the main result artifacts.

Matplotlib is an optional dependency (install extra ``plots``); everything
renders headless to self-contained SVG files.
"""

from __future__ import annotations

import numpy as np


def _plt():
    try:
        import matplotlib
        matplotlib.use("Agg", force=False)
        import matplotlib.pyplot as plt
        return plt
    except ImportError:
        raise RuntimeError(
            "plot output needs matplotlib (pip install hostcap[plots])"
        ) from None


def save_raster_svg(path, raster) -> None:
    """Admissibility heatmap of a 2-D injection sweep."""
    plt = _plt()
    order = {"admissible": 0, "violation": 1, "nonconverged": 2}
    grid = np.vectorize(order.get)(raster.classes)
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    extent = [raster.pg_b_mw[0], raster.pg_b_mw[-1], raster.pg_a_mw[0], raster.pg_a_mw[-1]]
    im = ax.imshow(grid, origin="lower", extent=extent, aspect="auto",
                   cmap=plt.matplotlib.colors.ListedColormap(["#2c6fbb", "#c44e52", "#999999"]),
                   vmin=0, vmax=2)
    ax.set_xlabel("injection at second node (MW)")
    ax.set_ylabel("injection at first node (MW)")
    ax.set_title("admissible set (blue), violations (red), non-converged (grey)")
    fig.colorbar(im, ax=ax, ticks=[0, 1, 2])
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def save_mae_svg(path, sweep) -> None:
    """Envelope-tightness comparison over an injection sweep."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.6, 3.8))
    ax.semilogy(sweep.pg_mw, sweep.mae_conservative, label="conservative bound", color="#2c6fbb")
    ax.semilogy(sweep.pg_mw, np.maximum(sweep.mae_soc, 1e-12), label="cone bound", color="#c44e52")
    ax.set_xlabel("injection (MW)")
    ax.set_ylabel("mean |l - l+| over branches (pu)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def save_dhc_svg(path, series) -> None:
    """Per-node upper limits over time."""
    plt = _plt()
    steps = series.computed()
    hi = np.array([s.rect.hi_mw for s in steps])
    ts = [s.timestamp for s in steps]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for j, node in enumerate(series.node_ids):
        ax.plot(ts, hi[:, j], lw=0.9, label=f"node {node}")
    ax.plot(ts, hi.sum(axis=1), lw=2.0, color="black", label="total")
    ax.set_ylabel("hosting capacity (MW)")
    ax.set_title(f"{series.scenario} / {series.variant}")
    if len(series.node_ids) <= 6:
        ax.legend(fontsize=7)
    fig.autofmt_xdate()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def save_economics_svg(path, report) -> None:
    """Added/curtailed energy and net profit over capacity increase."""
    plt = _plt()
    dc_pct = 100.0 * report.dc_grid
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.4))
    axes[0].plot(dc_pct, report.curves.add_pct(), color="#2c6fbb")
    axes[0].set_ylabel("added energy (% of base)")
    axes[1].plot(dc_pct, report.curves.curt_pct(), color="#c44e52")
    axes[1].set_ylabel("curtailed energy (% of base)")
    axes[2].plot(dc_pct, report.net_profit / 1e3, color="#2ca02c")
    axes[2].axvline(100 * report.argmax_dc, ls="--", color="grey", lw=0.8)
    axes[2].set_ylabel("net profit ($k)")
    for ax in axes:
        ax.set_xlabel("capacity increase (%)")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
