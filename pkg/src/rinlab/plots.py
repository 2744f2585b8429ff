"""Render experiment tables to matplotlib figures on disk.

Each experiment gets one PNG next to its CSV.  The figures are working
plots for eyeballing a run, not polished output: the CSV stays the
machine-readable contract.
"""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiments import ExperimentResult

_FIGSIZE = (7.0, 4.3)


def render(result: ExperimentResult, path: str) -> None:
    """Draw the figure appropriate for the experiment and save it."""
    renderer = _RENDERERS.get(result.experiment)
    if renderer is None:
        raise ValueError(f"no renderer for experiment {result.experiment!r}")
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    try:
        renderer(result, ax)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
    finally:
        plt.close(fig)


def _column(result: ExperimentResult, name: str) -> list:
    i = result.columns.index(name)
    return [row[i] for row in result.rows]


def _render_histogram(result: ExperimentResult, ax) -> None:
    labels = sorted(set(_column(result, "run_label")))
    if "y_sample" in result.columns:
        ys = np.asarray(_column(result, "y_sample"))
        run = np.asarray(_column(result, "run_label"))
        lo, hi = ys.min(), ys.max()
        for label in labels:
            ax.hist(
                ys[run == label],
                bins=200,
                range=(lo, hi),
                histtype="step",
                density=True,
                label=label,
            )
    else:
        run = np.asarray(_column(result, "run_label"))
        centers = np.asarray(_column(result, "bin_center"))
        counts = np.asarray(_column(result, "count"), dtype=float)
        for label in labels:
            sel = run == label
            grid = defaultdict(float)
            for c, n in zip(centers[sel], counts[sel]):
                grid[c] += n
            xs = np.asarray(sorted(grid))
            ax.step(xs, [grid[x] for x in xs], where="mid", label=label)
    ax.set_xlabel("received sample (W)")
    ax.set_ylabel("density" if "y_sample" in result.columns else "count")
    ax.legend()


def _render_variance(result: ExperimentResult, ax) -> None:
    ell = np.asarray(_column(result, "ell"))
    level = np.asarray(_column(result, "level_index"))
    t2 = np.asarray(_column(result, "sigma2_theorem2"))
    legacy = np.asarray(_column(result, "sigma2_legacy"))
    genie = np.asarray(_column(result, "sigma2_genie"))
    for li in sorted(set(level.tolist())):
        sel = level == li
        order = np.argsort(ell[sel])
        (line,) = ax.plot(ell[sel][order], t2[sel][order], label=f"level {li}")
        color = line.get_color()
        ax.axhline(genie[sel][0], color=color, linestyle=":", alpha=0.7)
        ax.axhline(legacy[sel][0], color=color, linestyle="--", alpha=0.35)
    ax.set_xlabel("neighbor memory (symbols)")
    ax.set_ylabel("conditional variance (W$^2$)")
    ax.set_yscale("log")
    ax.legend(title="solid: model, dotted: simulated, dashed: memoryless", fontsize=8)


def _render_gmi(result: ExperimentResult, ax, x_name: str) -> None:
    m = np.asarray(_column(result, "M"))
    oma = np.asarray(_column(result, "oma_dbm"))
    gmi = np.asarray(_column(result, "gmi_bits"))
    kind = np.asarray(_column(result, "metric_variance_kind"))
    x = oma if x_name == "oma_dbm" else m
    group = m if x_name == "oma_dbm" else np.zeros_like(m)
    for g in sorted(set(group.tolist())):
        for k, style in (("theorem2", "-o"), ("legacy", "--*")):
            sel = (group == g) & (kind == k)
            if not sel.any():
                continue
            order = np.argsort(x[sel])
            label = k if x_name != "oma_dbm" else f"M={g} {k}"
            ax.plot(x[sel][order], gmi[sel][order], style, markersize=4, label=label)
    ax.set_xlabel("OMA (dBm)" if x_name == "oma_dbm" else "constellation order M")
    if x_name != "oma_dbm":
        ax.set_xscale("log", base=2)
    ax.set_ylabel("achievable rate (bits/symbol)")
    ax.legend(fontsize=8)


def _render_beta(result: ExperimentResult, ax) -> None:
    oma = np.asarray(_column(result, "oma_dbm"))
    flag = np.asarray(_column(result, "rin_flag"))
    idx = np.asarray(_column(result, "i"))
    beta = np.asarray(_column(result, "beta_i"))
    for o in sorted(set(oma.tolist())):
        for f, marker in (("off", "o"), ("on", "s")):
            sel = (oma == o) & (flag == f)
            if not sel.any():
                continue
            order = np.argsort(idx[sel])
            ax.plot(
                idx[sel][order],
                beta[sel][order],
                marker,
                markersize=4,
                linestyle="-",
                linewidth=0.8,
                alpha=0.8,
                label=f"{o:g} dBm, intensity noise {f}",
            )
    ax.set_xlabel("level index")
    ax.set_ylabel("per-level rate contribution (bits)")
    ax.legend(fontsize=8)


_RENDERERS = {
    "histogram": _render_histogram,
    "variance-vs-ell": _render_variance,
    "gmi-vs-oma": lambda r, ax: _render_gmi(r, ax, "oma_dbm"),
    "gmi-vs-m": lambda r, ax: _render_gmi(r, ax, "M"),
    "beta": _render_beta,
}
