"""The five figure kinds.

All renderers consume the documented CSV schema only and never recompute
physics: annotated minima are read off the CSV rows (argmin of the
relative total bound); the power-law lines on the scaling plots are
display-only least-squares fits of the plotted points.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .data import SchemaError, Table, load_table

FIGURE_KINDS = ("fig1-left", "fig1-center", "fig1-right", "fig2", "fig3")

FIGSIZE = (4.8, 3.6)
DPI = 150


@dataclass
class RenderResult:
    path: str
    kind: str
    annotations: dict = field(default_factory=dict)


def _finite(x, *others):
    mask = np.isfinite(x)
    for o in others:
        mask &= np.isfinite(o)
    return mask


def _argmin_row(table: Table) -> int:
    tot = table.col("eps_tot_rel")
    masked = np.where(np.isfinite(tot), tot, np.inf)
    if not np.isfinite(masked).any():
        raise SchemaError(f"{table.path} carries no finite total bounds")
    return int(np.argmin(masked))


def _fit_line(ax, x, y, **kw):
    slope, intercept = np.polyfit(np.log10(x), np.log10(y), 1)
    xs = np.array([x.min(), x.max()])
    ax.plot(xs, 10 ** (intercept + slope * np.log10(xs)), **kw)
    return slope


def _save(fig, path: str) -> None:
    fig.savefig(path, dpi=DPI, metadata={"Software": "spincorr-figures"})
    plt.close(fig)


def render_fig1_left(tables: list[Table], out: str) -> RenderResult:
    """Systematic error and statistical bounds against the coupling, one
    statistical curve per input file (labelled by its sample size)."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    first = tables[0]
    lam = first.col("lambda")
    sys_rel = first.col("eps_sys_rel")
    m = _finite(lam, sys_rel)
    ax.plot(lam[m], sys_rel[m], color="tab:red", label="systematic")
    styles = ["-", "--", ":", "-."]
    for k, table in enumerate(tables):
        lam = table.col("lambda")
        stat = table.col("eps_stat_rel")
        m = _finite(lam, stat)
        n = int(table.col("n")[0])
        ax.plot(lam[m], stat[m], color="black", ls=styles[k % len(styles)],
                label=f"statistical, n = {n:g}")
    ax.set_yscale("log")
    ax.set_xlabel("coupling strength")
    ax.set_ylabel("relative error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, out)
    return RenderResult(out, "fig1-left",
                        {"curves": len(tables)})


def render_fig1_center(tables: list[Table], out: str) -> RenderResult:
    """Total bound with sampled deviations overlaid; the grid minimum is
    annotated with the values of its CSV row."""
    table = tables[0]
    lam = table.col("lambda")
    tot = table.col("eps_tot_rel")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    m = _finite(lam, tot)
    ax.plot(lam[m], tot[m], color="black", label="total bound")
    measured = table.col("measured_rel")
    mm = _finite(lam, measured)
    if mm.any():
        ax.plot(lam[mm], measured[mm], ".", color="tab:red", ms=4,
                label="measured")
    k = _argmin_row(table)
    lam_star, minimum = float(lam[k]), float(tot[k])
    ax.plot([lam_star], [minimum], "v", color="tab:blue", ms=8)
    ax.annotate(f"min {100 * minimum:.0f}% at $\\lambda^*$ = {lam_star:.2f}",
                xy=(lam_star, minimum), xytext=(0.35, 0.9),
                textcoords="axes fraction", fontsize=9,
                arrowprops=dict(arrowstyle="->", lw=0.8))
    ax.set_xlabel("coupling strength")
    ax.set_ylabel("relative error")
    ax.legend(fontsize=8, loc="lower right")
    fig.tight_layout()
    _save(fig, out)
    return RenderResult(out, "fig1-center",
                        {"lambda_star": lam_star, "min_eps_tot_rel": minimum})


def render_fig1_right(tables: list[Table], out: str) -> RenderResult:
    """Minimum total bound and its coupling position against the sample
    size, log-log, with display-only power-law lines."""
    table = tables[0]
    rows = np.arange(len(table))
    if table.has_lambda2:
        rows = rows[~np.isfinite(table.col("lambda2"))]
        if rows.size == 0:
            raise SchemaError(f"{table.path} has no single-coupling rows")
    n = table.col("n")[rows]
    minima = table.col("eps_tot_rel")[rows]
    stars = table.col("lambda")[rows]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(n, minima, "o", color="black", label="minimum total bound")
    slope_min = _fit_line(ax, n, minima, color="black", lw=0.8)
    ax.plot(n, stars, "s", color="tab:blue", label="optimal coupling")
    slope_star = _fit_line(ax, n, stars, color="tab:blue", lw=0.8)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sample size")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, out)
    return RenderResult(out, "fig1-right",
                        {"min_exponent": float(slope_min),
                         "lambda_star_exponent": float(slope_star)})


def render_fig2(tables: list[Table], out: str) -> RenderResult:
    """Heatmap of the total bound over the coupling plane with the grid
    minimum marked and annotated from its CSV row."""
    table = tables[0]
    if not table.has_lambda2:
        raise SchemaError(f"{table.path} has no lambda2 column; a surface "
                          "sweep is required")
    lam1 = np.unique(table.col("lambda"))
    lam2 = np.unique(table.col("lambda2"))
    tot = np.full((len(lam1), len(lam2)), np.nan)
    i = np.searchsorted(lam1, table.col("lambda"))
    j = np.searchsorted(lam2, table.col("lambda2"))
    tot[i, j] = table.col("eps_tot_rel")
    k = _argmin_row(table)
    lam_star = (float(table.col("lambda")[k]), float(table.col("lambda2")[k]))
    minimum = float(table.col("eps_tot_rel")[k])
    fig, ax = plt.subplots(figsize=FIGSIZE)
    capped = np.where(np.isfinite(tot), np.minimum(tot, 1.0), np.nan)
    mesh = ax.pcolormesh(lam2, lam1, capped, shading="nearest",
                         cmap="viridis_r")
    fig.colorbar(mesh, ax=ax, label="relative total bound (capped at 1)")
    ax.plot([lam_star[1]], [lam_star[0]], "w+", ms=12, mew=2)
    ax.annotate(
        f"min {100 * minimum:.0f}% at ({lam_star[0]:.2f}, {lam_star[1]:.2f})",
        xy=(lam_star[1], lam_star[0]), xytext=(0.98, 0.02),
        textcoords="axes fraction", ha="right", color="white", fontsize=9)
    ax.set_xlabel("second coupling strength")
    ax.set_ylabel("first coupling strength")
    fig.tight_layout()
    _save(fig, out)
    return RenderResult(out, "fig2", {"lambda_star": lam_star,
                                      "min_eps_tot_rel": minimum})


def render_fig3(tables: list[Table], out: str) -> RenderResult:
    """Minimum total bound against the sample size for both protocols,
    log-log with display-only power-law lines."""
    table = tables[0]
    if not table.has_lambda2:
        raise SchemaError(f"{table.path} has no lambda2 column; a protocol "
                          "comparison is required")
    lam2 = table.col("lambda2")
    single = ~np.isfinite(lam2)
    consecutive = np.isfinite(lam2)
    if not single.any() or not consecutive.any():
        raise SchemaError(f"{table.path} does not carry both protocols")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    slopes = {}
    for mask, color, label in ((single, "black", "single"),
                               (consecutive, "tab:red", "consecutive")):
        n = table.col("n")[mask]
        minima = table.col("eps_tot_rel")[mask]
        ax.plot(n, minima, "o", color=color, ms=4, label=label)
        slopes[label] = float(_fit_line(ax, n, minima, color=color, lw=0.8))
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sample size")
    ax.set_ylabel("minimum relative total bound")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, out)
    return RenderResult(out, "fig3", {"exponents": slopes})


_RENDERERS = {
    "fig1-left": render_fig1_left,
    "fig1-center": render_fig1_center,
    "fig1-right": render_fig1_right,
    "fig2": render_fig2,
    "fig3": render_fig3,
}


def render(kind: str, csv_paths: list[str], out: str) -> RenderResult:
    """Render one figure kind from one or more CSV inputs."""
    if kind not in _RENDERERS:
        raise SchemaError(f"unknown figure kind {kind!r}; "
                          f"choose from {FIGURE_KINDS}")
    tables = [load_table(p) for p in csv_paths]
    return _RENDERERS[kind](tables, out)
