"""Matplotlib figure rendering for optimization and comparison artifacts.

Figures are written next to the delimited output files; everything here is
presentation only, the CSV/JSON files carry the data.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from . import cycles


def plot_front(front_rows, ref_rows, path):
    """Scatter of (time per iteration, iterations); front members joined by a
    line, references drawn as crosses."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if front_rows:
        xs = [r["time_per_iter"] for r in front_rows]
        ys = [r["iterations"] for r in front_rows]
        ax.plot(xs, ys, "o-", color="tab:red", label="Pareto front")
        for r in front_rows:
            ax.annotate(r.get("name", ""), (r["time_per_iter"], r["iterations"]),
                        fontsize=7, xytext=(3, 3), textcoords="offset points")
    for r in ref_rows or []:
        ax.plot(r["time_per_iter"], r["iterations"], "x", markersize=9,
                label=r["name"])
    ax.set_xlabel("cost per iteration")
    ax.set_ylabel("iterations")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_history(history, path):
    """Best aggregate cost and feasible count per generation."""
    gens = [h["generation"] for h in history]
    best = [h["best_aggregate"] for h in history]
    nfeas = [h["n_feasible"] for h in history]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    ax1.plot(gens, best, "o-", color="tab:blue")
    ax1.set_ylabel("best aggregate cost")
    ax2.plot(gens, nfeas, "s-", color="tab:green")
    ax2.set_ylabel("feasible individuals")
    ax2.set_xlabel("generation")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_cycle(ir, path):
    """Level-vs-step trace of one flexible cycle."""
    rows = cycles.render_trace(ir)
    fig, ax = plt.subplots(figsize=(max(4, len(rows) * 0.28), 3.2))
    xs = [r[0] for r in rows]
    ys = [-r[1] for r in rows]
    ax.plot(xs, ys, "-", color="0.6", lw=0.8)
    markers = {"smooth": ("o", "tab:blue"), "restrict": ("v", "0.4"),
               "correct": ("^", "0.4"), "tail": ("s", "tab:orange"),
               "coarse": ("D", "tab:red")}
    for kind, (m, c) in markers.items():
        sel = [(x, y) for (x, y, k) in zip(xs, ys, (r[2] for r in rows)) if k == kind]
        if sel:
            ax.plot([s[0] for s in sel], [s[1] for s in sel], m, color=c,
                    label=kind, linestyle="none")
    ax.set_xlabel("step")
    ax.set_ylabel("level (down = coarser)")
    ax.set_yticks(sorted({-r[1] for r in rows}))
    ax.set_yticklabels([str(-v) for v in sorted({-r[1] for r in rows})])
    ax.legend(fontsize=7, ncol=3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_compare(rows, path):
    """Bar chart of aggregate cost per solver."""
    fig, ax = plt.subplots(figsize=(6, 4))
    names = [r["name"] for r in rows]
    aggs = [r["aggregate"] for r in rows]
    colors = ["tab:red" if n.startswith("GP-") else "0.5" for n in names]
    ax.bar(range(len(rows)), aggs, color=colors)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("aggregate cost (per-iteration cost x iterations)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
