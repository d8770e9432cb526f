"""Figure rendering for the report-style CLI paths.

Only the CLI imports this module, so library use never drags in matplotlib.
Every function writes one PNG next to the delimited output and returns the
path it wrote.
"""
from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .analytics import (
    BenchPoolingRow,
    BenchRoutingRow,
    CATEGORIES,
    FairnessCell,
    MeanStd,
    SweepResult,
)

PathLike = Union[str, Path]


def _finish(fig, path: PathLike) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_bench_pooling(rows: Sequence[BenchPoolingRow], path: PathLike) -> Path:
    by_n: dict[int, list[BenchPoolingRow]] = defaultdict(list)
    for row in rows:
        by_n[row.n_demands].append(row)
    ns = sorted(by_n)
    seconds = [MeanStd.of([r.seconds for r in by_n[n]]) for n in ns]
    wt_reg = [MeanStd.of([r.metrics.wt_regular.mean for r in by_n[n]
                          if not math.isnan(r.metrics.wt_regular.mean)]) for n in ns]
    wt_prem = [MeanStd.of([r.metrics.wt_premium.mean for r in by_n[n]
                           if not math.isnan(r.metrics.wt_premium.mean)]) for n in ns]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.errorbar(ns, [s.mean for s in seconds], yerr=[s.std for s in seconds],
                 marker="o", capsize=3)
    ax1.set_xlabel("demands")
    ax1.set_ylabel("solve seconds")
    ax1.set_title("Beam search runtime")
    ax2.errorbar(ns, [w.mean for w in wt_reg], yerr=[w.std for w in wt_reg],
                 marker="o", capsize=3, label="regular")
    ax2.errorbar(ns, [w.mean for w in wt_prem], yerr=[w.std for w in wt_prem],
                 marker="s", capsize=3, label="premium")
    ax2.set_xlabel("demands")
    ax2.set_ylabel("mean expected wait (min)")
    ax2.set_title("Waiting time by class")
    ax2.legend()
    fig.tight_layout()
    return _finish(fig, path)


def plot_bench_routing(rows: Sequence[BenchRoutingRow], path: PathLike) -> Path:
    by_cell: dict[tuple, list[BenchRoutingRow]] = defaultdict(list)
    for row in rows:
        by_cell[(row.n_aircraft, row.n_vertiports, row.scenario)].append(row)
    cells = sorted(by_cell)
    labels = [f"({a},{v}){s[0]}" for a, v, s in cells]
    service = [MeanStd.of([r.metrics.pct_service for r in by_cell[c]]) for c in cells]
    fast = [MeanStd.of([r.metrics.pct_fast for r in by_cell[c]]) for c in cells]
    cps = [
        MeanStd.of([r.metrics.cps for r in by_cell[c] if r.metrics.cps is not None])
        for c in cells
    ]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    x = range(len(cells))
    ax1.bar([i - 0.2 for i in x], [s.mean for s in service], width=0.4,
            yerr=[s.std for s in service], capsize=3, label="% service")
    ax1.bar([i + 0.2 for i in x], [f.mean for f in fast], width=0.4,
            yerr=[f.std for f in fast], capsize=3, label="% fast charges")
    ax1.set_xticks(list(x), labels)
    ax1.set_ylabel("%")
    ax1.set_title("Service and fast-charge rates")
    ax1.legend()
    ax2.bar(list(x), [c.mean for c in cps], yerr=[c.std for c in cps], capsize=3)
    ax2.set_xticks(list(x), labels)
    ax2.set_ylabel("cost per served request")
    ax2.set_title("CPS")
    fig.tight_layout()
    return _finish(fig, path)


def plot_fairness(cells: Sequence[FairnessCell], path: PathLike) -> Path:
    shares = sorted({c.premium_share for c in cells})
    fig, axes = plt.subplots(len(shares), 2, figsize=(11, 3.5 * len(shares)),
                             squeeze=False)
    for row, share in enumerate(shares):
        row_cells = sorted(
            (c for c in cells if c.premium_share == share),
            key=lambda c: c.alpha_regular,
        )
        alphas = [c.alpha_regular for c in row_cells]
        ax = axes[row][0]
        for category in CATEGORIES:
            ax.plot(alphas, [c.wait_mean(category) for c in row_cells],
                    marker="o", label=category.replace("_", " "))
        ax.set_xlabel("alpha regular")
        ax.set_ylabel("mean expected wait (min)")
        ax.set_title(f"waits, {share:.0%} premium")
        ax.legend(fontsize=8)
        ax = axes[row][1]
        for attr, label, mark in (
            ("last_arrival_pure", "regular with regulars", "o"),
            ("last_arrival_mixed", "regular with premiums", "s"),
        ):
            means = [MeanStd.of(getattr(c, attr)).mean for c in row_cells]
            ax.plot(alphas, means, marker=mark, label=label)
        ax.set_xlabel("alpha regular")
        ax.set_ylabel("last-arrival frequency")
        ax.set_title(f"regular last arrivals, {share:.0%} premium")
        ax.legend(fontsize=8)
    fig.tight_layout()
    return _finish(fig, path)


def plot_sweep(result: SweepResult, path: PathLike) -> Path:
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    for ax, matrix, title in (
        (axes[0], result.regular_mean, "regular mean wait"),
        (axes[1], result.premium_mean, "premium mean wait"),
    ):
        image = ax.imshow(matrix, origin="lower", aspect="auto", cmap="viridis")
        ax.set_xticks(range(len(result.alpha_regular_values)),
                      [f"{a:g}" for a in result.alpha_regular_values])
        ax.set_yticks(range(len(result.t_premium_values)),
                      [f"{t:g}" for t in result.t_premium_values])
        ax.set_xlabel("alpha regular")
        ax.set_ylabel("t premium (min)")
        ax.set_title(title)
        fig.colorbar(image, ax=ax, label="minutes")
    fig.tight_layout()
    return _finish(fig, path)
