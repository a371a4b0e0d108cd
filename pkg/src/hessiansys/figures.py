"""Matplotlib rendering of solver and verification reports to image files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_convergence(distances, ratios, path, title="fixed-point convergence"):
    """Semilog distance history with the observed step ratios."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ks = np.arange(len(distances))
    positive = [max(d, 1e-300) for d in distances]
    ax1.semilogy(ks, positive, "o-", ms=4, lw=1)
    ax1.set_xlabel("step k")
    ax1.set_ylabel("step distance $d_k$")
    ax1.set_title(title)
    ax1.grid(True, which="both", alpha=0.3)
    if ratios:
        ax2.plot(np.arange(1, len(ratios) + 1), ratios, "s-", ms=4, lw=1)
        ax2.axhline(1.0, color="r", ls="--", lw=0.8)
    ax2.set_xlabel("step k")
    ax2.set_ylabel("ratio $d_k / d_{k-1}$")
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_field_heatmap(field, path, title="solution"):
    """Per-component heatmap of a 2-D field; 3-D fields show the middle slice."""
    N = field.N
    vals = field.values
    if field.domain.n == 3:
        vals = vals[:, :, :, field.domain.m // 2]
    fig, axes = plt.subplots(1, N, figsize=(4.2 * N, 3.6), squeeze=False)
    extent = [
        field.domain.lower[0],
        field.domain.upper[0],
        field.domain.lower[1],
        field.domain.upper[1],
    ]
    for alpha in range(N):
        ax = axes[0][alpha]
        im = ax.imshow(vals[alpha].T, origin="lower", extent=extent, aspect="auto")
        fig.colorbar(im, ax=ax, shrink=0.85)
        ax.set_title(f"{title}, component {alpha + 1}")
        ax.set_xlabel("$x_1$")
        ax.set_ylabel("$x_2$")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_mt_sweep(rows, path):
    """Mismatch of the boundary identity against quadrature order."""
    orders = [r[0] for r in rows]
    mism = [max(r[3], 1e-17) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.loglog(orders, mism, "o-", ms=4, lw=1)
    ax.set_xlabel("quadrature order")
    ax.set_ylabel("relative mismatch")
    ax.set_title("boundary identity convergence")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_condition_margins(reports, path):
    """Bar chart of worst relative margins per certified condition."""
    names = [r.condition for r in reports]
    margins = [r.worst_relative for r in reports]
    colors = ["tab:green" if r.passed else "tab:red" for r in reports]
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.bar(range(len(names)), margins, color=colors)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel("worst relative margin")
    ax.set_title("certification margins (negative = violated)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
