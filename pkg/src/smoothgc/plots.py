"""Figure rendering for the report path (PNG files next to the CSV/JSON)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_loss_curve(losses, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(1, len(losses) + 1), losses, marker="o", markersize=3)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title("training loss")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_order_histogram(pairs, path) -> None:
    orders = [p[0] for p in pairs]
    counts = [p[1] for p in pairs]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(orders, counts, width=0.8)
    ax.set_xlabel("selected convolution order")
    ax.set_ylabel("number of nodes")
    ax.set_title("halting order distribution")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_metric_bars(per_seed: list[dict], path) -> None:
    keys = [k for k in ("acc", "nmi", "f1") if all(k in row for row in per_seed)]
    fig, ax = plt.subplots(figsize=(6, 4))
    if keys:
        seeds = range(len(per_seed))
        width = 0.8 / len(keys)
        for j, key in enumerate(keys):
            vals = [row[key] for row in per_seed]
            ax.bar([s + j * width for s in seeds], vals, width=width, label=key)
        ax.set_xticks([s + 0.4 - width / 2 for s in seeds])
        ax.set_xticklabels([str(row.get("seed", i)) for i, row in enumerate(per_seed)])
        ax.legend()
    ax.set_xlabel("seed")
    ax.set_ylabel("score")
    ax.set_title("per-seed clustering metrics")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_sweep(rows: list[dict], path) -> None:
    props = [row["proportion"] for row in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    for key in ("acc", "nmi", "f1"):
        if all(key in row for row in rows):
            ax.plot(props, [row[key] for row in rows], marker="o", label=key)
    ax2 = ax.twinx()
    ax2.plot(props, [row["normalized_final"] for row in rows],
             color="gray", linestyle="--", marker="s", label="final/epoch1 loss")
    ax2.set_ylabel("normalized final loss")
    ax.set_xlabel("tightness : separation proportion")
    ax.set_ylabel("score")
    ax.set_title("proportion sweep")
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
