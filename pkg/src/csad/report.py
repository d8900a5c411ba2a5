"""Figure rendering for CLI reports; writes PNGs next to the delimited output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def score_distribution_figure(rows, path) -> None:
    """Histogram of fused scores grouped by image kind."""
    kinds = {}
    for r in rows:
        kinds.setdefault(r.get("kind", "unknown"), []).append(r["fused"])
    fig, ax = plt.subplots(figsize=(7, 4))
    for kind, scores in sorted(kinds.items()):
        ax.hist(scores, bins=20, alpha=0.6, label=f"{kind} (n={len(scores)})")
    ax.set_xlabel("fused anomaly score")
    ax.set_ylabel("count")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def anomaly_map_figure(image, merged_map, path, title: str = "") -> None:
    """Input image next to the merged anomaly heat map."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 4.5))
    axes[0].imshow(np.clip(image, 0, 1))
    axes[0].set_title("image")
    im = axes[1].imshow(merged_map, cmap="inferno")
    axes[1].set_title(title or "merged anomaly map")
    fig.colorbar(im, ax=axes[1], fraction=0.046)
    for ax in axes:
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def bench_figure(report, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(["latency (ms)", "throughput (fps)"],
           [report.latency_ms, report.throughput_fps],
           color=["#4477aa", "#ee6677"])
    ax.set_title(f"runs={report.runs} batch={report.batch_size}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
