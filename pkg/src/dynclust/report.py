"""Figure rendering for bench and gauntlet reports.

Figures are written next to the delimited output of the corresponding CLI
subcommand; everything uses the Agg backend so runs stay headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def bench_figure(rows: list[dict], path: str | Path) -> Path:
    """Log-log scaling plot of per-update query and queue-traffic means."""
    path = Path(path)
    sizes = [r["n"] for r in rows]
    queries = [r["mean_queries_per_update"] for r in rows]
    queue = [r["mean_queue_insertions_per_update"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    plot = ax.loglog if all(v > 0 for v in sizes + queries + queue) else ax.plot
    plot(sizes, queries, "o-", label="distance queries / update")
    plot(sizes, queue, "s--", label="queue insertions / update")
    ax.set_xlabel("active-set size n")
    ax.set_ylabel("mean per update")
    ax.set_title("update-cost scaling")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def gauntlet_figure(clean_records: list[dict], path: str | Path) -> Path:
    """Consistency gap over clean operations, with the reported value if any."""
    path = Path(path)
    ts = [r["t"] for r in clean_records]
    gaps = [r["gap"] for r in clean_records]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(ts, gaps, ".-", label="max consistent distance (M*)")
    if clean_records and "reported_diameter" in clean_records[-1]:
        rep = [r.get("reported_diameter") for r in clean_records]
        ax.plot(ts, rep, ".--", label="algorithm's reported diameter")
    ax.set_xlabel("operation t")
    ax.set_ylabel("distance")
    ax.set_title("adversarial consistency gap")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
