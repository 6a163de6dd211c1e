"""Report rendering: delimited exports plus matplotlib figures.

Figures mirror the bench axes (decoded length vs seconds per step; sampling
length vs tokens per second) and the coherence-over-length curve.  The Agg
backend is forced so rendering works headless.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .ioutil import write_text_atomic


def _plt():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


_FIGURE_STYLE = {
    "figure.figsize": (6.0, 3.8),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 9,
}


def write_csv(path: str | Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    write_text_atomic(path, buf.getvalue())


def latency_csv(path: str | Path, reports: list) -> None:
    rows = [
        [r.model_id, p.position, p.median_s, p.p90_s, p.repeats, p.lane_state_bytes]
        for r in reports
        for p in r.points
    ]
    write_csv(path, ["model_id", "position", "median_s", "p90_s", "repeats", "lane_state_bytes"], rows)


def throughput_csv(path: str | Path, reports: list) -> None:
    rows = [
        [r.model_id, p.target_len, p.tokens_per_s, p.batch_size, p.lane_state_bytes,
         p.memory_budget_bytes]
        for r in reports
        for p in r.points
    ]
    write_csv(
        path,
        ["model_id", "target_len", "tokens_per_s", "batch_size", "lane_state_bytes",
         "memory_budget_bytes"],
        rows,
    )


def render_latency_figure(reports: list, path: str | Path) -> None:
    plt = _plt()
    with plt.rc_context(_FIGURE_STYLE):
        fig, ax = plt.subplots()
        for r in reports:
            xs = [p.position for p in r.points]
            ys = [p.median_s for p in r.points]
            ax.plot(xs, ys, marker="o", label=r.model_id)
        ax.set_xscale("log", base=2)
        ax.set_yscale("log")
        ax.set_xlabel("decoded length (tokens)")
        ax.set_ylabel("seconds per step (median)")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def render_throughput_figure(reports: list, path: str | Path) -> None:
    plt = _plt()
    with plt.rc_context(_FIGURE_STYLE):
        fig, ax = plt.subplots()
        for r in reports:
            xs = [p.target_len for p in r.points]
            ys = [p.tokens_per_s for p in r.points]
            ax.plot(xs, ys, marker="o", label=r.model_id)
        ax.set_xscale("log", base=2)
        ax.set_yscale("log")
        ax.set_xlabel("sampling length (tokens)")
        ax.set_ylabel("max throughput (tokens/s)")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def render_sc_l_figure(series_by_label: dict, path: str | Path) -> None:
    plt = _plt()
    with plt.rc_context(_FIGURE_STYLE):
        fig, ax = plt.subplots()
        for label, series in series_by_label.items():
            xs = [l for l, _ in series.points]
            ys = [s for _, s in series.points]
            ax.plot(xs, ys, marker=".", label=label)
        ax.set_xlabel("segment start (words)")
        ax.set_ylabel("prompt-segment cosine similarity")
        if series_by_label:
            ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
