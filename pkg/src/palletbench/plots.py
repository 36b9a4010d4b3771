"""Static report figures: bar charts by box bucket and task variant.

Rendered with the Agg backend to deterministic file names next to the
delimited output; figures carry no timestamps so reruns are stable.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import BUCKETS

_FIGSIZE = (7.0, 3.6)
_DPI = 110
_BAR_COLORS = ("#4878cf", "#ee854a", "#6acc64", "#d65f5f", "#956cb4")


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=_DPI, metadata={"Software": "palletbench"})
    plt.close(fig)
    return path


def _grouped_bars(ax, groups: list[str], series: dict[str, list[float | None]], ylabel: str) -> None:
    n_series = max(len(series), 1)
    width = 0.8 / n_series
    x = np.arange(len(groups))
    omitted = False
    for i, (label, values) in enumerate(series.items()):
        xs, hs = [], []
        for j, v in enumerate(values):
            if v is None:
                omitted = True
                continue
            xs.append(x[j] + (i - (n_series - 1) / 2) * width)
            hs.append(v)
        ax.bar(xs, hs, width=width, label=label, color=_BAR_COLORS[i % len(_BAR_COLORS)])
    ax.set_xticks(x)
    ax.set_xticklabels(groups, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel(ylabel)
    ax.set_ylim(0, 105)
    ax.grid(axis="y", alpha=0.3)
    legend_title = "empty cells omitted" if omitted else None
    ax.legend(fontsize=8, title=legend_title, title_fontsize=7)


def _cell_pct(cell: dict | None) -> float | None:
    return None if cell is None else cell["pct"]


def render_report_figures(report: dict, out_dir: str | Path) -> list[Path]:
    """Write the chart set for a metrics report; returns the created paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []

    ps = report.get("plan_success", {})
    if ps:
        fig, ax = plt.subplots(figsize=_FIGSIZE)
        series = {
            mode: [_cell_pct(data["by_bucket"].get(b)) for b in BUCKETS]
            for mode, data in ps.items()
        }
        _grouped_bars(ax, list(BUCKETS), series, "plan success (%)")
        ax.set_xlabel("boxes per scene")
        fig.tight_layout()
        created.append(_save(fig, out / "plan_success_by_bucket.png"))

        variants = sorted({v for data in ps.values() for v in data["by_variant"]})
        fig, ax = plt.subplots(figsize=(max(7.0, 0.8 * len(variants)), 3.8))
        series = {}
        for mode, data in ps.items():
            vals = []
            for variant in variants:
                row = data["by_variant"].get(variant) or {}
                agg = [c for c in (row.get(b) for b in BUCKETS) if c]
                if agg:
                    n = sum(c["count"] for c in agg)
                    wins = sum(c["pct"] * c["count"] / 100.0 for c in agg)
                    vals.append(100.0 * wins / n)
                else:
                    vals.append(None)
            series[mode] = vals
        _grouped_bars(ax, variants, series, "plan success (%)")
        fig.tight_layout()
        created.append(_save(fig, out / "plan_success_by_variant.png"))

    osv = report.get("one_step_validity", {})
    if osv:
        fig, ax = plt.subplots(figsize=_FIGSIZE)
        series = {mode: [_cell_pct(row.get(b)) for b in BUCKETS] for mode, row in osv.items()}
        _grouped_bars(ax, list(BUCKETS), series, "one-step validity (%)")
        ax.set_xlabel("boxes per scene")
        fig.tight_layout()
        created.append(_save(fig, out / "one_step_validity.png"))

    ji = report.get("joint_iou", {})
    if ji:
        fig, ax = plt.subplots(figsize=_FIGSIZE)
        series = {f"tau={tau}": [_cell_pct(row.get(b)) for b in BUCKETS] for tau, row in ji.items()}
        _grouped_bars(ax, list(BUCKETS), series, "joint IoU accuracy (%)")
        ax.set_xlabel("boxes per scene")
        fig.tight_layout()
        created.append(_save(fig, out / "joint_iou_accuracy.png"))

    pe = report.get("placement_error")
    if pe:
        kinds = [k for k in ("cell", "box", "aggregate") if pe.get(k)]
        fig, ax = plt.subplots(figsize=(4.2, 3.4))
        means = [pe[k]["mean"] for k in kinds]
        stds = [pe[k]["std"] for k in kinds]
        ax.bar(kinds, means, yerr=stds, capsize=4, color=_BAR_COLORS[0])
        ax.set_ylabel("placement error (m)")
        ax.grid(axis="y", alpha=0.3)
        fig.tight_layout()
        created.append(_save(fig, out / "placement_error.png"))
    return created
