"""Quantitative evaluation over episode records.

Reports are plain dicts (canonically serializable): one-step validity by box
bucket, putdown placement error split by target kind, joint mask-IoU accuracy
at several thresholds, plan success by bucket x variant x mode, and
percentage-point deltas between two reports.  Placement error is measured in
the horizontal plane, against the insertion center of the supervision
target; the vertical coordinate is fixed by the support surface at
execution time.  Spreads are population standard deviations.
"""

from __future__ import annotations

import math
from typing import Iterable

from .errors import PalletBenchError, StructureMismatchError

BUCKETS = ("1-10", "11-20", "21-30")
IOU_THRESHOLDS = (0.25, 0.5, 0.75)
TARGET_KINDS = ("cell", "box")

REPORT_SCHEMA_VERSION = "1"


def _pct(num: int, den: int) -> float:
    return 100.0 * num / den


def _action_steps(records: Iterable) -> list[tuple[str, object]]:
    """(bucket, step) pairs for every step where the policy proposed an action."""
    out = []
    for rec in records:
        for step in rec.steps:
            if step.valid is not None:
                out.append((rec.bucket, step))
    return out


def one_step_validity(records: Iterable) -> dict:
    """Percentage of referee-valid actions, per bucket and aggregate."""
    steps = _action_steps(records)
    if not steps:
        raise PalletBenchError(code="empty-bucket")
    out: dict = {}
    total_n = total_v = 0
    for bucket in BUCKETS:
        in_bucket = [s for b, s in steps if b == bucket]
        if not in_bucket:
            out[bucket] = None
            continue
        n_valid = sum(1 for s in in_bucket if s.valid)
        out[bucket] = {"pct": _pct(n_valid, len(in_bucket)), "count": len(in_bucket)}
        total_n += len(in_bucket)
        total_v += n_valid
    out["aggregate"] = {"pct": _pct(total_v, total_n), "count": total_n}
    return out


def placement_error(records: Iterable) -> dict:
    """Mean +/- population std of putdown localization error, by target kind.

    Computed exclusively over valid free-form predictions.
    """
    by_kind: dict[str, list[float]] = {k: [] for k in TARGET_KINDS}
    for rec in records:
        for step in rec.steps:
            if step.valid and step.placement_error is not None and step.target_kind:
                by_kind[step.target_kind].append(step.placement_error)
    out: dict = {}
    all_errors: list[float] = []
    for kind in TARGET_KINDS:
        errors = by_kind[kind]
        all_errors.extend(errors)
        out[kind] = _mean_std(errors)
    out["aggregate"] = _mean_std(all_errors)
    return out


def _mean_std(values: list[float]) -> dict | None:
    if not values:
        return None
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return {"mean": mean, "std": math.sqrt(var), "count": len(values)}


def joint_iou_accuracy(records: Iterable, tau: float) -> dict:
    """Fraction of steps where BOTH masks reach IoU >= tau, per bucket."""
    steps = [(b, s) for b, s in _action_steps(records) if s.pick_iou is not None]
    out: dict = {}
    total_n = total_ok = 0
    for bucket in BUCKETS:
        in_bucket = [s for b, s in steps if b == bucket]
        if not in_bucket:
            out[bucket] = None
            continue
        ok = sum(1 for s in in_bucket if min(s.pick_iou, s.target_iou) >= tau)
        out[bucket] = {"pct": _pct(ok, len(in_bucket)), "count": len(in_bucket)}
        total_n += len(in_bucket)
        total_ok += ok
    out["aggregate"] = {"pct": _pct(total_ok, total_n), "count": total_n} if total_n else None
    return out


def target_iou_by_kind(records: Iterable, tau: float) -> dict:
    """Per-target-kind accuracy of the putdown mask alone at IoU >= tau."""
    out: dict = {}
    for kind in TARGET_KINDS:
        vals = [
            s.target_iou
            for _, s in _action_steps(records)
            if s.target_iou is not None and s.target_kind == kind
        ]
        if not vals:
            out[kind] = None
            continue
        ok = sum(1 for v in vals if v >= tau)
        out[kind] = {"pct": _pct(ok, len(vals)), "count": len(vals)}
    return out


def plan_success(records: Iterable) -> dict:
    """Success percentage by variant x bucket; empty cells are absent (None)."""
    cells: dict[str, dict[str, list]] = {}
    for rec in records:
        variant = rec.task["variant"]
        cells.setdefault(variant, {}).setdefault(rec.bucket, []).append(rec.outcome)
    out: dict = {"by_variant": {}, "by_bucket": {}, "aggregate": None}
    n_total = n_success = 0
    bucket_tallies = {b: [0, 0] for b in BUCKETS}
    for variant in sorted(cells):
        row: dict = {}
        for bucket in BUCKETS:
            outcomes = cells[variant].get(bucket)
            if not outcomes:
                row[bucket] = None
                continue
            wins = sum(1 for o in outcomes if o == "success")
            row[bucket] = {"pct": _pct(wins, len(outcomes)), "count": len(outcomes)}
            bucket_tallies[bucket][0] += wins
            bucket_tallies[bucket][1] += len(outcomes)
            n_success += wins
            n_total += len(outcomes)
        out["by_variant"][variant] = row
    for bucket in BUCKETS:
        wins, n = bucket_tallies[bucket]
        out["by_bucket"][bucket] = {"pct": _pct(wins, n), "count": n} if n else None
    if n_total:
        out["aggregate"] = {"pct": _pct(n_success, n_total), "count": n_total}
    return out


def outcome_counts(records: Iterable) -> dict:
    counts: dict[str, int] = {}
    for rec in records:
        counts[rec.outcome] = counts.get(rec.outcome, 0) + 1
    return counts


def build_report(records_by_mode: dict[str, list], suite_config: dict, policy: dict) -> dict:
    """Aggregate everything into one canonical report dict."""
    report: dict = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "suite_config": suite_config,
        "policy": policy,
        "modes": sorted(records_by_mode),
        "one_step_validity": {},
        "placement_error": None,
        "joint_iou": {},
        "target_iou_by_kind": {},
        "plan_success": {},
        "outcomes": {},
        "n_episodes": {m: len(recs) for m, recs in sorted(records_by_mode.items())},
    }
    for mode, recs in sorted(records_by_mode.items()):
        if not recs:
            continue
        report["one_step_validity"][mode] = one_step_validity(recs)
        report["plan_success"][mode] = plan_success(recs)
        report["outcomes"][mode] = outcome_counts(recs)
    freeform = records_by_mode.get("free-form")
    if freeform:
        report["placement_error"] = placement_error(freeform)
    any_records = next((recs for recs in records_by_mode.values() if recs), [])
    for tau in IOU_THRESHOLDS:
        key = f"{tau:g}"
        report["joint_iou"][key] = joint_iou_accuracy(any_records, tau)
        report["target_iou_by_kind"][key] = target_iou_by_kind(any_records, tau)
    return report


def _walk_pct_cells(report: dict, prefix: str = "") -> dict[str, float]:
    cells: dict[str, float] = {}
    if isinstance(report, dict):
        if "pct" in report and isinstance(report.get("pct"), (int, float)):
            cells[prefix] = float(report["pct"])
            return cells
        for key in sorted(report):
            if key in ("suite_config", "policy", "outcomes", "n_episodes", "schema_version", "modes"):
                continue
            cells.update(_walk_pct_cells(report[key], f"{prefix}/{key}" if prefix else key))
    return cells


def ablation_delta(report_a: dict, report_b: dict) -> dict[str, float]:
    """Percentage-point gaps (a - b) for every percentage cell.

    Both reports must populate the same cells; anything else is a structure
    mismatch.
    """
    cells_a = _walk_pct_cells(report_a)
    cells_b = _walk_pct_cells(report_b)
    if set(cells_a) != set(cells_b):
        raise StructureMismatchError(
            f"cell mismatch: {sorted(set(cells_a) ^ set(cells_b))[:5]}"
        )
    return {k: cells_a[k] - cells_b[k] for k in sorted(cells_a)}


# ---------------------------------------------------------------------------
# Text rendering
# ---------------------------------------------------------------------------


def _fmt_cell(cell: dict | None) -> str:
    if cell is None:
        return "   -  "
    return f"{cell['pct']:6.1f}"


def render_text(report: dict) -> str:
    """Fixed-layout tables mirroring the headline metric groupings."""
    lines: list[str] = []
    policy = report.get("policy", {})
    lines.append(f"policy: {policy.get('name', '?')}" + ("  [privileged]" if policy.get("privileged") else ""))
    lines.append(f"modes: {', '.join(report.get('modes', []))}")
    lines.append("")
    lines.append("One-step validity (%)")
    header = f"  {'mode':<16}" + "".join(f"{b:>8}" for b in BUCKETS) + f"{'Agg':>8}"
    lines.append(header)
    for mode, row in report.get("one_step_validity", {}).items():
        cells = "".join(f"{_fmt_cell(row.get(b)):>8}" for b in BUCKETS)
        lines.append(f"  {mode:<16}" + cells + f"{_fmt_cell(row.get('aggregate')):>8}")
    pe = report.get("placement_error")
    if pe:
        lines.append("")
        lines.append("Putdown placement error (m, free-form, valid predictions)")
        for kind in ("cell", "box", "aggregate"):
            stats = pe.get(kind)
            if stats:
                lines.append(
                    f"  {kind:<10} {stats['mean']:.3f} +/- {stats['std']:.2f}  (n={stats['count']})"
                )
    if report.get("joint_iou"):
        lines.append("")
        lines.append("Joint IoU accuracy (%)")
        lines.append(f"  {'tau':<6}" + "".join(f"{b:>8}" for b in BUCKETS) + f"{'Agg':>8}")
        for tau, row in report["joint_iou"].items():
            cells = "".join(f"{_fmt_cell(row.get(b)):>8}" for b in BUCKETS)
            lines.append(f"  {tau:<6}" + cells + f"{_fmt_cell(row.get('aggregate')):>8}")
    for mode, ps in report.get("plan_success", {}).items():
        lines.append("")
        lines.append(f"Plan success (%) [{mode}]")
        lines.append(f"  {'variant':<24}" + "".join(f"{b:>8}" for b in BUCKETS))
        for variant, row in ps["by_variant"].items():
            cells = "".join(f"{_fmt_cell(row.get(b)):>8}" for b in BUCKETS)
            lines.append(f"  {variant:<24}" + cells)
        cells = "".join(f"{_fmt_cell(ps['by_bucket'].get(b)):>8}" for b in BUCKETS)
        lines.append(f"  {'(all variants)':<24}" + cells)
        if ps.get("aggregate"):
            lines.append(f"  aggregate: {ps['aggregate']['pct']:.1f} (n={ps['aggregate']['count']})")
    return "\n".join(lines) + "\n"


def report_rows(report: dict) -> list[list[str]]:
    """Flat delimited form: metric path, value, count."""
    rows = [["metric", "value", "count"]]
    for path, pct in sorted(_walk_pct_cells(report).items()):
        rows.append([path, f"{pct:.4f}", ""])
    pe = report.get("placement_error") or {}
    for kind, stats in pe.items():
        if stats:
            rows.append([f"placement_error/{kind}/mean", f"{stats['mean']:.6f}", str(stats["count"])])
            rows.append([f"placement_error/{kind}/std", f"{stats['std']:.6f}", str(stats["count"])])
    return rows
