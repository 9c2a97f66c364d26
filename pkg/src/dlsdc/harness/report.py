"""CSV tables and SVG charts for sweep results.

Everything written here is a pure function of the results, so two runs of
the same sweep produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Optional, Sequence

from .simulate import RunReport
from .sweep import SummaryRow, SweepResult

RUN_COLUMNS = (
    "scenario_id", "seed", "policy", "dc_price", "forecast_mode", "total_reward",
    "service_reward", "energy_cost", "penalty", "demand_charge", "peak_kw",
    "ub_objective", "gap_pct", "deactivations", "runtime_ms",
)
SUMMARY_COLUMNS = (
    "dc_price", "policy", "forecast_mode", "scenarios", "mean_gap_pct",
    "std_gap_pct", "mean_total_reward", "mean_peak_kw",
)

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def runs_csv(runs: Sequence[RunReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_COLUMNS)
    for r in runs:
        w.writerow([_fmt(getattr(r, c)) for c in RUN_COLUMNS])
    return buf.getvalue()


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def line_chart(series: dict[str, list[tuple[float, float]]], title: str, xlabel: str, ylabel: str,
               width: int = 640, height: int = 400) -> str:
    """Minimal deterministic SVG line chart, one polyline per series."""
    left, right, top, bottom = 70, 150, 40, 50
    pw, ph = width - left - right, height - top - bottom
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(0.0, min(ys)), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    y1 += 0.05 * (y1 - y0)

    def px(x: float) -> float:
        return left + pw * (x - x0) / (x1 - x0)

    def py(y: float) -> float:
        return top + ph * (1.0 - (y - y0) / (y1 - y0))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for x in sorted(set(xs)):
        out.append(f'<line x1="{px(x):.2f}" y1="{top + ph}" x2="{px(x):.2f}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{px(x):.2f}" y="{top + ph + 16}" text-anchor="middle">{x:g}</text>')
    for k in range(6):
        y = y0 + (y1 - y0) * k / 5
        out.append(f'<line x1="{left - 4}" y1="{py(y):.2f}" x2="{left}" y2="{py(y):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{py(y) + 4:.2f}" text-anchor="end">{y:.3g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{ylabel}</text>')
    for k, (name, pts) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in sorted(pts))
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in sorted(pts):
            out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{color}"/>')
        ly = top + 14 * k + 6
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 34}" y="{ly + 4}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _series(rows: Sequence[SummaryRow], attr: str, include_optimal: bool) -> dict[str, list[tuple[float, float]]]:
    series: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        if r.policy == "OPTIMAL" and not include_optimal:
            continue
        name = r.policy if r.forecast_mode in ("none", "hindsight") else f"{r.policy} ({r.forecast_mode})"
        series.setdefault(name, []).append((r.dc_price, getattr(r, attr)))
    return series


def emit_report(result: SweepResult, out_dir: str | Path, title: Optional[str] = None) -> list[Path]:
    """Write runs.csv, summary.csv, gap_vs_price.svg and peak_vs_price.svg.

    Runs whose gap needs a caveat (zero bound, bound solve stopped early)
    are listed in gap_flags.csv, which only exists when there are some.

    Refuses to write anything for an empty result, so a failed sweep never
    leaves a half-filled directory behind.
    """
    if not result.runs or not result.summary:
        raise ValueError("nothing to report: the sweep produced no runs")
    contents = {
        "runs.csv": runs_csv(result.runs),
        "summary.csv": summary_csv(result.summary),
        "gap_vs_price.svg": line_chart(_series(result.summary, "mean_gap_pct", False),
                                       title or "Mean optimality gap", "demand charge price ($/kW)", "gap (%)"),
        "peak_vs_price.svg": line_chart(_series(result.summary, "mean_peak_kw", True),
                                        title or "Mean billed peak", "demand charge price ($/kW)", "peak (kW)"),
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in contents.items():
        path = out / name
        path.write_text(text)
        paths.append(path)
    if result.failures:
        lines = ["dc_price,scenario_id,policy,error"]
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(result.failures)
        path = out / "failures.csv"
        path.write_text(lines[0] + "\n" + buf.getvalue())
        paths.append(path)
    flagged = [r for r in result.runs if r.gap_flag]
    if flagged:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario_id", "policy", "dc_price", "flag"])
        for r in flagged:
            w.writerow([r.scenario_id, r.policy, _fmt(r.dc_price), r.gap_flag])
        path = out / "gap_flags.csv"
        path.write_text(buf.getvalue())
        paths.append(path)
    return paths
