"""Dependency-free SVG renderings of learning curves and episode trajectories.

SVG is generated as text: diffable, deterministic for identical inputs, and
viewable in any browser. Numbers are formatted with a fixed shortest-repr
style so reruns produce byte-identical files.
"""

from __future__ import annotations

import math
import os
from glob import glob

from .env import read_trace_csv
from .trainer import read_curve

SVG_W, SVG_H = 640, 440
MARGIN = 52


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    for m in (1, 2, 5, 10):
        if raw <= m * mag:
            step = m * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * abs(hi):
        ticks.append(t)
        t += step
    return ticks


class _Frame:
    """Maps data coordinates into the SVG plot rectangle (y grows upward)."""

    def __init__(self, x_lo, x_hi, y_lo, y_hi):
        pad = 0.05 * (y_hi - y_lo) if y_hi > y_lo else 1.0
        self.x_lo, self.x_hi = x_lo, max(x_hi, x_lo + 1e-9)
        self.y_lo, self.y_hi = y_lo - pad, y_hi + pad

    def x(self, v: float) -> float:
        return MARGIN + (v - self.x_lo) / (self.x_hi - self.x_lo) * (SVG_W - 2 * MARGIN)

    def y(self, v: float) -> float:
        return SVG_H - MARGIN - (v - self.y_lo) / (self.y_hi - self.y_lo) * (SVG_H - 2 * MARGIN)


def _axes(frame: _Frame, x_label: str, y_label: str) -> list[str]:
    parts = [
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{SVG_W - 2 * MARGIN}" '
        f'height="{SVG_H - 2 * MARGIN}" fill="none" stroke="#999"/>'
    ]
    for t in _nice_ticks(frame.x_lo, frame.x_hi):
        px = frame.x(t)
        parts.append(f'<line x1="{_fmt(px)}" y1="{SVG_H - MARGIN}" x2="{_fmt(px)}" '
                     f'y2="{SVG_H - MARGIN + 5}" stroke="#999"/>')
        parts.append(f'<text x="{_fmt(px)}" y="{SVG_H - MARGIN + 18}" font-size="11" '
                     f'text-anchor="middle">{_fmt(t)}</text>')
    for t in _nice_ticks(frame.y_lo, frame.y_hi):
        py = frame.y(t)
        parts.append(f'<line x1="{MARGIN - 5}" y1="{_fmt(py)}" x2="{MARGIN}" '
                     f'y2="{_fmt(py)}" stroke="#999"/>')
        parts.append(f'<text x="{MARGIN - 8}" y="{_fmt(py + 4)}" font-size="11" '
                     f'text-anchor="end">{_fmt(t)}</text>')
    parts.append(f'<text x="{SVG_W // 2}" y="{SVG_H - 8}" font-size="12" '
                 f'text-anchor="middle">{x_label}</text>')
    parts.append(f'<text x="14" y="{SVG_H // 2}" font-size="12" text-anchor="middle" '
                 f'transform="rotate(-90 14 {SVG_H // 2})">{y_label}</text>')
    return parts


def _svg(parts: list[str]) -> str:
    body = "\n".join(parts)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" '
        f'viewBox="0 0 {SVG_W} {SVG_H}">\n<rect width="100%" height="100%" fill="white"/>\n'
        f"{body}\n</svg>\n"
    )


def render_curve_svg(series: list[list[dict]], y_key: str = "mean_return") -> str:
    """One seed: a single line. Several seeds: the per-step mean line inside a
    min/max band (series must share their env_step grid)."""
    if not series or not all(series):
        raise ValueError("need at least one nonempty curve series")
    xs = [row["env_step"] for row in series[0]]
    for s in series[1:]:
        if [row["env_step"] for row in s] != xs:
            raise ValueError("curve series have mismatched env_step grids; "
                             "plot runs trained with identical eval_every")
    values = [[row[y_key] for row in s] for s in series]
    all_vals = [v for vs in values for v in vs]
    frame = _Frame(min(xs), max(xs), min(all_vals), max(all_vals))
    parts = _axes(frame, "environment steps", y_key)

    if len(series) >= 2:
        upper = [max(v[k] for v in values) for k in range(len(xs))]
        lower = [min(v[k] for v in values) for k in range(len(xs))]
        mean = [sum(v[k] for v in values) / len(values) for k in range(len(xs))]
        band = (
            [f"{_fmt(frame.x(x))},{_fmt(frame.y(u))}" for x, u in zip(xs, upper)]
            + [f"{_fmt(frame.x(x))},{_fmt(frame.y(l))}" for x, l in zip(reversed(xs), reversed(lower))]
        )
        parts.append(f'<polygon class="band" points="{" ".join(band)}" '
                     f'fill="#aaccee" opacity="0.5"/>')
        pts = " ".join(f"{_fmt(frame.x(x))},{_fmt(frame.y(m))}" for x, m in zip(xs, mean))
        parts.append(f'<polyline class="mean" points="{pts}" fill="none" '
                     f'stroke="#1155cc" stroke-width="2"/>')
    else:
        pts = " ".join(f"{_fmt(frame.x(x))},{_fmt(frame.y(v))}" for x, v in zip(xs, values[0]))
        parts.append(f'<polyline class="mean" points="{pts}" fill="none" '
                     f'stroke="#1155cc" stroke-width="2"/>')
    return _svg(parts)


_UAV_COLORS = ["#cc2222", "#2266cc", "#22aa55", "#aa22aa", "#cc8822", "#2299aa"]


def render_trajectory_svg(rows: list[dict], screen: float = 300.0, d_obs: float = 20.0,
                          safeguard_every: int = 10) -> str:
    """UAV paths as polylines, obstacles as square markers with safeguard
    circles sampled along their track. World y points up; SVG y is flipped."""
    uav_ids = sorted({r["agent_id"] for r in rows if r["agent_id"].startswith("uav")})
    obs_ids = sorted({r["agent_id"] for r in rows if r["agent_id"].startswith("obs")})
    if not uav_ids:
        raise ValueError("trace holds no UAV rows")

    side = min(SVG_W, SVG_H) - 2 * MARGIN
    scale = side / screen

    def px(x: float) -> float:
        return MARGIN + x * scale

    def py(y: float) -> float:
        return MARGIN + (screen - y) * scale

    parts = [
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{_fmt(side)}" height="{_fmt(side)}" '
        f'fill="none" stroke="#999"/>'
    ]
    for k, oid in enumerate(obs_ids):
        track = [r for r in rows if r["agent_id"] == oid]
        track.sort(key=lambda r: r["step"])
        for j, r in enumerate(track):
            if j % safeguard_every == 0:
                parts.append(
                    f'<circle class="safeguard" cx="{_fmt(px(r["x"]))}" cy="{_fmt(py(r["y"]))}" '
                    f'r="{_fmt(d_obs * scale)}" fill="none" stroke="#88aa88" '
                    f'stroke-dasharray="3 3"/>'
                )
            parts.append(
                f'<rect class="obstacle" x="{_fmt(px(r["x"]) - 3)}" y="{_fmt(py(r["y"]) - 3)}" '
                f'width="6" height="6" fill="#338833"/>'
            )
    for i, uid in enumerate(uav_ids):
        track = [r for r in rows if r["agent_id"] == uid]
        track.sort(key=lambda r: r["step"])
        pts = " ".join(f"{_fmt(px(r['x']))},{_fmt(py(r['y']))}" for r in track)
        color = _UAV_COLORS[i % len(_UAV_COLORS)]
        parts.append(f'<polyline class="uav-path" points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="2"/>')
        last = track[-1]
        parts.append(f'<rect class="uav" x="{_fmt(px(last["x"]) - 4)}" '
                     f'y="{_fmt(py(last["y"]) - 4)}" width="8" height="8" fill="{color}"/>')
    return _svg(parts)


def render_summary_table(metrics_rows: list[dict]) -> str:
    """Fixed-width text table of aggregate metric name/value pairs."""
    if not metrics_rows:
        return "no metrics\n"
    width = max(len(r["metric"]) for r in metrics_rows)
    lines = [f"{r['metric']:<{width}}  {r['value']}" for r in metrics_rows]
    return "\n".join(lines) + "\n"


def render_outputs(run_dir: str, screen: float = 300.0, d_obs: float = 20.0) -> dict[str, str]:
    """Render whatever a run directory holds: curve.csv files (recursively)
    into a learning-curve SVG, trace CSVs into trajectory SVGs, and a metrics
    summary CSV into a plain-text table. Returns {kind: written path}."""
    written: dict[str, str] = {}
    curve_paths = sorted(glob(os.path.join(run_dir, "**", "curve.csv"), recursive=True))
    if curve_paths:
        series = [read_curve(p) for p in curve_paths]
        svg_path = os.path.join(run_dir, "curve.svg")
        with open(svg_path, "w") as fh:
            fh.write(render_curve_svg(series))
        written["curve"] = svg_path

    trace_paths = sorted(glob(os.path.join(run_dir, "**", "trace_*.csv"), recursive=True))
    if trace_paths:
        for p in trace_paths:
            rows = read_trace_csv(p)
            svg_path = p[: -len(".csv")] + ".svg"
            with open(svg_path, "w") as fh:
                fh.write(render_trajectory_svg(rows, screen=screen, d_obs=d_obs))
            written.setdefault("trajectories", svg_path)
    else:
        print(f"note: no episode trace CSVs under {run_dir}; trajectory SVG skipped")

    summary_path = os.path.join(run_dir, "metrics_summary.csv")
    if os.path.exists(summary_path):
        rows = []
        with open(summary_path) as fh:
            first = fh.readline()
            if not first.startswith("#"):
                raise ValueError(f"{summary_path}: line 1: missing format-version header")
            header = fh.readline().rstrip("\n").split(",")
            if header != ["metric", "value"]:
                raise ValueError(f"{summary_path}: line 2: unexpected header {header}")
            for lineno, line in enumerate(fh, start=3):
                parts = line.rstrip("\n").split(",")
                if len(parts) != 2:
                    raise ValueError(f"{summary_path}: line {lineno}: expected 2 fields")
                rows.append({"metric": parts[0], "value": parts[1]})
        table_path = os.path.join(run_dir, "metrics_summary.txt")
        with open(table_path, "w") as fh:
            fh.write(render_summary_table(rows))
        written["summary"] = table_path
    return written
