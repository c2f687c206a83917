"""Hand-written SVG learning curves (byte-stable across runs and platforms)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 640
CURVES = (70.0, 40.0, 690.0, 330.0)  # left, top, width, height
TRACE = (70.0, 450.0, 690.0, 140.0)
GRID_POINTS = 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


@dataclass(frozen=True)
class Axes:
    """Affine map from data coordinates to a pixel rectangle (y grows downward)."""

    left: float
    top: float
    width: float
    height: float
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def px(self, x, y):
        sx = self.width / (self.x_hi - self.x_lo)
        sy = self.height / (self.y_hi - self.y_lo)
        return self.left + (np.asarray(x) - self.x_lo) * sx, self.top + (self.y_hi - np.asarray(y)) * sy


def nice_ticks(lo: float, hi: float, target: int = 5):
    """Round tick values covering [lo, hi]; returns (ticks, lo', hi')."""
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        hi = lo + 1.0 if math.isfinite(lo) else 1.0
        lo = lo if math.isfinite(lo) else 0.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.floor(lo / step) * step
    stop = math.ceil(hi / step) * step
    n = int(round((stop - start) / step))
    return [start + i * step for i in range(n + 1)], start, stop


def _num(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float) -> str:
    if abs(v) >= 10000:
        return f"{v / 1000:g}k"
    return f"{v:g}"


def _points(xs, ys) -> str:
    return " ".join(f"{_num(x)},{_num(y)}" for x, y in zip(xs, ys))


def config_label(cfg) -> str:
    if cfg.vanilla:
        return f"vanilla {cfg.algo}"
    return f"{cfg.n_explorers} explorer" + ("" if cfg.n_explorers == 1 else "s")


def step_series(records):
    """(cumulative steps, returns) of one agent's episodes."""
    return np.array([r.steps for r in records], dtype=float), np.array([r.ret for r in records], dtype=float)


def sample_on_grid(steps, rets, grid):
    """Return of the latest episode finished at or before each grid point (nan before the first)."""
    idx = np.searchsorted(steps, grid, side="right") - 1
    out = np.full(len(grid), np.nan)
    ok = idx >= 0
    out[ok] = rets[idx[ok]]
    return out


def curve_bands(reports, grid):
    """Per-grid-point (mean, min, max) across every agent of every report."""
    rows = []
    for rep in reports:
        for records in rep.episodes.values():
            if records:
                rows.append(sample_on_grid(*step_series(records), grid))
    if not rows:
        empty = np.full(len(grid), np.nan)
        return empty, empty, empty
    m = np.vstack(rows)
    have = ~np.isnan(m).all(axis=0)
    mean = np.full(len(grid), np.nan)
    lo = np.full(len(grid), np.nan)
    hi = np.full(len(grid), np.nan)
    mean[have] = np.nanmean(m[:, have], axis=0)
    lo[have] = np.nanmin(m[:, have], axis=0)
    hi[have] = np.nanmax(m[:, have], axis=0)
    return mean, lo, hi


def _frame(ax: Axes, xticks, yticks, xlabel, ylabel, title):
    out = [f'<rect x="{_num(ax.left)}" y="{_num(ax.top)}" width="{_num(ax.width)}" height="{_num(ax.height)}" '
           f'fill="none" stroke="#333"/>']
    bottom = ax.top + ax.height
    for t in xticks:
        x, _ = ax.px(t, ax.y_lo)
        out.append(f'<line x1="{_num(x)}" y1="{_num(bottom)}" x2="{_num(x)}" y2="{_num(bottom + 5)}" stroke="#333"/>')
        out.append(f'<text x="{_num(x)}" y="{_num(bottom + 18)}" text-anchor="middle">{_label(t)}</text>')
    for t in yticks:
        _, y = ax.px(ax.x_lo, t)
        out.append(f'<line x1="{_num(ax.left - 5)}" y1="{_num(y)}" x2="{_num(ax.left)}" y2="{_num(y)}" stroke="#333"/>')
        out.append(f'<text x="{_num(ax.left - 8)}" y="{_num(y + 4)}" text-anchor="end">{_label(t)}</text>')
    cx = ax.left + ax.width / 2
    out.append(f'<text x="{_num(cx)}" y="{_num(bottom + 36)}" text-anchor="middle">{escape(xlabel)}</text>')
    cy = ax.top + ax.height / 2
    out.append(f'<text x="{_num(ax.left - 52)}" y="{_num(cy)}" text-anchor="middle" '
               f'transform="rotate(-90 {_num(ax.left - 52)} {_num(cy)})">{escape(ylabel)}</text>')
    out.append(f'<text x="{_num(ax.left)}" y="{_num(ax.top - 10)}" font-weight="bold">{escape(title)}</text>')
    return out


def _group(reports):
    groups = {}
    for rep in reports:
        groups.setdefault(config_label(rep.config), []).append(rep)
    # vanilla first, then by explorer count
    return sorted(groups.items(), key=lambda kv: (not kv[1][0].config.vanilla, kv[1][0].config.n_explorers))


def render_svg(reports) -> str:
    reports = [r for r in reports if r.config is not None]
    groups = _group(reports)
    x_hi = max((r.config.steps for r in reports), default=0) or 1
    grid = np.linspace(0.0, float(x_hi), GRID_POINTS)
    bands = [(label, curve_bands(reps, grid)) for label, reps in groups]
    vals = np.concatenate([np.concatenate([lo, hi]) for _, (_, lo, hi) in bands]) if bands else np.zeros(0)
    vals = vals[np.isfinite(vals)]
    y_lo, y_hi = (float(vals.min()), float(vals.max())) if len(vals) else (0.0, 1.0)
    yticks, y_lo, y_hi = nice_ticks(y_lo, y_hi)
    xticks, _, _ = nice_ticks(0.0, float(x_hi))
    xticks = [t for t in xticks if t <= x_hi]
    ax = Axes(*CURVES, 0.0, float(x_hi), y_lo, y_hi)

    body = _frame(ax, xticks, yticks, "environment steps per agent", "episode return", "Episode return (mean, min-max band)")
    for k, (label, (mean, lo, hi)) in enumerate(bands):
        color = PALETTE[k % len(PALETTE)]
        ok = ~np.isnan(mean)
        if ok.any():
            gx, ylo = ax.px(grid[ok], lo[ok])
            _, yhi = ax.px(grid[ok], hi[ok])
            poly = _points(np.concatenate([gx, gx[::-1]]), np.concatenate([yhi, ylo[::-1]]))
            body.append(f'<polygon class="band" points="{poly}" fill="{color}" fill-opacity="0.18" stroke="none"/>')
            mx, my = ax.px(grid[ok], mean[ok])
            body.append(f'<polyline class="mean" data-label="{escape(label)}" points="{_points(mx, my)}" '
                        f'fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = ax.top + 16 + 18 * k
        lx = ax.left + ax.width - 150
        body.append(f'<line x1="{_num(lx)}" y1="{_num(ly - 4)}" x2="{_num(lx + 20)}" y2="{_num(ly - 4)}" '
                    f'stroke="{color}" stroke-width="3"/>')
        body.append(f'<text class="legend" x="{_num(lx + 26)}" y="{_num(ly)}">{escape(label)}</text>')

    body += _trace_panel(reports)
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">')
    return "\n".join([head, f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>', *body, "</svg>", ""])


def _trace_panel(reports):
    """Raw supervisor evaluation returns of the first run that has a supervisor."""
    trace = next((r.supervisor_trace for r in reports if r.supervisor_trace), [])
    rets = np.array([t.ret for t in trace], dtype=float)
    n = len(trace)
    y_lo, y_hi = (float(rets.min()), float(rets.max())) if n else (0.0, 1.0)
    yticks, y_lo, y_hi = nice_ticks(y_lo, y_hi, 3)
    xticks, _, x_hi = nice_ticks(0.0, float(max(n - 1, 1)))
    ax = Axes(*TRACE, 0.0, x_hi, y_lo, y_hi)
    out = _frame(ax, xticks, yticks, "supervisor episode", "return", "Supervisor evaluations (candidates vs. current best)")
    for kind, color in (("candidate", "#d62728"), ("best", "#1f77b4")):
        idx = np.array([i for i, t in enumerate(trace) if t.kind == kind], dtype=float)
        if len(idx) == 0:
            continue
        xs, ys = ax.px(idx, rets[idx.astype(int)])
        dots = "".join(f'<circle cx="{_num(x)}" cy="{_num(y)}" r="1.6"/>' for x, y in zip(xs, ys))
        out.append(f'<g class="trace-{kind}" fill="{color}">{dots}</g>')
    lx = ax.left + ax.width - 150
    for k, (kind, color) in enumerate((("candidate", "#d62728"), ("current best", "#1f77b4"))):
        ly = ax.top + 14 + 16 * k
        out.append(f'<circle cx="{_num(lx + 10)}" cy="{_num(ly - 4)}" r="3" fill="{color}"/>')
        out.append(f'<text class="legend" x="{_num(lx + 20)}" y="{_num(ly)}">{kind}</text>')
    return out


def emit_plot(reports, out_dir, name: str = "learning_curves.svg") -> Path:
    """Write the SVG for one report or a list of them; returns its path."""
    if not isinstance(reports, (list, tuple)):
        reports = [reports]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(render_svg(reports))
    return path
