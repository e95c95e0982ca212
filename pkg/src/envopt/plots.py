"""Static SVG figures: metric curves with std bands, time-coloured trajectories,
and before/after layout panels. No plotting library needed."""
from __future__ import annotations

import os
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#ff7f0e", "#8c564b")


def _svg(width, height, body: list[str]) -> str:
    head = f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">'
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *body, "</svg>\n"])


def time_color(frac: float) -> str:
    """Red at the start of an episode, yellow at the end."""
    g = int(round(255 * min(max(frac, 0.0), 1.0)))
    return f"#ff{g:02x}00"


def metric_curves_svg(reports: dict, metric: str, width=420, height=300) -> str:
    """One line per source over ``m_obstacles`` with a +-1 std band."""
    series = {}
    for name, rep in reports.items():
        pts = sorted((r["m_obstacles"], r["mean"], r["std"]) for r in rep.rows if r["metric"] == metric)
        if pts:
            series[name] = np.array(pts, float)
    ml, mr, mt, mb = 50, 110, 20, 40
    if not series:
        return _svg(width, height, [])
    allx = np.concatenate([s[:, 0] for s in series.values()])
    lo = min(0.0, min((s[:, 1] - s[:, 2]).min() for s in series.values()))
    hi = max((s[:, 1] + s[:, 2]).max() for s in series.values())
    hi = max(hi, 1.0) if metric in ("spl", "pct_speed", "success_rate") else (hi if hi > lo else lo + 1.0)
    x0, x1 = allx.min(), allx.max() if allx.max() > allx.min() else allx.min() + 1

    def X(x):
        return ml + (x - x0) / (x1 - x0) * (width - ml - mr)

    def Y(y):
        return height - mb - (y - lo) / (hi - lo) * (height - mt - mb)

    body = [
        f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>',
        f'<text x="{(width - mr + ml) / 2}" y="{height - 8}" text-anchor="middle" font-size="12">obstacles</text>',
        f'<text x="12" y="{mt + 10}" font-size="12">{escape(metric)}</text>',
    ]
    for x in np.unique(allx):
        body.append(f'<text x="{X(x):.1f}" y="{height - mb + 14}" text-anchor="middle" font-size="10">{x:g}</text>')
    for v in np.linspace(lo, hi, 5):
        body.append(f'<text x="{ml - 4}" y="{Y(v) + 3:.1f}" text-anchor="end" font-size="10">{v:.2f}</text>')
    for k, (name, s) in enumerate(series.items()):
        c = PALETTE[k % len(PALETTE)]
        upper = [f"{X(x):.2f},{Y(m + sd):.2f}" for x, m, sd in s]
        lower = [f"{X(x):.2f},{Y(m - sd):.2f}" for x, m, sd in s[::-1]]
        body.append(f'<polygon class="band" points="{" ".join(upper + lower)}" fill="{c}" fill-opacity="0.2" stroke="none"/>')
        line = " ".join(f"{X(x):.2f},{Y(m):.2f}" for x, m, _ in s)
        body.append(f'<polyline class="mean" points="{line}" fill="none" stroke="{c}" stroke-width="2"/>')
        body.append(f'<text x="{width - mr + 8}" y="{mt + 16 * (k + 1)}" font-size="11" fill="{c}">{escape(name)}</text>')
    return _svg(width, height, body)


def _scene(trace, bounds, ox, oy, scale, obstacle_frames=("first",)) -> list[str]:
    (bx0, by0), (bx1, by1) = bounds
    H = (by1 - by0) * scale

    def P(x, y):
        return ox + (x - bx0) * scale, oy + H - (y - by0) * scale

    out = [f'<rect x="{ox}" y="{oy}" width="{(bx1 - bx0) * scale}" height="{H}" fill="none" stroke="black"/>']
    if trace is None:
        return out
    T = trace.positions.shape[0]
    frames = {"first": 0, "last": T - 1}
    for which in obstacle_frames:
        for r in trace.obstacles[frames[which]]:
            x, y = P(r[0], r[3])
            dash = ' stroke-dasharray="3,2"' if which == "first" and len(obstacle_frames) > 1 else ""
            out.append(f'<rect class="obstacle" x="{x:.2f}" y="{y:.2f}" width="{(r[2] - r[0]) * scale:.2f}" '
                       f'height="{(r[3] - r[1]) * scale:.2f}" fill="#999" fill-opacity="0.5" stroke="black"{dash}/>')
    for i in range(trace.n_agents):
        pts = [P(*p) for p in trace.positions[:, i]]
        out.append('<polyline class="trajectory" points="' + " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
                   + '" fill="none" stroke="#ddd" stroke-width="1"/>')
        for t in range(T - 1):
            (xa, ya), (xb, yb) = pts[t], pts[t + 1]
            out.append(f'<line x1="{xa:.2f}" y1="{ya:.2f}" x2="{xb:.2f}" y2="{yb:.2f}" '
                       f'stroke="{time_color(t / max(T - 2, 1))}" stroke-width="2"/>')
        gx, gy = P(*trace.goals[i])
        out.append(f'<circle cx="{gx:.2f}" cy="{gy:.2f}" r="{0.1 * scale:.2f}" fill="none" stroke="green"/>')
    return out


def trajectory_svg(trace, bounds, scale=40) -> str:
    """Agent paths coloured red -> yellow over time, obstacles at start and end."""
    (bx0, by0), (bx1, by1) = bounds
    pad = 10
    moving = trace.obstacles.shape[0] > 1 and not np.allclose(trace.obstacles[0], trace.obstacles[-1])
    frames = ("first", "last") if moving else ("first",)
    body = _scene(trace, bounds, pad, pad, scale, frames)
    return _svg(int((bx1 - bx0) * scale + 2 * pad), int((by1 - by0) * scale + 2 * pad), body)


def before_after_svg(before, after, bounds, scale=40) -> str:
    """Two panels: navigation before and after the layout was optimized."""
    (bx0, by0), (bx1, by1) = bounds
    pad, w, h = 10, (bx1 - bx0) * scale, (by1 - by0) * scale
    body = _scene(before, bounds, pad, pad + 16, scale)
    body += _scene(after, bounds, 2 * pad + w, pad + 16, scale)
    body.append(f'<text x="{pad + w / 2}" y="{pad + 8}" text-anchor="middle" font-size="12">before</text>')
    body.append(f'<text x="{2 * pad + 1.5 * w}" y="{pad + 8}" text-anchor="middle" font-size="12">after</text>')
    return _svg(int(2 * w + 3 * pad), int(h + 2 * pad + 16), body)


def render_plots(reports: dict, traces, out_dir, bounds=None, pairs=()) -> list[str]:
    """Write metric curves for every metric present, one trajectory figure per
    trace and one before/after figure per ``(before, after)`` trace pair."""
    if not reports and not traces and not pairs:
        raise ValueError("nothing to plot")
    os.makedirs(out_dir, exist_ok=True)
    files = []
    metrics = sorted({r["metric"] for rep in reports.values() for r in rep.rows})
    for m in metrics:
        path = os.path.join(out_dir, f"curve_{m}.svg")
        with open(path, "w") as fh:
            fh.write(metric_curves_svg(reports, m))
        files.append(path)
    for k, tr in enumerate(traces):
        b = bounds or _trace_bounds(tr)
        path = os.path.join(out_dir, f"trajectory_{k:03d}.svg")
        with open(path, "w") as fh:
            fh.write(trajectory_svg(tr, b))
        files.append(path)
    for k, (before, after) in enumerate(pairs):
        b = bounds or _trace_bounds(before)
        path = os.path.join(out_dir, f"before_after_{k:03d}.svg")
        with open(path, "w") as fh:
            fh.write(before_after_svg(before, after, b))
        files.append(path)
    return files


def _trace_bounds(trace):
    pts = np.concatenate([trace.positions.reshape(-1, 2), trace.obstacles[..., :2].reshape(-1, 2),
                          trace.obstacles[..., 2:].reshape(-1, 2)])
    lo = np.floor(pts.min(0))
    hi = np.ceil(pts.max(0))
    return (tuple(np.minimum(lo, 0)), tuple(hi))
