"""Self-contained SVG overlays: road polylines, recorded and predicted
trajectories, bounding boxes at the final step, and a velocity strip."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import rect_corners

_CLASS_STYLE = {
    "lane-center": ("#b9c2cc", "4 4"),
    "lane-boundary": ("#d3d8de", "2 5"),
    "road-edge": ("#7d858e", None),
    "crosswalk": ("#c9a227", "2 2"),
    "double-yellow": ("#d9b310", None),
    "other": ("#cccccc", "1 3"),
}

_CLASS_ORDER = ("lane-center", "lane-boundary", "road-edge",
                "crosswalk", "double-yellow", "other")


def _agent_color(i: int, ego: bool) -> str:
    if ego:
        return "#d0342c"
    palette = ("#2d6cb5", "#2f9e44", "#9c36b5", "#e8710a", "#12837a", "#6b5b95")
    return palette[i % len(palette)]


class _Frame:
    def __init__(self, xmin, xmax, ymin, ymax, width=820.0, pad=6.0):
        self.xmin, self.ymin = xmin - pad, ymin - pad
        self.scale = width / max(xmax - xmin + 2 * pad, 1e-6)
        self.width = width
        self.height = (ymax - ymin + 2 * pad) * self.scale

    def pt(self, x, y) -> str:
        sx = (x - self.xmin) * self.scale
        sy = self.height - (y - self.ymin) * self.scale
        return f"{sx:.1f},{sy:.1f}"


def _polyline(frame, xy, color, width=1.5, dash=None, opacity=1.0) -> str:
    pts = " ".join(frame.pt(x, y) for x, y in xy)
    d = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{width}"{d} opacity="{opacity:.2f}"/>')


def scenario_svg(scenario, predicted=None, plan=None, title: str = "") -> str:
    """Render a scene. predicted is an optional (I, T, 5) rollout starting
    at k=0; plan is an optional PlanResult (takes precedence for overlays).
    """
    sc = scenario
    t0 = sc.t_of(0)
    xs, ys = [], []
    rg = sc.roadgraph
    for li in range(rg.num_polylines):
        pts = rg.features[li][rg.mask[li]][:, :2]
        xs += pts[:, 0].tolist()
        ys += pts[:, 1].tolist()
    for tr in sc.tracks:
        pts = tr.states[tr.valid][:, :2]
        xs += pts[:, 0].tolist()
        ys += pts[:, 1].tolist()
    frame = _Frame(min(xs), max(xs), min(ys), max(ys))
    strip_h = 130.0
    total_h = frame.height + strip_h
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{frame.width:.0f}" '
        f'height="{total_h:.0f}" viewBox="0 0 {frame.width:.0f} {total_h:.0f}">',
        f'<rect width="{frame.width:.0f}" height="{total_h:.0f}" fill="#fafbfc"/>',
    ]
    if title:
        parts.append(f'<text x="10" y="16" font-size="13" fill="#333" '
                     f'font-family="sans-serif">{title}</text>')
    for li in range(rg.num_polylines):
        feat = rg.features[li][rg.mask[li]]
        cls = _CLASS_ORDER[int(np.argmax(feat[0, 8:14]))]
        color, dash = _CLASS_STYLE[cls]
        parts.append(_polyline(frame, feat[:, :2], color, 1.2, dash))

    overlays = {}
    if plan is not None:
        overlays[sc.ego_index] = plan.ego_states
        for j, idx in enumerate(plan.agent_indices):
            overlays[idx] = plan.agent_states[j]
    elif predicted is not None:
        overlays = {i: predicted[i] for i in range(len(sc.tracks))}

    for i, tr in enumerate(sc.tracks):
        color = _agent_color(i, i == sc.ego_index)
        rec = tr.states[tr.valid][:, :2]
        parts.append(_polyline(frame, rec, color, 1.2, dash="5 4", opacity=0.55))
        traj = overlays.get(i)
        if traj is not None:
            parts.append(_polyline(frame, traj[:, :2], color, 2.2))
            box_state = traj[-1]
        else:
            box_state = tr.states[tr.valid][-1]
        for state, op in ((tr.states[t0], 0.9), (box_state, 0.5)):
            corners = rect_corners(state, tr.extent)
            pts = " ".join(frame.pt(x, y) for x, y in corners)
            parts.append(f'<polygon points="{pts}" fill="{color}" opacity="{op:.2f}"/>')

    # velocity strip
    y0 = frame.height + 14.0
    parts.append(f'<text x="10" y="{y0:.0f}" font-size="11" fill="#555" '
                 f'font-family="sans-serif">speed [m/s] over steps</text>')
    profiles = {}
    for i, tr in enumerate(sc.tracks):
        traj = overlays.get(i)
        profiles[i] = (traj[:, 4] if traj is not None
                       else tr.states[tr.valid][:, 4])
    vmax = max(1.0, max(float(np.max(v)) for v in profiles.values()))
    steps = max(len(v) for v in profiles.values())
    for i, v in profiles.items():
        color = _agent_color(i, i == sc.ego_index)
        pts = []
        for k, val in enumerate(v):
            px = 10 + (frame.width - 20) * k / max(steps - 1, 1)
            py = y0 + 8 + (strip_h - 40) * (1.0 - val / vmax)
            pts.append(f"{px:.1f},{py:.1f}")
        parts.append(f'<polyline points="{" ".join(pts)}" fill="none" '
                     f'stroke="{color}" stroke-width="1.6"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_svg(svg: str, path):
    Path(path).write_text(svg, encoding="utf-8")
