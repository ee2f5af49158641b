"""Deterministic SVG rendering of environments, webs, walks, solutions."""

from __future__ import annotations

from .geometry import Environment

_COLORS = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.3f}"


class _Canvas:
    def __init__(self, env: Environment, size: int):
        minx, miny, maxx, maxy = env.shape.bounds
        span = max(maxx - minx, maxy - miny)
        self.pad = 0.05 * span
        self.scale = size / (span + 2 * self.pad)
        self.minx = minx
        self.maxy = maxy
        self.w = (maxx - minx + 2 * self.pad) * self.scale
        self.h = (maxy - miny + 2 * self.pad) * self.scale

    def pt(self, p) -> str:
        x = (p[0] - self.minx + self.pad) * self.scale
        y = (self.maxy - p[1] + self.pad) * self.scale
        return f"{_fmt(x)},{_fmt(y)}"


def render_svg(
    env: Environment,
    *,
    solution=None,
    web=None,
    walk=None,
    size: int = 640,
) -> str:
    """Render to an SVG string; identical inputs give identical bytes."""
    c = _Canvas(env, size)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(c.w)}"'
        f' height="{_fmt(c.h)}" viewBox="0 0 {_fmt(c.w)} {_fmt(c.h)}">',
        f'<rect width="{_fmt(c.w)}" height="{_fmt(c.h)}" fill="white"/>',
    ]
    outer = " ".join(c.pt(p) for p in env.outer)
    parts.append(
        f'<polygon points="{outer}" fill="#f0f0f0" stroke="#222" stroke-width="1.5"/>'
    )
    for ring in env.holes:
        pts = " ".join(c.pt(p) for p in ring)
        parts.append(
            f'<polygon points="{pts}" fill="#c8c8c8" stroke="#222" stroke-width="1.5"/>'
        )
    if walk is not None:
        pts = " ".join(c.pt(walk.points[i]) for i in walk.indices)
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="#999"'
            ' stroke-width="0.8" stroke-dasharray="4 3"/>'
        )
    if web is not None:
        for p in web.initial_points:
            parts.append(
                f'<circle cx="{c.pt(p).split(",")[0]}" cy="{c.pt(p).split(",")[1]}"'
                ' r="4" fill="#1f77b4"/>'
            )
        for p in web.intersection_points:
            parts.append(
                f'<circle cx="{c.pt(p).split(",")[0]}" cy="{c.pt(p).split(",")[1]}"'
                ' r="4" fill="#ff7f0e"/>'
            )
    if solution is not None:
        waypoints = solution.waypoints
        n = waypoints[0].n
        for i in range(n):
            color = _COLORS[i % len(_COLORS)]
            pts = " ".join(c.pt(w.positions[i]) for w in waypoints)
            parts.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>'
            )
            for k, w in enumerate(waypoints):
                x, y = c.pt(w.positions[i]).split(",")
                r = "5" if k in (0, len(waypoints) - 1) else "3"
                parts.append(f'<circle cx="{x}" cy="{y}" r="{r}" fill="{color}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
