"""Minimal hand-rolled SVG export.

Written directly rather than through a plotting library so identical inputs
produce identical bytes.
"""
from __future__ import annotations

import torch

from .motion import GroupMotion

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#7f7f7f")
_SIZE = 480
_PAD = 30


def _scale(points, size, pad):
    lo = points.min(dim=0).values
    hi = points.max(dim=0).values
    span = torch.clamp(hi - lo, min=1e-9)
    unit = (points - lo) / span
    return pad + unit * (size - 2 * pad)


def trajectory_svg(motion: GroupMotion) -> str:
    """Ground-plane (x-z) root paths, one polyline per dancer."""
    xz = motion.roots[..., (0, 2)]
    flat = _scale(xz.reshape(-1, 2), _SIZE, _PAD).reshape(xz.shape)
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" '
             f'height="{_SIZE}" viewBox="0 0 {_SIZE} {_SIZE}">',
             f'<rect width="{_SIZE}" height="{_SIZE}" fill="white"/>']
    for c in range(motion.dancers):
        pts = " ".join(f"{float(p[0]):.3f},{float(_SIZE - p[1]):.3f}" for p in flat[c])
        color = _COLORS[c % len(_COLORS)]
        lines.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        x0, y0 = float(flat[c, 0, 0]), float(_SIZE - flat[c, 0, 1])
        lines.append(f'<circle cx="{x0:.3f}" cy="{y0:.3f}" r="4" fill="{color}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def displacement_svg(motion: GroupMotion, seam_frames=()) -> str:
    """Per-frame root displacement per dancer, with seams marked as vertical rules."""
    roots = motion.roots
    disp = torch.linalg.vector_norm(roots[:, 1:] - roots[:, :-1], dim=-1)
    n = disp.shape[1]
    top = max(float(disp.max()), 1e-9)
    w, h = _SIZE, _SIZE // 2
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
             f'viewBox="0 0 {w} {h}">',
             f'<rect width="{w}" height="{h}" fill="white"/>']
    for f in seam_frames:
        x = _PAD + (f - 1) / max(n - 1, 1) * (w - 2 * _PAD)
        lines.append(f'<line x1="{x:.3f}" y1="{_PAD}" x2="{x:.3f}" y2="{h - _PAD}" '
                     f'stroke="#bbbbbb" stroke-dasharray="4,3"/>')
    for c in range(motion.dancers):
        pts = []
        for i in range(n):
            x = _PAD + i / max(n - 1, 1) * (w - 2 * _PAD)
            y = h - _PAD - float(disp[c, i]) / top * (h - 2 * _PAD)
            pts.append(f"{x:.3f},{y:.3f}")
        color = _COLORS[c % len(_COLORS)]
        lines.append(f'<polyline points="{" ".join(pts)}" fill="none" '
                     f'stroke="{color}" stroke-width="1.2"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_svg(path, content: str) -> None:
    with open(path, "w", encoding="ascii") as f:
        f.write(content)
