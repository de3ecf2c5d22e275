"""Deterministic SVG plots of a scene and its predicted modes.

Output is built as plain text with fixed number formatting, so identical
inputs give byte-identical files.
"""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .synthworld import Scene

PANEL = 420          # panel side in px
LEGEND = 150         # legend width in px
MARGIN = 8.0         # metres of padding around the plotted content
PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173", "#3182bd",
    "#e6550d", "#31a354", "#756bb1", "#636363",
]
LANE, OBSERVED, TRUTH, CONTEXT = "#c8c8c8", "#000000", "#00a000", "#9a9a9a"


def _fmt(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


class _Frame:
    """World metres -> panel pixels, equal aspect, y pointing up."""

    def __init__(self, pts: np.ndarray, x0: float):
        lo, hi = pts.min(axis=0) - MARGIN, pts.max(axis=0) + MARGIN
        self.span = float(max(hi - lo))
        self.center = (lo + hi) / 2
        self.x0 = x0

    def __call__(self, p: np.ndarray) -> np.ndarray:
        s = PANEL / self.span
        x = self.x0 + (p[..., 0] - self.center[0]) * s + PANEL / 2
        y = PANEL / 2 - (p[..., 1] - self.center[1]) * s
        return np.stack([x, y], axis=-1)


def _polyline(frame: _Frame, pts: np.ndarray, color: str, width: float, extra: str = "") -> str:
    xy = frame(np.asarray(pts, float))
    coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in xy)
    return (f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="{width}"'
            f' stroke-linejoin="round"{extra}/>')


def _panel(scene: Scene, modes: np.ndarray, probs: np.ndarray, title: str, x0: float, clip_id: str) -> list[str]:
    target = scene.target
    obs = target.positions[target.valid]
    content = [obs, scene.gt, modes.reshape(-1, 2)]
    frame = _Frame(np.concatenate(content), x0)
    out = [f'<clipPath id="{clip_id}"><rect x="{_fmt(x0)}" y="0" width="{PANEL}" height="{PANEL}"/></clipPath>',
           f'<g clip-path="url(#{clip_id})">',
           f'<rect x="{_fmt(x0)}" y="0" width="{PANEL}" height="{PANEL}" fill="#ffffff" stroke="#444444"/>']
    if scene.map is not None:
        for seg in scene.map.segments:
            out.append(_polyline(frame, seg.centerline, LANE, 1.5))
    for track in scene.tracks:
        if track.id != scene.target_id and track.valid.sum() > 1:
            out.append(_polyline(frame, track.positions[track.valid], CONTEXT, 1.0))
    order = np.argsort(-probs, kind="stable")
    for k in order[::-1]:
        color = PALETTE[int(k) % len(PALETTE)]
        out.append(_polyline(frame, np.concatenate([obs[-1:], modes[k]]), color, 1.5, ' opacity="0.85"'))
    out.append(_polyline(frame, obs, OBSERVED, 2.5))
    out.append(_polyline(frame, np.concatenate([obs[-1:], scene.gt]), TRUTH, 2.5, ' stroke-dasharray="5,3"'))
    out.append("</g>")
    out.append(f'<text x="{_fmt(x0 + 6)}" y="16" font-family="monospace" font-size="12">{title}</text>')
    # legend, most probable first
    lx = x0 + PANEL + 10
    out.append(f'<text x="{_fmt(lx)}" y="16" font-family="monospace" font-size="11">mode  prob</text>')
    rows = [("observed", OBSERVED), ("truth", TRUTH)] + [
        (f"{int(k):>2}  {probs[k]:.3f}", PALETTE[int(k) % len(PALETTE)]) for k in order]
    for i, (label, color) in enumerate(rows):
        y = 32 + 14 * i
        out.append(f'<line x1="{_fmt(lx)}" y1="{y - 4}" x2="{_fmt(lx + 18)}" y2="{y - 4}" stroke="{color}"'
                   f' stroke-width="3"/>')
        out.append(f'<text x="{_fmt(lx + 24)}" y="{y}" font-family="monospace" font-size="11">{label}</text>')
    return out


def _check(scene: Scene, predictions: Mapping[int, tuple[np.ndarray, np.ndarray]]):
    if scene.target_id not in predictions:
        raise KeyError(f"no prediction for target agent {scene.target_id}")
    modes, probs = predictions[scene.target_id]
    modes, probs = np.asarray(modes, float), np.asarray(probs, float)
    if modes.ndim != 3 or modes.shape[-1] != 2 or probs.shape != modes.shape[:1]:
        raise ValueError(f"modes must be (K, T, 2) with matching probs, got {modes.shape} / {probs.shape}")
    return modes, probs


def render_scene(scene: Scene, predictions: Mapping[int, tuple[np.ndarray, np.ndarray]],
                 title: str = "") -> str:
    """SVG text for one scene. ``predictions[agent_id] = (modes (K,T,2) in world frame, probs (K,))``."""
    return render_panels(scene, [(title, predictions)])


def render_panels(scene: Scene, panels: Sequence[tuple[str, Mapping[int, tuple[np.ndarray, np.ndarray]]]]) -> str:
    """Several prediction sets for the same scene side by side (e.g. 6 vs 20 modes)."""
    width = len(panels) * (PANEL + LEGEND)
    body = []
    for i, (title, preds) in enumerate(panels):
        modes, probs = _check(scene, preds)
        body += _panel(scene, modes, probs, title, i * (PANEL + LEGEND), f"p{i}")
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL}"'
            f' viewBox="0 0 {width} {PANEL}">')
    return "\n".join([head, f'<rect width="{width}" height="{PANEL}" fill="#ffffff"/>', *body, "</svg>"]) + "\n"


def write_svg(text: str, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path
