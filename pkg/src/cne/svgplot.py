"""Deterministic standalone SVG scatter plots of 2-D embeddings."""

from __future__ import annotations

import numpy as np

from .errors import CneError

WIDTH = 640
HEIGHT = 480
MARGIN = 0.05
RADIUS = 2
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)
UNLABELED = "#808080"


def _axis_map(values, span):
    lo, hi = float(values.min()), float(values.max())
    pad = span * MARGIN
    usable = span - 2 * pad
    if hi == lo:
        return lambda v: span / 2.0
    scale = usable / (hi - lo)
    return lambda v: pad + (v - lo) * scale


def render_svg(coords, labels=None) -> str:
    coords = np.asarray(coords, dtype=np.float64)
    if coords.size == 0:
        raise CneError("cannot plot an empty embedding")
    if coords.ndim != 2 or coords.shape[1] < 2:
        raise CneError("plotting requires at least 2 embedding dimensions")
    mx = _axis_map(coords[:, 0], WIDTH)
    my = _axis_map(coords[:, 1], HEIGHT)
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
    ]
    for i in range(coords.shape[0]):
        fill = UNLABELED if labels is None else PALETTE[int(labels[i]) % len(PALETTE)]
        cx = mx(coords[i, 0])
        cy = HEIGHT - my(coords[i, 1])  # SVG y axis points down
        lines.append(f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="{RADIUS}" fill="{fill}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def emit_svg(emb, labels, path) -> None:
    """Write a scatter plot of the embedding, colored by label when present."""
    coords = emb.coords if hasattr(emb, "coords") else emb
    text = render_svg(coords, labels)
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise CneError(f"cannot write SVG to {path}: {exc}") from exc
