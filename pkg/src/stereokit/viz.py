"""Deterministic false-colour rendering of float maps."""
from __future__ import annotations

import cv2
import numpy as np

from .imgio import GridError, as_floatmap, atomic_write_bytes

# Piecewise-linear dark-to-bright map: black-purple -> magenta -> orange -> pale yellow.
COLORMAP_ANCHORS = np.array([
    [0, 0, 4],
    [87, 16, 110],
    [188, 55, 84],
    [249, 142, 9],
    [252, 255, 164],
], dtype=np.float64)


def colorize(fmap) -> np.ndarray:
    """Min-max normalise and map through :data:`COLORMAP_ANCHORS`; returns uint8 RGB."""
    fmap = as_floatmap(fmap)
    lo, hi = fmap.min(), fmap.max()
    t = (fmap - lo) / (hi - lo) if hi > lo else np.zeros_like(fmap)
    pos = t * (len(COLORMAP_ANCHORS) - 1)
    i0 = np.clip(np.floor(pos).astype(int), 0, len(COLORMAP_ANCHORS) - 2)
    frac = (pos - i0)[..., None]
    rgb = COLORMAP_ANCHORS[i0] * (1 - frac) + COLORMAP_ANCHORS[i0 + 1] * frac
    return np.round(rgb).astype(np.uint8)


def emit_visualization(fmap, path) -> None:
    rgb = colorize(fmap)
    ok, buf = cv2.imencode(".png", np.ascontiguousarray(rgb[:, :, ::-1]))
    if not ok:
        raise GridError(f"PNG encoding failed for {path}")
    try:
        atomic_write_bytes(path, buf.tobytes())
    except OSError as exc:
        raise GridError(f"cannot write {path}: {exc}") from exc
