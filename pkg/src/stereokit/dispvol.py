"""Disparity probability volumes and the stereoscopic image formation model.

A volume is an ``(N + 1, H, W)`` array: per-pixel logits, or per-pixel
categorical distributions over the ``N + 1`` disparity planes of a
:class:`QuantSchedule`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .imgio import GridError, as_floatmap, as_image, check_same_shape

LEFT = "left"
RIGHT = "right"

# sample offset applied to the disparity: content moving left samples x + d
_STEP = {LEFT: 1.0, RIGHT: -1.0}


@dataclass(frozen=True)
class QuantSchedule:
    """Exponentially spaced disparity planes ``d_0 = d_min ... d_N = d_max``."""

    d_min: float
    d_max: float
    n: int
    d: np.ndarray = field(repr=False, compare=False)

    @property
    def n_planes(self) -> int:
        return self.n + 1


def make_schedule(d_min: float = 2.0, d_max: float = 300.0, n: int = 48) -> QuantSchedule:
    """Plane disparities ``d_max * exp(ln(d_max / d_min) * (k / n - 1))`` for k = 0..n."""
    if not (0 < d_min < d_max):
        raise GridError(f"schedule needs 0 < d_min < d_max, got d_min={d_min}, d_max={d_max}")
    if int(n) != n or n < 1:
        raise GridError(f"schedule needs N >= 1, got {n}")
    n = int(n)
    k = np.arange(n + 1, dtype=np.float64)
    d = d_max * np.exp(np.log(d_max / d_min) * (k / n - 1.0))
    d.setflags(write=False)
    return QuantSchedule(float(d_min), float(d_max), n, d)


def _as_volume(vol) -> np.ndarray:
    vol = np.asarray(vol, dtype=np.float64)
    if vol.ndim != 3:
        raise GridError(f"volume must be (planes, H, W), got shape {vol.shape}")
    if not np.all(np.isfinite(vol)):
        raise GridError("volume contains non-finite values")
    return vol


def check_probabilities(probs, atol: float = 1e-5) -> np.ndarray:
    probs = _as_volume(probs)
    if np.any(probs < 0) or not np.allclose(probs.sum(axis=0), 1.0, atol=atol, rtol=0):
        raise GridError("volume is not a per-pixel probability distribution")
    return probs


def _check_planes(vol, sched: QuantSchedule):
    if vol.shape[0] != sched.n_planes:
        raise GridError(f"plane count mismatch: volume has {vol.shape[0]}, schedule has {sched.n_planes}")


def softmax_volume(logits) -> np.ndarray:
    """Channel-wise softmax over the plane axis (max-subtracted)."""
    logits = _as_volume(logits)
    z = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=0, keepdims=True)


def warp_horizontal(src, disp, sign: str = LEFT):
    """Backward-warp ``src`` horizontally by a per-pixel disparity.

    ``sign="left"`` moves content left (samples ``src`` at ``x + disp``), as
    when synthesising the right view from the left image. ``sign="right"``
    samples at ``x - disp``, as when reconstructing the left view from the
    right image. Interpolation is linear between the two neighbouring
    columns. Samples outside ``[0, W - 1]`` are 0 and invalid.

    Returns ``(warped, valid)`` with ``warped`` shaped like ``src``.
    """
    if sign not in _STEP:
        raise GridError(f"sign must be 'left' or 'right', got {sign!r}")
    src_arr = np.asarray(src, dtype=np.float64)
    is_map = src_arr.ndim == 2
    src3 = src_arr[:, :, None] if is_map else src_arr
    if src3.ndim != 3:
        raise GridError(f"warp source must be HxW or HxWxC, got shape {src_arr.shape}")
    disp = as_floatmap(disp)
    check_same_shape(src3, disp, names=("src", "disp"))
    out, valid = _kernels.warp_rows(src3, disp, _STEP[sign])
    if is_map:
        out = out[:, :, 0]
    return out, valid


def shift_constant(src, d: float, sign: str = LEFT):
    """``warp_horizontal`` with the same disparity ``d`` at every pixel."""
    src = np.asarray(src, dtype=np.float64)
    return warp_horizontal(src, np.full(src.shape[:2], float(d)), sign)


def project_logits_to_right(logits, sched: QuantSchedule) -> np.ndarray:
    """Shift logit plane ``n`` left by ``d_n`` pixels, then softmax across planes.

    Logits shifted in from outside the frame are 0; the softmax runs over
    all planes regardless.
    """
    logits = _as_volume(logits)
    _check_planes(logits, sched)
    shifted = np.empty_like(logits)
    for k, d in enumerate(sched.d):
        shifted[k], _ = shift_constant(logits[k], d, LEFT)
    return softmax_volume(shifted)


def synthesize_right(img_left, probs_right, sched: QuantSchedule) -> np.ndarray:
    """Right view as the probability-weighted sum of left-shifted left images."""
    img = as_image(img_left)
    probs = _as_volume(probs_right)
    _check_planes(probs, sched)
    check_same_shape(img, probs[0], names=("img_left", "probs_right"))
    out = np.zeros_like(img)
    for k, d in enumerate(sched.d):
        shifted, _ = shift_constant(img, d, LEFT)
        out += shifted * probs[k][:, :, None]
    return np.clip(out, 0.0, 1.0)


def extract_disparity(probs_left, sched: QuantSchedule) -> np.ndarray:
    """Expected plane disparity per pixel."""
    probs = _as_volume(probs_left)
    _check_planes(probs, sched)
    disp = np.zeros(probs.shape[1:])
    for k, d in enumerate(sched.d):
        disp += d * probs[k]
    return np.clip(disp, sched.d_min, sched.d_max)


def postprocess_flip(disp_plain, disp_from_flipped) -> np.ndarray:
    """Fuse a prediction with the re-flipped prediction of the flipped input (plain mean)."""
    a = as_floatmap(disp_plain)
    b = as_floatmap(disp_from_flipped)
    check_same_shape(a, b, names=("disp_plain", "disp_from_flipped"))
    return 0.5 * (a + b)
