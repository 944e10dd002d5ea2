"""Photometric, perceptual, smoothness, deep-autocorrelation and distilled-matting losses.

Every loss is a pure reduction returning a Python float. Feature maps are
``(C, H, W)`` arrays produced by an external extractor; :func:`random_features`
is a fixed-seed stand-in so the pipeline runs self-contained.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import _kernels
from .imgio import GridError, as_floatmap, as_image, as_mask, check_same_shape


@dataclass(frozen=True)
class LossWeights:
    alpha_p: float = 0.01
    alpha_ds: float = 0.0004
    alpha_dm: float = 0.25
    alpha_dc: float = 0.01

    def __post_init__(self):
        for name in ("alpha_p", "alpha_ds", "alpha_dm", "alpha_dc"):
            if getattr(self, name) < 0:
                raise GridError(f"{name} must be >= 0")


def _as_feats(f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.ndim == 2:
        f = f[None]
    if f.ndim != 3:
        raise GridError(f"feature map must be (C, H, W), got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise GridError("feature map contains non-finite values")
    return f


def _as_grid(g) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if g.ndim == 2:
        g = g[:, :, None]
    if g.ndim != 3 or not np.all(np.isfinite(g)):
        raise GridError(f"expected a finite HxW or HxWxC grid, got shape {g.shape}")
    return g


def loss_l1(pred, target, valid=None) -> float:
    """Mean absolute error over valid pixels and all channels; 0 with no valid pixel.

    Inputs are not clamped, so unclipped syntheses can be scored as well.
    """
    pred = _as_grid(pred)
    target = _as_grid(target)
    check_same_shape(pred, target, names=("pred", "target"))
    if pred.shape != target.shape:
        raise GridError(f"channel mismatch: {pred.shape} vs {target.shape}")
    valid = np.ones(pred.shape[:2], bool) if valid is None else as_mask(valid)
    check_same_shape(pred, valid, names=("pred", "valid"))
    if not valid.any():
        return 0.0
    return float(np.abs(pred - target)[valid].mean())


def loss_perceptual(pred_feats, target_feats) -> float:
    """Mean over levels of the per-level mean absolute feature difference."""
    if len(pred_feats) != len(target_feats) or not pred_feats:
        raise GridError(f"feature level count mismatch: {len(pred_feats)} vs {len(target_feats)}")
    per_level = []
    for a, b in zip(pred_feats, target_feats):
        a, b = _as_feats(a), _as_feats(b)
        if a.shape != b.shape:
            raise GridError(f"feature shape mismatch: {a.shape} vs {b.shape}")
        per_level.append(np.abs(a - b).mean())
    return float(np.mean(per_level))


def loss_smoothness(disp, guide) -> float:
    """Edge-aware first-order smoothness of the mean-normalised disparity."""
    disp = as_floatmap(disp)
    guide = as_image(guide)
    check_same_shape(disp, guide, names=("disp", "guide"))
    mean = disp.mean()
    dn = disp / mean if mean != 0 else disp
    gx = np.abs(np.diff(guide, axis=1)).mean(axis=2)
    gy = np.abs(np.diff(guide, axis=0)).mean(axis=2)
    sx = np.abs(np.diff(dn, axis=1)) * np.exp(-gx)
    sy = np.abs(np.diff(dn, axis=0)) * np.exp(-gy)
    total = 0.0
    if sx.size:
        total += sx.mean()
    if sy.size:
        total += sy.mean()
    return float(total)


def autocorr(feats, k: int = 3) -> np.ndarray:
    """Cosine auto-correlation over a k x k window: ``(k*k, H, W)``, zero where the offset leaves the map."""
    if k < 1 or k % 2 == 0:
        raise GridError(f"autocorrelation window must be odd and >= 1, got {k}")
    return _kernels.autocorr(_as_feats(feats), k)


def loss_deep_corr(feats_disp, feats_img, k: int = 3) -> float:
    a, b = _as_feats(feats_disp), _as_feats(feats_img)
    if a.shape[1:] != b.shape[1:]:
        raise GridError(f"spatial shape mismatch: {a.shape[1:]} vs {b.shape[1:]}")
    return float(np.abs(autocorr(a, k) - autocorr(b, k)).mean())


def loss_distilled_matting(disp, matted, mask) -> float:
    """Masked mean |disp - matted|, normalised by the maximum predicted disparity."""
    disp = as_floatmap(disp)
    matted = as_floatmap(matted)
    mask = as_mask(mask)
    check_same_shape(disp, matted, mask, names=("disp", "matted", "mask"))
    peak = disp.max()
    if peak <= 0:
        raise GridError(f"max(disp) must be > 0, got {peak}")
    return float((mask * np.abs(disp - matted)).mean() / peak)


def stage1_total(l1, lp, lds, weights: LossWeights = LossWeights()) -> float:
    return l1 + weights.alpha_p * lp + weights.alpha_ds * lds


def stage2_total(ls1, ldm, ldc, lm=0.0, weights: LossWeights = LossWeights()) -> float:
    """Second-stage loss; ``lm`` (mirror loss) is computed elsewhere and passed in."""
    return ls1 + lm + weights.alpha_dm * ldm + weights.alpha_dc * ldc


def two_view_total(left, right) -> float:
    return (left + right) / 2


# --------------------------------------------------------------------------
# fixed random feature extractor
# --------------------------------------------------------------------------

def _conv3x3_s2(x, weight, bias):
    c, h, w = x.shape
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    patches = sliding_window_view(padded, (3, 3), axis=(1, 2))[:, ::2, ::2]  # (C, H', W', 3, 3)
    return np.einsum("chwij,ocij->ohw", patches, weight) + bias[:, None, None]


def _elu(z):
    return np.where(z >= 0, z, np.expm1(np.minimum(z, 0)))


def random_features(grid, seed: int = 0, widths=(8, 16, 32)) -> list[np.ndarray]:
    """Three stride-2 3x3 conv + ELU levels with fixed seeded weights.

    Single-channel inputs (disparities) are divided by their maximum and
    replicated to three channels so images and disparities share weights.
    """
    arr = np.asarray(grid, dtype=np.float64)
    if arr.ndim == 2:
        peak = np.abs(arr).max()
        arr = (arr / peak if peak > 0 else arr)[:, :, None]
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    x = np.transpose(arr, (2, 0, 1))
    rng = np.random.default_rng(seed)
    feats = []
    in_ch = 3
    for out_ch in widths:
        scale = np.sqrt(2.0 / (9 * in_ch))
        weight = rng.normal(0.0, scale, (out_ch, in_ch, 3, 3))
        bias = rng.normal(0.0, 0.01, out_ch)
        x = _elu(_conv3x3_s2(x, weight, bias))
        feats.append(x)
        in_ch = out_ch
    return feats
