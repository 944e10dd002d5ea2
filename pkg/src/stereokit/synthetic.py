"""Deterministic synthetic stereo rigs used by the tests, the CLI demo and benchmarks."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .imgio import store_floatmap, store_image


def texture(h, w, seed=0, channels=3):
    """Smooth random RGB texture in [0, 1] with enough gradient for photometric checks."""
    rng = np.random.default_rng(seed)
    noise = rng.random((h, w, channels))
    tex = np.stack([gaussian_filter(noise[:, :, c], 1.0) for c in range(channels)], axis=2)
    tex -= tex.min()
    tex /= tex.max()
    ramp = np.linspace(0.0, 1.0, w)[None, :, None]
    return 0.7 * tex + 0.3 * ramp


def constant_disparity_rig(h=32, w=48, disparity=5, noise=1.0, seed=0):
    """Rectified pair of a fronto-parallel textured plane at integer ``disparity``.

    Returns ``(img_left, img_right, disp_left0, disp_right0, gt)`` where the
    initial disparities are the ground truth plus Gaussian noise of std
    ``noise`` pixels (clipped to stay positive).
    """
    disparity = int(disparity)
    tex = texture(h, w + disparity, seed)
    img_left = tex[:, :w]
    img_right = tex[:, disparity:disparity + w]
    gt = np.full((h, w), float(disparity))
    rng = np.random.default_rng(seed + 1)
    d_l = np.clip(gt + noise * rng.standard_normal((h, w)), 0.5, None)
    d_r = np.clip(gt + noise * rng.standard_normal((h, w)), 0.5, None)
    return img_left, img_right, d_l, d_r, gt


def write_rig_manifest(out_dir, n_samples=2, h=32, w=48, disparity=5, noise=1.0, seed=0):
    """Write ``n_samples`` rigs (PNG views, PFM disparities) and their manifest; return its path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for i in range(n_samples):
        il, ir, dl, dr, gt = constant_disparity_rig(h, w, disparity, noise, seed + 10 * i)
        names = [f"s{i}_left.png", f"s{i}_right.png", f"s{i}_displ.pfm", f"s{i}_dispr.pfm"]
        store_image(il, out_dir / names[0], bits=16)
        store_image(ir, out_dir / names[1], bits=16)
        store_floatmap(dl, out_dir / names[2])
        store_floatmap(dr, out_dir / names[3])
        store_floatmap(gt, out_dir / f"s{i}_gt.pfm")
        lines.append("\t".join(names))
    manifest = out_dir / "input.tsv"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest
