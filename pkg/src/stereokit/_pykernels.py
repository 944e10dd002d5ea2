"""Vectorised numpy versions of the hot kernels.

Used when the compiled ``_core`` extension is unavailable or disabled with
``STEREOKIT_PURE_PYTHON=1``. Signatures and output layouts match ``_core``
exactly; ``warp_rows`` also matches it bit-for-bit.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def warp_rows(src, disp, step):
    """Linear horizontal resampling of ``src`` at ``x + step * disp``.

    src : (H, W, C) float64, disp : (H, W) float64, step : +1.0 or -1.0.
    Returns ``(out, valid)`` where samples whose coordinate leaves
    ``[0, W - 1]`` are 0 and flagged invalid.
    """
    h, w, _ = src.shape
    xs = np.arange(w, dtype=np.float64)[None, :] + step * disp
    valid = (xs >= 0.0) & (xs <= w - 1.0)
    x0 = np.floor(np.where(valid, xs, 0.0))
    frac = np.where(valid, xs - x0, 0.0)
    i0 = x0.astype(np.intp)
    i1 = np.minimum(i0 + 1, w - 1)
    rows = np.arange(h)[:, None]
    a = frac[:, :, None]
    out = src[rows, i0] * (1.0 - a) + src[rows, i1] * a
    out[~valid] = 0.0
    return out, valid


def laplacian_coo(guide, radius, eps):
    """COO triplets of the closed-form matting Laplacian of ``guide`` (H, W, C).

    Window order is row-major over window centres; within a window the
    ``n*n`` entries are emitted row-major over (i, j) pixel pairs.
    """
    h, w, c = guide.shape
    side = 2 * radius + 1
    n = side * side
    idx = np.arange(h * w).reshape(h, w)
    win_idx = sliding_window_view(idx, (side, side)).reshape(-1, n)
    pix = guide.reshape(h * w, c)[win_idx]                     # (K, n, C)
    mu = pix.mean(axis=1, keepdims=True)
    dev = pix - mu
    cov = np.einsum("kni,knj->kij", dev, dev) / n
    inv = np.linalg.inv(cov + (eps / n) * np.eye(c))
    quad = np.einsum("kni,kij,kmj->knm", dev, inv, dev)
    vals = np.eye(n)[None] - (1.0 + quad) / n
    rows = np.repeat(win_idx, n, axis=1).ravel()
    cols = np.tile(win_idx, (1, n)).ravel()
    return rows.astype(np.int64), cols.astype(np.int64), vals.ravel()


def autocorr(feats, k):
    """Cosine similarity of every pixel's feature vector with its k*k neighbours.

    feats : (C, H, W) float64. Returns (k*k, H, W); offsets are ordered
    row-major over (dy, dx) in ``[-r, r]^2``; out-of-bounds offsets give 0.
    """
    c, h, w = feats.shape
    r = k // 2
    norm = np.sqrt(np.einsum("chw,chw->hw", feats, feats))
    out = np.zeros((k * k, h, w))
    o = 0
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            ys, ye = max(0, -dy), min(h, h - dy)
            xs, xe = max(0, -dx), min(w, w - dx)
            if ys < ye and xs < xe:
                a = feats[:, ys:ye, xs:xe]
                b = feats[:, ys + dy:ye + dy, xs + dx:xe + dx]
                dot = np.einsum("chw,chw->hw", a, b)
                den = norm[ys:ye, xs:xe] * norm[ys + dy:ye + dy, xs + dx:xe + dx] + 1e-8
                out[o, ys:ye, xs:xe] = dot / den
            o += 1
    return out
