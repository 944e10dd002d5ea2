"""Depth evaluation metrics (abs rel, sq rel, rmse, rmse log, delta thresholds)."""
from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from .imgio import GridError, as_floatmap, check_same_shape

MIN_DEPTH = 1e-3


@dataclass(frozen=True)
class MetricReport:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    delta1: float
    delta2: float
    delta3: float
    n_valid: int

    @classmethod
    def names(cls):
        return [f.name for f in fields(cls)]

    def row(self):
        return astuple(self)


def eval_depth(pred, gt, cap: float = 80.0, median_scale: bool = False) -> MetricReport:
    pred = as_floatmap(pred)
    gt = as_floatmap(gt)
    check_same_shape(pred, gt, names=("pred", "gt"))
    valid = (gt > 0) & (gt <= cap)
    if not valid.any():
        raise GridError("no valid ground-truth pixels (need 0 < gt <= cap)")
    p = pred[valid]
    g = gt[valid]
    if median_scale:
        med = np.median(p)
        if med <= 0:
            raise GridError("median prediction must be > 0 for median scaling")
        p = p * (np.median(g) / med)
    p = np.clip(p, MIN_DEPTH, cap)

    thresh = np.maximum(p / g, g / p)
    return MetricReport(
        abs_rel=float(np.mean(np.abs(p - g) / g)),
        sq_rel=float(np.mean((p - g) ** 2 / g)),
        rmse=float(np.sqrt(np.mean((p - g) ** 2))),
        rmse_log=float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        delta1=float(np.mean(thresh < 1.25)),
        delta2=float(np.mean(thresh < 1.25 ** 2)),
        delta3=float(np.mean(thresh < 1.25 ** 3)),
        n_valid=int(valid.sum()),
    )


def disparity_to_depth(disp, focal: float, baseline: float) -> np.ndarray:
    """``focal * baseline / disp``; non-positive disparities become depth 0 (invalid)."""
    disp = as_floatmap(disp)
    out = np.zeros_like(disp)
    pos = disp > 0
    out[pos] = focal * baseline / disp[pos]
    return out


def depth_to_disparity(depth, focal: float, baseline: float) -> np.ndarray:
    depth = as_floatmap(depth)
    out = np.zeros_like(depth)
    pos = depth > 0
    out[pos] = focal * baseline / depth[pos]
    return out
