"""Matted-disparity distillation: masks, per-sample pipeline and bulk dataset generation."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dispvol import LEFT, RIGHT, warp_horizontal
from .imgio import (
    GridError,
    as_floatmap,
    as_image,
    atomic_write_bytes,
    check_same_shape,
    load_floatmap,
    load_image,
    store_floatmap,
    store_mask,
)
from .matting import MattingParams, build_laplacian, local_mean_scale, solve_matted

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.tsv"
OUTPUT_KINDS = ("matted_left", "matted_right", "mask_left", "mask_right")


@dataclass(frozen=True)
class StereoSample:
    img_left: np.ndarray
    img_right: np.ndarray
    disp_left: np.ndarray
    disp_right: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "img_left", as_image(self.img_left))
        object.__setattr__(self, "img_right", as_image(self.img_right))
        object.__setattr__(self, "disp_left", as_floatmap(self.disp_left))
        object.__setattr__(self, "disp_right", as_floatmap(self.disp_right))
        check_same_shape(self.img_left, self.img_right, self.disp_left, self.disp_right,
                         names=("img_left", "img_right", "disp_left", "disp_right"))
        if self.img_left.shape[2] != self.img_right.shape[2]:
            raise GridError("img_left and img_right have different channel counts")
        if np.any(self.disp_left < 0) or np.any(self.disp_right < 0):
            raise GridError("disparities must be >= 0")

    def swapped(self) -> "StereoSample":
        """Mirror the rig: flip every grid horizontally and exchange the views."""
        return StereoSample(
            self.img_right[:, ::-1], self.img_left[:, ::-1],
            self.disp_right[:, ::-1], self.disp_left[:, ::-1],
        )


@dataclass
class DistillOutput:
    matted_left: np.ndarray
    matted_right: np.ndarray
    mask_left: np.ndarray
    mask_right: np.ndarray


def _channel_mean_abs(a, b):
    diff = np.abs(a - b)
    acc = diff[:, :, 0]
    for ch in range(1, diff.shape[2]):
        acc = acc + diff[:, :, ch]
    return acc / diff.shape[2]


def _view_mask(img_a, img_b, disp_a, disp_b, matted_a, matted_b, sign):
    # photometric: reconstruct view a from view b under both hypotheses
    rec_m, valid_m = warp_horizontal(img_b, matted_a, sign)
    rec_0, valid_0 = warp_horizontal(img_b, disp_a, sign)
    photo = _channel_mean_abs(img_a, rec_m) < _channel_mean_abs(img_a, rec_0)
    # left-right consistency
    back_m, _ = warp_horizontal(matted_b, matted_a, sign)
    back_0, _ = warp_horizontal(disp_b, disp_a, sign)
    lr = np.abs(matted_a - back_m) < np.abs(disp_a - back_0)
    return photo & lr & valid_m & valid_0


def distillation_mask(sample: StereoSample, matted_left, matted_right, view: str = LEFT):
    """Pixels where the matted map beats the initial one on both checks.

    A pixel is kept when (a) the channel-mean photometric error of the
    backward-warped counter view is strictly lower under the matted
    disparity and (b) the left-right disagreement is strictly lower for the
    matted pair. Pixels whose warp leaves the frame are never kept.
    ``view="right"`` evaluates the mirrored check for the right view.
    """
    matted_left = as_floatmap(matted_left)
    matted_right = as_floatmap(matted_right)
    check_same_shape(sample.disp_left, matted_left, matted_right,
                     names=("sample", "matted_left", "matted_right"))
    if view == LEFT:
        return _view_mask(sample.img_left, sample.img_right, sample.disp_left, sample.disp_right,
                          matted_left, matted_right, RIGHT)
    if view == RIGHT:
        return _view_mask(sample.img_right, sample.img_left, sample.disp_right, sample.disp_left,
                          matted_right, matted_left, LEFT)
    raise GridError(f"view must be 'left' or 'right', got {view!r}")


def lr_confidence(disp, disp_other, sign, floor):
    """Matting confidence ``max(exp(-|d - g(d_other, d)|), floor)``; out-of-frame pixels get ``floor``."""
    back, valid = warp_horizontal(disp_other, disp, sign)
    conf = np.maximum(np.exp(-np.abs(disp - back)), floor)
    return np.where(valid, conf, floor)


def matte_view(guide, disp, confidence, params: MattingParams = MattingParams()):
    """Matted disparity of one view, before mean scaling.

    The disparity is normalised by its maximum for the solve and mapped back
    afterwards.
    """
    disp = as_floatmap(disp)
    scale = disp.max()
    if scale <= 0:
        raise GridError("initial disparity must have a positive maximum")
    system = build_laplacian(guide, params)
    return solve_matted(system, disp / scale, confidence, params) * scale


def distill_sample(sample: StereoSample, params: MattingParams = MattingParams(),
                   conf_floor: float = 0.05) -> DistillOutput:
    """Matte both views, rescale locally against the initial maps, and build both masks."""
    conf_l = lr_confidence(sample.disp_left, sample.disp_right, RIGHT, conf_floor)
    conf_r = lr_confidence(sample.disp_right, sample.disp_left, LEFT, conf_floor)
    raw_l = matte_view(sample.img_left, sample.disp_left, conf_l, params)
    raw_r = matte_view(sample.img_right, sample.disp_right, conf_r, params)
    matted_l = local_mean_scale(raw_l, sample.disp_left)
    matted_r = local_mean_scale(raw_r, sample.disp_right)
    return DistillOutput(
        matted_l,
        matted_r,
        distillation_mask(sample, matted_l, matted_r, LEFT),
        distillation_mask(sample, matted_l, matted_r, RIGHT),
    )


# --------------------------------------------------------------------------
# manifests and bulk generation
# --------------------------------------------------------------------------

def read_manifest(path) -> list[tuple[Path, Path, Path, Path]]:
    """Parse a ``left_img  right_img  left_disp  right_disp`` TSV; paths resolve against its directory."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise GridError(f"cannot read manifest {path}: {exc}") from exc
    entries = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.rstrip("\n").split("\t")
        if len(cols) != 4:
            raise GridError(f"{path}:{lineno}: expected 4 tab-separated columns, got {len(cols)}")
        entries.append(tuple((path.parent / c.strip()) for c in cols))
    return entries


def write_manifest(path, rows, header) -> None:
    lines = ["#" + "\t".join(header)] + ["\t".join(str(c) for c in row) for row in rows]
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def load_sample(entry) -> StereoSample:
    left, right, dl, dr = entry
    return StereoSample(load_image(left), load_image(right), load_floatmap(dl), load_floatmap(dr))


def output_paths(out_dir, sample_id) -> dict[str, Path]:
    return {kind: Path(out_dir) / f"{sample_id}_{kind}.pfm" for kind in OUTPUT_KINDS}


def _process(args):
    entry, paths, params, conf_floor = args
    try:
        result = distill_sample(load_sample(entry), params, conf_floor)
        store_floatmap(result.matted_left, paths["matted_left"])
        store_floatmap(result.matted_right, paths["matted_right"])
        store_mask(result.mask_left, paths["mask_left"])
        store_mask(result.mask_right, paths["mask_right"])
    except Exception as exc:  # noqa: BLE001 - per-sample failures must not abort the run
        return f"{type(exc).__name__}: {exc}"
    return None


def generate_matted_dataset(entries, out_dir, params: MattingParams = MattingParams(),
                            conf_floor: float = 0.05, jobs: int = 1):
    """Distil every manifest entry into ``out_dir`` and write its output manifest.

    Samples whose four outputs already exist are not recomputed. A failing
    sample is logged and left out of the manifest. Returns the manifest rows
    ``(sample_id, matted_left, matted_right, mask_left, mask_right)``.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise GridError(f"cannot create output directory {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise GridError(f"output directory {out_dir} is not writable")

    ids = [f"{i:05d}" for i in range(len(entries))]
    todo = []
    for sid, entry in zip(ids, entries):
        paths = output_paths(out_dir, sid)
        if all(p.exists() for p in paths.values()):
            log.info("sample %s already distilled, skipping", sid)
            continue
        todo.append((sid, (entry, paths, params, conf_floor)))

    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            errors = list(pool.map(_process, [t[1] for t in todo]))
    else:
        errors = [_process(t[1]) for t in todo]
    for (sid, _), err in zip(todo, errors):
        if err is not None:
            log.warning("sample %s failed: %s", sid, err)

    rows = []
    for sid in ids:
        paths = output_paths(out_dir, sid)
        if all(p.exists() for p in paths.values()):
            rows.append((sid,) + tuple(paths[k].name for k in OUTPUT_KINDS))
    write_manifest(out_dir / MANIFEST_NAME, rows, ("sample_id",) + OUTPUT_KINDS)
    return rows
