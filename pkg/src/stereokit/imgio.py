"""Image, float-map and mask IO plus the grid conventions shared by the package.

Grids are plain numpy arrays:

* Image   -- ``(H, W, C)`` float64 in ``[0, 1]``, ``C`` is 1 or 3
* FloatMap -- ``(H, W)`` float64, finite
* BitMask -- ``(H, W)`` bool

Float data is exchanged as PFM (little-endian, negative scale). PNG is read
at 8 or 16 bit and only written for display.
"""
from __future__ import annotations

import os
import re
import tempfile
from pathlib import Path

import cv2
import numpy as np


class GridError(ValueError):
    """Raised for malformed grids, shape mismatches and unreadable files."""


def as_image(data) -> np.ndarray:
    img = np.asarray(data, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise GridError(f"image must be HxW, HxWx1 or HxWx3, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise GridError("image contains non-finite values")
    return np.clip(img, 0.0, 1.0)


def as_floatmap(data) -> np.ndarray:
    fmap = np.asarray(data, dtype=np.float64)
    if fmap.ndim == 3 and fmap.shape[2] == 1:
        fmap = fmap[:, :, 0]
    if fmap.ndim != 2:
        raise GridError(f"float map must be HxW, got shape {fmap.shape}")
    if not np.all(np.isfinite(fmap)):
        raise GridError("float map contains non-finite values")
    return fmap


def as_mask(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise GridError(f"mask must be HxW, got shape {arr.shape}")
    if arr.dtype != bool:
        if not np.all((arr == 0) | (arr == 1)):
            raise GridError("mask values must be exactly 0 or 1")
        arr = arr.astype(bool)
    return arr


def check_same_shape(*grids, names=None):
    """Raise GridError unless every grid has the same ``(H, W)``."""
    shapes = [tuple(np.shape(g)[:2]) for g in grids]
    if len(set(shapes)) > 1:
        label = ", ".join(names) if names else "inputs"
        raise GridError(f"shape mismatch between {label}: {shapes}")
    return shapes[0]


# --------------------------------------------------------------------------
# PFM
# --------------------------------------------------------------------------

def read_pfm(path) -> np.ndarray:
    """Read a PFM file into an ``(H, W)`` or ``(H, W, 3)`` float32 array.

    Rows are returned top-to-bottom. Either endianness is accepted; the sign
    of the scale field selects it (negative = little-endian).
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            header = fh.readline().rstrip()
            dims_line = fh.readline()
            while dims_line.startswith(b"#"):
                dims_line = fh.readline()
            scale_line = fh.readline()
            payload = fh.read()
    except OSError as exc:
        raise GridError(f"cannot read {path}: {exc}") from exc

    if header == b"Pf":
        channels = 1
    elif header == b"PF":
        channels = 3
    else:
        raise GridError(f"{path}: not a PFM file (header {header[:8]!r})")
    match = re.match(rb"^\s*(\d+)\s+(\d+)\s*$", dims_line)
    if not match:
        raise GridError(f"{path}: malformed PFM dimensions line {dims_line!r}")
    width, height = int(match.group(1)), int(match.group(2))
    try:
        scale = float(scale_line.strip())
    except ValueError as exc:
        raise GridError(f"{path}: malformed PFM scale line {scale_line!r}") from exc
    if scale == 0:
        raise GridError(f"{path}: PFM scale must be non-zero")
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")

    count = width * height * channels
    if len(payload) < count * 4:
        raise GridError(f"{path}: truncated PFM payload ({len(payload)} < {count * 4} bytes)")
    data = np.frombuffer(payload, dtype=dtype, count=count).astype(np.float32)
    shape = (height, width) if channels == 1 else (height, width, 3)
    data = np.flipud(data.reshape(shape))
    if not np.all(np.isfinite(data)):
        raise GridError(f"{path}: PFM contains NaN or Inf")
    return np.ascontiguousarray(data)


def pfm_bytes(data) -> bytes:
    arr = np.asarray(data)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim == 2:
        header = b"Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        header = b"PF"
    else:
        raise GridError(f"PFM stores HxW or HxWx3 grids, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GridError("refusing to write NaN/Inf to PFM")
    height, width = arr.shape[:2]
    body = np.ascontiguousarray(np.flipud(arr), dtype="<f4").tobytes()
    return b"%s\n%d %d\n-1.0\n" % (header, width, height) + body


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_pfm(path, data) -> None:
    try:
        atomic_write_bytes(path, pfm_bytes(data))
    except OSError as exc:
        raise GridError(f"cannot write {path}: {exc}") from exc


def load_floatmap(path) -> np.ndarray:
    data = read_pfm(path)
    if data.ndim != 2:
        raise GridError(f"{path}: expected single-channel PFM (Pf), got 3 channels")
    return data.astype(np.float64)


def store_floatmap(fmap, path) -> None:
    """Store a float map as PFM. Values are written as float32."""
    write_pfm(path, as_floatmap(fmap))


def load_mask(path) -> np.ndarray:
    return as_mask(load_floatmap(path))


def store_mask(mask, path) -> None:
    write_pfm(path, as_mask(mask).astype(np.float32))


# --------------------------------------------------------------------------
# images
# --------------------------------------------------------------------------

def load_image(path) -> np.ndarray:
    """Load a PNG (8/16-bit, gray or RGB) or PFM as an ``(H, W, C)`` image in [0, 1]."""
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        data = read_pfm(path).astype(np.float64)
        return as_image(data)
    if not path.exists():
        raise GridError(f"cannot read {path}: no such file")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise GridError(f"cannot decode image {path}")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise GridError(f"{path}: unsupported bit depth ({raw.dtype})")
    if raw.ndim == 2:
        raw = raw[:, :, None]
    elif raw.shape[2] == 3:
        raw = raw[:, :, ::-1]
    elif raw.shape[2] == 4:
        raise GridError(f"{path}: images with an alpha channel are not supported")
    else:
        raise GridError(f"{path}: unsupported channel count {raw.shape[2]}")
    return as_image(raw.astype(np.float64) / scale)


def store_image(img, path, bits: int = 8) -> None:
    """Store an image as PNG (``bits`` 8 or 16) or, for ``.pfm`` paths, losslessly."""
    img = as_image(img)
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        write_pfm(path, img if img.shape[2] == 3 else img[:, :, 0])
        return
    if bits == 8:
        raw = np.round(img * 255.0).astype(np.uint8)
    elif bits == 16:
        raw = np.round(img * 65535.0).astype(np.uint16)
    else:
        raise GridError(f"unsupported PNG bit depth {bits}")
    if raw.shape[2] == 3:
        raw = raw[:, :, ::-1]
    ok, buf = cv2.imencode(".png", np.ascontiguousarray(raw))
    if not ok:
        raise GridError(f"PNG encoding failed for {path}")
    try:
        atomic_write_bytes(path, buf.tobytes())
    except OSError as exc:
        raise GridError(f"cannot write {path}: {exc}") from exc


# --------------------------------------------------------------------------
# plane stacks (volumes, feature maps)
# --------------------------------------------------------------------------

def stack_paths(prefix) -> list[Path]:
    """Return the indexed files ``<prefix>_000.pfm, <prefix>_001.pfm, ...`` in order."""
    prefix = Path(prefix)
    if prefix.is_dir():
        files = sorted(prefix.glob("*.pfm"))
    else:
        pattern = re.compile(re.escape(prefix.name) + r"_(\d+)\.pfm$")
        files = sorted(
            (p for p in prefix.parent.glob(prefix.name + "_*.pfm") if pattern.match(p.name)),
            key=lambda p: int(pattern.match(p.name).group(1)),
        )
    return files


def load_stack(prefix) -> np.ndarray:
    """Load a multi-plane PFM stack as a ``(P, H, W)`` float64 array."""
    files = stack_paths(prefix)
    if not files:
        raise GridError(f"no PFM planes found for stack {prefix}")
    planes = [load_floatmap(f) for f in files]
    check_same_shape(*planes, names=[f.name for f in files])
    return np.stack(planes)


def store_stack(volume, prefix) -> list[Path]:
    """Write a ``(P, H, W)`` array as ``<prefix>_000.pfm ...``; returns the paths."""
    volume = np.asarray(volume, dtype=np.float64)
    if volume.ndim != 3:
        raise GridError(f"stack must be PxHxW, got shape {volume.shape}")
    prefix = Path(prefix)
    paths = []
    for i, plane in enumerate(volume):
        path = prefix.parent / f"{prefix.name}_{i:03d}.pfm"
        store_floatmap(plane, path)
        paths.append(path)
    return paths
