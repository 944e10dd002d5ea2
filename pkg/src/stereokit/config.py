"""Flat ``key = value`` configuration with documented defaults.

Precedence: command-line flag > config file > default. The file path comes
from ``--config`` or the ``STEREOKIT_CONFIG`` environment variable.
"""
from __future__ import annotations

import os
from pathlib import Path

from .imgio import GridError

ENV_VAR = "STEREOKIT_CONFIG"


def _bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key: (type, default, description)
DEFAULTS = {
    "d_min": (float, 2.0, "smallest plane disparity in pixels"),
    "d_max": (float, 300.0, "largest plane disparity in pixels"),
    "n": (int, 48, "number of plane intervals N (N + 1 planes)"),
    "window_radius": (int, 1, "matting Laplacian window radius (1 = 3x3)"),
    "eps": (float, 1e-7, "matting covariance regulariser"),
    "lambda": (float, 100.0, "matting data-term weight"),
    "cg_tol": (float, 1e-8, "CG relative residual tolerance"),
    "cg_max_iter": (int, 2000, "CG iteration cap"),
    "conf_floor": (float, 0.05, "lower bound of the left-right matting confidence"),
    "alpha_p": (float, 0.01, "perceptual loss weight"),
    "alpha_ds": (float, 0.0004, "smoothness loss weight"),
    "alpha_dm": (float, 0.25, "distilled matting loss weight"),
    "alpha_dc": (float, 0.01, "deep autocorrelation loss weight"),
    "acorr_k": (int, 3, "autocorrelation window size"),
    "feature_seed": (int, 0, "seed of the built-in random feature extractor"),
    "cap": (float, 80.0, "metric depth cap in metres"),
    "median_scale": (_bool, False, "median-scale predictions before metrics"),
    "jobs": (int, 1, "worker processes for distill/pipeline"),
}


class ConfigError(GridError):
    pass


def parse_config(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        kind = DEFAULTS[key][0]
        try:
            values[key] = kind(value.strip())
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def load_config(path=None) -> dict:
    """Defaults overlaid with the given file (or ``$STEREOKIT_CONFIG`` when ``path`` is None)."""
    config = {k: v[1] for k, v in DEFAULTS.items()}
    path = path or os.environ.get(ENV_VAR)
    if path:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        config.update(parse_config(text, str(path)))
    return config


def render_defaults() -> str:
    return "".join(f"# {desc}\n{key} = {default}\n" for key, (_, default, desc) in DEFAULTS.items())
