"""Neural positional encoding: a two-layer ELU MLP over absolute pixel coordinates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgio import GridError


@dataclass
class NpeParams:
    w1: np.ndarray  # (hidden, 2)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (out, hidden)
    b2: np.ndarray  # (out,)

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64).reshape(-1)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        self.b2 = np.asarray(self.b2, dtype=np.float64).reshape(-1)
        if self.w1.ndim != 2 or self.w1.shape[1] != 2:
            raise GridError(f"w1 must be (hidden, 2), got {self.w1.shape}")
        hidden = self.w1.shape[0]
        if self.b1.shape != (hidden,) or self.w2.ndim != 2 or self.w2.shape[1] != hidden:
            raise GridError("NPE parameter dimensions are inconsistent")
        if self.b2.shape != (self.w2.shape[0],):
            raise GridError("b2 length must equal the output width")
        for name in ("w1", "b1", "w2", "b2"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise GridError(f"{name} contains non-finite values")

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def out(self) -> int:
        return self.w2.shape[0]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    @classmethod
    def from_flat(cls, vec, hidden, out) -> "NpeParams":
        vec = np.asarray(vec, dtype=np.float64)
        sizes = [hidden * 2, hidden, out * hidden, out]
        if vec.size != sum(sizes):
            raise GridError(f"expected {sum(sizes)} parameters for hidden={hidden}, out={out}, got {vec.size}")
        w1, b1, w2, b2 = np.split(vec, np.cumsum(sizes)[:-1])
        return cls(w1.reshape(hidden, 2), b1, w2.reshape(out, hidden), b2)

    @classmethod
    def random(cls, hidden=16, out=16, seed=0, low=-0.5, high=0.5) -> "NpeParams":
        rng = np.random.default_rng(seed)
        n = hidden * 2 + hidden + out * hidden + out
        return cls.from_flat(rng.uniform(low, high, n), hidden, out)


@dataclass(frozen=True)
class PatchOrigin:
    """A ``patch_h x patch_w`` crop at ``(x0, y0)`` of a ``full_h x full_w`` image."""

    x0: int
    y0: int
    patch_h: int
    patch_w: int
    full_h: int
    full_w: int

    def __post_init__(self):
        if self.patch_h < 1 or self.patch_w < 1:
            raise GridError("patch must be at least 1x1")
        if not (0 <= self.x0 and self.x0 + self.patch_w <= self.full_w):
            raise GridError(f"patch columns [{self.x0}, {self.x0 + self.patch_w}) exceed width {self.full_w}")
        if not (0 <= self.y0 and self.y0 + self.patch_h <= self.full_h):
            raise GridError(f"patch rows [{self.y0}, {self.y0 + self.patch_h}) exceed height {self.full_h}")


def _normalise(coord, size):
    return 2.0 * coord / (size - 1) - 1.0 if size > 1 else np.zeros_like(coord)


def patch_coordinates(origin: PatchOrigin) -> np.ndarray:
    """``(patch_h, patch_w, 2)`` array of (x, y) in [-1, 1] relative to the full image."""
    xs = _normalise(np.arange(origin.x0, origin.x0 + origin.patch_w, dtype=np.float64), origin.full_w)
    ys = _normalise(np.arange(origin.y0, origin.y0 + origin.patch_h, dtype=np.float64), origin.full_h)
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx, gy], axis=-1)


def elu(z):
    return np.where(z >= 0, z, np.expm1(np.minimum(z, 0)))


def elu_grad(z):
    return np.where(z >= 0, 1.0, np.exp(np.minimum(z, 0)))


def mlp(params: NpeParams, p):
    """Evaluate the encoding at coordinates ``p`` of shape ``(..., 2)``; returns ``(..., out)``."""
    z1 = p @ params.w1.T + params.b1
    return elu(elu(z1) @ params.w2.T + params.b2)


def npe_forward(params: NpeParams, origin: PatchOrigin) -> np.ndarray:
    """Positional feature map ``(out, patch_h, patch_w)`` for a crop of the full image."""
    feats = mlp(params, patch_coordinates(origin))
    return np.ascontiguousarray(np.moveaxis(feats, -1, 0))


def jacobian(params: NpeParams, p) -> np.ndarray:
    """Analytic d(output)/d(flat params) at one coordinate ``p``: ``(out, n_params)``."""
    p = np.asarray(p, dtype=np.float64)
    z1 = params.w1 @ p + params.b1
    h = elu(z1)
    z2 = params.w2 @ h + params.b2
    g2 = elu_grad(z2)                       # (out,)
    g1 = elu_grad(z1)                       # (hidden,)
    out, hidden = params.out, params.hidden
    # dF_o/dz1_j = g2_o * w2_oj * g1_j
    dz1 = g2[:, None] * params.w2 * g1[None, :]                 # (out, hidden)
    d_w1 = dz1[:, :, None] * p[None, None, :]                   # (out, hidden, 2)
    d_b1 = dz1
    d_w2 = np.zeros((out, out, hidden))
    d_w2[np.arange(out), np.arange(out), :] = g2[:, None] * h[None, :]
    d_b2 = np.diag(g2)
    return np.concatenate(
        [d_w1.reshape(out, -1), d_b1, d_w2.reshape(out, -1), d_b2], axis=1
    )


@dataclass
class JacobianReport:
    max_rel_error: float
    max_abs_error: float
    probes: int
    n_params: int


def _mlp_batch(thetas, hidden, out, p):
    """:func:`mlp` for a stack of flat parameter vectors ``(B, n)``; returns ``(B, P, out)``."""
    sizes = np.cumsum([hidden * 2, hidden, out * hidden])
    w1 = thetas[:, :sizes[0]].reshape(-1, hidden, 2)
    b1 = thetas[:, sizes[0]:sizes[1]]
    w2 = thetas[:, sizes[1]:sizes[2]].reshape(-1, out, hidden)
    b2 = thetas[:, sizes[2]:]
    z1 = np.einsum("pi,bhi->bph", p, w1) + b1[:, None, :]
    return elu(np.einsum("bph,boh->bpo", elu(z1), w2) + b2[:, None, :])


def npe_jacobian_check(params: NpeParams, origin: PatchOrigin, probe_count: int = 10,
                       h: float = 1e-5, seed: int = 0, floor: float = 1e-3) -> JacobianReport:
    """Compare :func:`jacobian` with central differences at random pixels of the patch.

    The relative error is ``|analytic - numeric| / max(|analytic|, |numeric|, floor)``;
    ``floor`` keeps vanishing derivatives from dividing by zero.
    """
    if probe_count < 1:
        raise GridError("probe_count must be >= 1")
    rng = np.random.default_rng(seed)
    coords = patch_coordinates(origin).reshape(-1, 2)
    probes = coords[rng.integers(0, len(coords), probe_count)]
    theta = params.flat()
    hidden, out = params.hidden, params.out

    analytic = np.stack([jacobian(params, p) for p in probes])          # (P, out, n)
    # all +h / -h perturbations evaluated as one batch of parameter sets
    steps = np.eye(theta.size) * h
    fp = _mlp_batch(theta + steps, hidden, out, probes)                 # (n, P, out)
    fm = _mlp_batch(theta - steps, hidden, out, probes)
    numeric = np.moveaxis((fp - fm) / (2 * h), 0, -1)

    diff = np.abs(analytic - numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return JacobianReport(float((diff / denom).max()), float(diff.max()), probe_count, theta.size)


def params_to_header(params: NpeParams) -> str:
    return f"hidden={params.hidden}\nout={params.out}\n"


def parse_header(text: str) -> tuple[int, int]:
    fields = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    try:
        return int(fields["hidden"]), int(fields["out"])
    except (KeyError, ValueError) as exc:
        raise GridError(f"NPE header must define integer 'hidden' and 'out': {exc}") from exc
