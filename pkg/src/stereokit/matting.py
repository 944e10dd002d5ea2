"""Closed-form matting Laplacian, regularised solve and local mean scaling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse

from . import _kernels
from .imgio import GridError, as_floatmap, as_image, check_same_shape


@dataclass(frozen=True)
class MattingParams:
    window_radius: int = 1
    eps: float = 1e-7
    lam: float = 100.0
    cg_tol: float = 1e-8
    cg_max_iter: int = 2000

    def __post_init__(self):
        if self.window_radius < 1:
            raise GridError(f"window_radius must be >= 1, got {self.window_radius}")
        for name in ("eps", "lam", "cg_tol"):
            if not getattr(self, name) > 0:
                raise GridError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.cg_max_iter < 1:
            raise GridError(f"cg_max_iter must be >= 1, got {self.cg_max_iter}")


@dataclass
class SparseSystem:
    """Symmetric sparse system ``matrix @ x = rhs`` over the ``H * W`` pixels."""

    matrix: scipy.sparse.csr_matrix
    rhs: np.ndarray
    shape: tuple

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


class SolverError(RuntimeError):
    """CG did not reach the requested residual; ``residual`` holds the last relative residual."""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def build_laplacian(guide, params: MattingParams = MattingParams()) -> SparseSystem:
    """Assemble the matting Laplacian of ``guide`` (1 or 3 channels).

    Each ``(2r+1) x (2r+1)`` window ``w`` with mean ``mu`` and covariance
    ``S`` adds ``delta_ij - (1 + (I_i - mu)^T (S + eps/|w| Id)^-1 (I_j - mu)) / |w|``
    to every pixel pair ``(i, j)`` it contains.
    """
    img = as_image(guide)
    h, w, _ = img.shape
    side = 2 * params.window_radius + 1
    if h < side or w < side:
        raise GridError(f"guide must be at least {side}x{side}, got {h}x{w}")
    rows, cols, vals = _kernels.laplacian_coo(img, params.window_radius, params.eps)
    dim = h * w
    # COO -> CSR sums duplicates in input order, which is fixed by the kernel
    lap = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
    lap.sum_duplicates()
    lap.sort_indices()
    return SparseSystem(lap, np.zeros(dim), (h, w))


def attach_targets(system: SparseSystem, target, confidence, lam: float) -> SparseSystem:
    """Return ``(L + lam * diag(c), lam * c * t)`` for the given target/confidence maps."""
    target = as_floatmap(target)
    confidence = as_floatmap(confidence)
    check_same_shape(target, confidence, names=("target", "confidence"))
    if target.shape != system.shape:
        raise GridError(f"shape mismatch: system is {system.shape}, target is {target.shape}")
    if np.any(confidence < 0):
        raise GridError("confidence must be >= 0")
    c = lam * confidence.ravel()
    matrix = (system.matrix + scipy.sparse.diags(c, format="csr")).tocsr()
    return SparseSystem(matrix, c * target.ravel(), system.shape)


def conjugate_gradient(matrix, rhs, tol=1e-8, max_iter=2000, x0=None):
    """Jacobi-preconditioned CG; stops when ``||r|| <= tol * ||rhs||``.

    Returns ``(x, iterations, relative_residual)``; raises SolverError if the
    tolerance is not met within ``max_iter`` iterations.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=np.float64)
    norm_b = np.linalg.norm(rhs)
    if norm_b == 0.0:
        return np.zeros_like(rhs), 0, 0.0
    diag = matrix.diagonal()
    if np.any(diag <= 0):
        raise GridError("CG needs a positive diagonal")
    inv_diag = 1.0 / diag

    r = rhs - matrix @ x
    res = np.linalg.norm(r) / norm_b
    if res <= tol:
        return x, 0, res
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        ap = matrix @ p
        pap = p @ ap
        if pap <= 0:
            raise SolverError(f"CG breakdown (p^T A p = {pap:.3e}); matrix not SPD", res, it)
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        res = np.linalg.norm(r) / norm_b
        if res <= tol:
            return x, it, res
        z = inv_diag * r
        rz_new = r @ z
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise SolverError(
        f"CG did not converge in {max_iter} iterations (relative residual {res:.3e} > {tol:.1e})",
        res, max_iter,
    )


def solve_matted(system: SparseSystem, target, confidence, params: MattingParams = MattingParams()):
    """Solve ``(L + lam diag(c)) x = lam diag(c) t`` and return ``x`` as an HxW map."""
    full = attach_targets(system, target, confidence, params.lam)
    x, _, _ = conjugate_gradient(full.matrix, full.rhs, params.cg_tol, params.cg_max_iter)
    return x.reshape(system.shape)


def box_mean(fmap, radius: int = 2) -> np.ndarray:
    """Mean over the ``(2r+1)^2`` window clipped to the image (valid pixels only)."""
    fmap = np.asarray(fmap, dtype=np.float64)
    h, w = fmap.shape
    integral = np.zeros((h + 1, w + 1))
    integral[1:, 1:] = fmap.cumsum(axis=0).cumsum(axis=1)
    y0 = np.clip(np.arange(h) - radius, 0, h)
    y1 = np.clip(np.arange(h) + radius + 1, 0, h)
    x0 = np.clip(np.arange(w) - radius, 0, w)
    x1 = np.clip(np.arange(w) + radius + 1, 0, w)
    total = (integral[y1][:, x1] - integral[y0][:, x1]
             - integral[y1][:, x0] + integral[y0][:, x0])
    count = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    return total / count


def local_mean_scale(matted, reference, radius: int = 2) -> np.ndarray:
    """Rescale ``matted`` so its 5x5 local mean follows that of ``reference``."""
    matted = as_floatmap(matted)
    reference = as_floatmap(reference)
    check_same_shape(matted, reference, names=("matted", "reference"))
    return matted * box_mean(reference, radius) / (box_mean(matted, radius) + 1e-8)
