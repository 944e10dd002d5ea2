"""Self-supervision machinery for single-view depth from stereo pairs.

Disparity probability volumes and view synthesis, matting-Laplacian
distillation, neural positional encoding, losses and depth metrics.
"""
__version__ = "0.1.0"

from ._kernels import BACKEND  # noqa: E402,F401
