"""Gaussian kernel and kernel-width selection."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import DimensionError, InsufficientDataError, ParameterError

MIN_WIDTH = 1e-6
MEDIAN_SUBSAMPLE = 2000


@dataclass(frozen=True)
class KernelParams:
    width: float

    def __post_init__(self):
        if not (math.isfinite(self.width) and self.width > 0):
            raise ParameterError(f"kernel width must be positive and finite, got {self.width}")


def _as_width(params) -> float:
    return params.width if isinstance(params, KernelParams) else KernelParams(float(params)).width


def gaussian_kernel(x, y, params: KernelParams) -> float:
    """exp(-||x - y||^2 / (2 width^2))."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionError(f"kernel arguments differ in shape: {x.shape} vs {y.shape}")
    sigma = _as_width(params)
    d2 = float(np.sum((x - y) ** 2))
    return math.exp(-d2 / (2.0 * sigma * sigma))


def kernel_matrix(X, Y, params: KernelParams, chunk: int = 1 << 18) -> np.ndarray:
    """Matrix K[i, j] = k(X[i], Y[j]) for row-stacked inputs.

    Squared distances are formed from explicit differences (no ``|x|^2 + |y|^2 - 2xy``
    expansion) so that K[i, i] is exactly 1.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise DimensionError(f"feature dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    sigma = _as_width(params)
    scale = -1.0 / (2.0 * sigma * sigma)
    out = np.empty((X.shape[0], Y.shape[0]))
    step = max(1, chunk // max(1, Y.shape[0]))
    for start in range(0, X.shape[0], step):
        blk = X[start:start + step, None, :] - Y[None, :, :]
        out[start:start + step] = np.exp(scale * np.einsum("ijk,ijk->ij", blk, blk))
    return out


def median_heuristic_width(samples, seed: int | None = None) -> KernelParams:
    """Median of all pairwise Euclidean distances, floored at ``MIN_WIDTH``.

    Above ``MEDIAN_SUBSAMPLE`` points a uniform subsample (drawn with ``seed``) is used.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise InsufficientDataError("median heuristic needs at least 2 samples")
    if X.shape[0] > MEDIAN_SUBSAMPLE:
        rng = np.random.default_rng(seed)
        X = X[rng.choice(X.shape[0], MEDIAN_SUBSAMPLE, replace=False)]
    width = float(np.median(pdist(X)))
    return KernelParams(max(width, MIN_WIDTH))
