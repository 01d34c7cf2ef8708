"""Zero-mean Gaussian process regression with Matérn 3/2 kernels.

``k(x, x') = variance * (1 + sqrt(3) r) * exp(-sqrt(3) r)`` with
``r = || (x - x') / lengthscale ||``; a scalar lengthscale gives the
isotropic kernel, one lengthscale per input gives ARD.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky
from scipy.spatial.distance import cdist, pdist

__all__ = [
    "GpFit",
    "KernelNotPsdError",
    "fit_hyperparameters",
    "fit_gp",
    "log_marginal_likelihood",
    "matern32",
]

SQRT3 = math.sqrt(3.0)
MAX_JITTER = 1e-4
_BLOCK = 1024


class KernelNotPsdError(ArithmeticError):
    """Cholesky failed even after raising the diagonal jitter to its cap."""


def matern32(X1: np.ndarray, X2: np.ndarray, lengthscale, variance: float = 1.0) -> np.ndarray:
    ls = np.asarray(lengthscale, dtype=float)
    r = cdist(np.atleast_2d(X1) / ls, np.atleast_2d(X2) / ls)
    r *= SQRT3
    return variance * (1.0 + r) * np.exp(-r)


def _kernel_matrix(X: np.ndarray, lengthscale, variance: float, jitter: float) -> np.ndarray:
    """Training kernel matrix built in row blocks to bound temporaries."""
    n = len(X)
    Xs = X / np.asarray(lengthscale, dtype=float)
    K = np.empty((n, n))
    for start in range(0, n, _BLOCK):
        r = cdist(Xs[start:start + _BLOCK], Xs)
        r *= SQRT3
        block = K[start:start + _BLOCK]
        np.exp(-r, out=block)
        r += 1.0
        block *= r
        block *= variance
    K.flat[:: n + 1] += jitter
    return K


def _factor(X, lengthscale, variance, jitter):
    """Cholesky factor with jitter escalated by 10x up to ``MAX_JITTER``."""
    while True:
        K = _kernel_matrix(X, lengthscale, variance, jitter)
        try:
            return cholesky(K, lower=True, overwrite_a=True, check_finite=False), jitter
        except LinAlgError:
            del K
            if jitter >= MAX_JITTER:
                raise KernelNotPsdError(f"kernel matrix not positive definite at jitter {jitter:g}") from None
            jitter = min(max(jitter * 10.0, 1e-12), MAX_JITTER)


def log_marginal_likelihood(X, y, lengthscale, variance=1.0, jitter=1e-8) -> float:
    L, _ = _factor(X, lengthscale, variance, jitter)
    alpha = cho_solve((L, True), y, check_finite=False)
    return float(-0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * len(y) * math.log(2 * math.pi))


def _grid(center: float, points: int) -> np.ndarray:
    half = (points - 1) / 2
    return center * 2.0 ** np.linspace(-half, half, points)


def fit_hyperparameters(
    X: np.ndarray,
    y: np.ndarray,
    ard: bool,
    variance: float = 1.0,
    jitter: float = 1e-8,
    grid_points: int = 9,
    ard_sweeps: int = 2,
) -> tuple[np.ndarray, float]:
    """Lengthscale(s) maximizing the log marginal likelihood over a log2 grid.

    The isotropic grid is ``median_distance * 2**k`` for ``grid_points`` values
    of ``k`` centered on 0. ARD starts from the isotropic optimum and runs
    coordinate sweeps, each dimension searched over the same grid centered at
    its current value. Returns ``(lengthscales, best_lml)``.
    """
    d = X.shape[1]
    med = float(np.median(pdist(X))) if len(X) > 1 else 1.0
    if not med > 0:
        med = 1.0

    def score(ls):
        try:
            return log_marginal_likelihood(X, y, ls, variance, jitter)
        except KernelNotPsdError:
            return -np.inf

    best_ls, best = med, -np.inf
    for ls in _grid(med, grid_points):
        s = score(ls)
        if s > best:
            best_ls, best = float(ls), s
    lengthscales = np.full(d, best_ls)
    if not ard:
        return lengthscales, best

    varying = np.flatnonzero(X.max(axis=0) > X.min(axis=0)) if len(X) else []
    for _ in range(ard_sweeps):
        for j in varying:
            center = lengthscales[j]
            for v in _grid(center, grid_points):
                if v == center:
                    continue
                trial = lengthscales.copy()
                trial[j] = v
                s = score(trial)
                if s > best:
                    lengthscales, best = trial, s
    return lengthscales, best


@dataclass
class GpFit:
    X: np.ndarray  # training inputs (standardized)
    alpha: np.ndarray  # K^-1 y
    lengthscales: np.ndarray
    variance: float
    jitter: float

    def predict(self, Xq: np.ndarray) -> np.ndarray:
        Xq = np.atleast_2d(Xq)
        out = np.empty(len(Xq))
        for start in range(0, len(Xq), _BLOCK):
            out[start:start + _BLOCK] = matern32(Xq[start:start + _BLOCK], self.X, self.lengthscales,
                                                 self.variance) @ self.alpha
        return out


def fit_gp(X: np.ndarray, y: np.ndarray, lengthscales, variance: float = 1.0, jitter: float = 1e-8) -> GpFit:
    L, used = _factor(X, lengthscales, variance, jitter)
    alpha = cho_solve((L, True), y, check_finite=False)
    return GpFit(X=np.array(X, dtype=float), alpha=alpha, lengthscales=np.asarray(lengthscales, dtype=float),
                 variance=float(variance), jitter=used)
