from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_STD_FLOOR = 1e-12


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray, enabled: bool = True) -> Standardizer:
        d = X.shape[1]
        if not enabled:
            return cls(np.zeros(d), np.ones(d))
        std = X.std(axis=0)
        # Constant features pass through centered but unscaled.
        std = np.where(std > _STD_FLOOR, std, 1.0)
        return cls(X.mean(axis=0), std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


def check_features(X, d: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if d is not None and X.shape[1] != d:
        raise DimensionMismatchError(f"model expects {d} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    return X


def merge_hyperparameters(kind: str, defaults: dict[str, dict], overrides: dict | None) -> dict:
    if kind not in defaults:
        raise ValueError(f"unknown kind {kind!r}; valid kinds: {', '.join(defaults)}")
    merged = dict(defaults[kind])
    for key, value in (overrides or {}).items():
        if key not in merged:
            raise ValueError(f"{kind}: unknown hyperparameter {key!r}; valid: {', '.join(sorted(merged))}")
        merged[key] = value
    return merged


def require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)
