"""Cost regressors trained on feasible samples: OLS, piecewise-linear
(cluster then regress), Gaussian processes with Matérn 3/2 kernels
(isotropic and ARD) and a one-hidden-layer MLP.

OLS runs on raw loads with an intercept column. The GP and MLP see
standardized inputs and a z-scored target; predictions are mapped back to
cost units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular

from ._common import DimensionMismatchError, Standardizer, check_features, merge_hyperparameters, require
from .dataset import Dataset
from .gp import SQRT3, GpFit, fit_gp, fit_hyperparameters
from .kmeans import kmeans, nearest_centroid
from .mlp import MlpSchedule, train_mlp
from .seeding import make_rng

__all__ = [
    "REGRESSOR_KINDS",
    "RegressorSpec",
    "SingularSystemError",
    "TrainedRegressor",
    "fit_regressor",
    "ols",
    "predict_cost",
    "train_regressor",
]

_GP = {
    "jitter": 1e-8, "max_points": 10000, "grid_points": 9, "grid_subsample": 2000,
    "lengthscale": None, "seed": 0,
}
DEFAULTS: dict[str, dict] = {
    "linear": {},
    "piecewise_linear": {"segments": 4, "n_init": 4, "seed": 0},
    "gp_matern32": dict(_GP),
    "gp_ard_matern32": {**_GP, "ard_sweeps": 2},
    # Longer and noisier than the classifier's schedule: with 0.01 and batch 32
    # the z-scored cost is underfit and the result depends strongly on the seed.
    "mlp": {
        "hidden": 10, "epochs": 300, "batch_size": 16, "learning_rate": 0.2,
        "decay": 0.5, "decay_every": 75, "seed": 0,
    },
}
REGRESSOR_KINDS = tuple(DEFAULTS)


class SingularSystemError(ArithmeticError):
    """The least-squares design matrix is rank deficient."""


@dataclass(frozen=True)
class RegressorSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        hp = merge_hyperparameters(self.kind, DEFAULTS, self.hyperparameters)
        if self.kind == "piecewise_linear":
            require(int(hp["segments"]) >= 1, "segments must be >= 1")
        if self.kind.startswith("gp_"):
            require(hp["jitter"] >= 0, "jitter must be >= 0")
            require(int(hp["max_points"]) >= 1, "max_points must be >= 1")
            ls = hp["lengthscale"]
            require(ls is None or np.all(np.asarray(ls, dtype=float) > 0), "lengthscales must be > 0")
        return hp


def ols(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Least squares with intercept via Householder QR; returns ``(coef, intercept)``.

    Columns that are exactly constant (e.g. buses that never carry load) are
    absorbed by the intercept and get a zero coefficient. Any remaining rank
    deficiency raises :class:`SingularSystemError`.
    """
    n, d = X.shape
    active = np.flatnonzero(X.max(axis=0, initial=-np.inf) > X.min(axis=0, initial=np.inf))
    A = np.hstack([X[:, active], np.ones((n, 1))])
    if n < A.shape[1]:
        raise SingularSystemError(f"{n} samples cannot determine {A.shape[1]} coefficients")
    Q, R = np.linalg.qr(A)
    diag = np.abs(np.diag(R))
    if diag.min(initial=np.inf) <= max(n, d + 1) * np.finfo(float).eps * diag.max(initial=0.0):
        raise SingularSystemError("design matrix is rank deficient (collinear loads)")
    beta = solve_triangular(R, Q.T @ y)
    coef = np.zeros(d)
    coef[active] = beta[:-1]
    return coef, float(beta[-1])


@dataclass
class TrainedRegressor:
    kind: str
    hyperparameters: dict
    standardizer: Standardizer
    parameters: dict
    metadata: dict = field(default_factory=dict)
    _one: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self._one = _compile(self)

    @property
    def dim(self) -> int:
        return len(self.standardizer.mean)

    def predict(self, X) -> np.ndarray:
        X = check_features(X, self.dim)
        p = self.parameters
        if self.kind == "linear":
            return X @ p["coef"] + p["intercept"]
        if self.kind == "piecewise_linear":
            seg = nearest_centroid(self.standardizer.transform(X), p["centroids"])
            return np.einsum("ij,ij->i", X, p["coef"][seg]) + p["intercept"][seg]
        Xs = self.standardizer.transform(X)
        if self.kind.startswith("gp_"):
            z = p["gp"].predict(Xs)
        else:
            net = p["net"]
            z = np.tanh(Xs @ net.W1 + net.b1) @ net.w2 + net.b2
        return z * p["target_std"] + p["target_mean"]


def _compile(model: TrainedRegressor) -> Callable[[np.ndarray], float]:
    p = model.parameters
    mean, std = model.standardizer.mean, model.standardizer.std
    if model.kind == "linear":
        dot, intercept = p["coef"].dot, p["intercept"]
        return lambda x: float(dot(x) + intercept)
    if model.kind == "piecewise_linear":
        centroids, coef, intercept = p["centroids"], p["coef"], p["intercept"]

        def piecewise(x):
            xs = (x - mean) / std
            seg = int(np.argmin(((centroids - xs) ** 2).sum(axis=1)))
            return float(coef[seg] @ x) + float(intercept[seg])

        return piecewise
    ym, ys = p["target_mean"], p["target_std"]
    if model.kind.startswith("gp_"):
        gp: GpFit = p["gp"]
        # Fold standardization and lengthscales into one affine map of the query.
        scale = SQRT3 / (gp.lengthscales * std)
        offset = mean * scale
        stored = gp.X * (SQRT3 / gp.lengthscales)
        weights = gp.alpha * (gp.variance * ys)

        def gp_one(x):
            diff = stored - (x * scale - offset)
            r = np.sqrt(np.einsum("ij,ij->i", diff, diff))
            return float(((1.0 + r) * np.exp(-r)) @ weights) + ym

        return gp_one
    net = p["net"]
    W1 = net.W1 / std[:, None]
    b1 = net.b1 - mean @ W1
    w2 = net.w2 * ys
    b2 = net.b2 * ys + ym
    return lambda x: float(np.tanh(x @ W1 + b1) @ w2) + b2


def _fit_piecewise(X, Xs, y, hp):
    k = int(hp["segments"])
    d = X.shape[1]
    km = kmeans(Xs, k, make_rng(int(hp["seed"]), "kmeans"), n_init=int(hp["n_init"]))
    coef = np.empty((k, d))
    intercept = np.empty(k)
    for j in range(k):
        members = km.labels == j
        if members.sum() < d + 1:
            raise SingularSystemError(f"segment {j} has {int(members.sum())} samples, need >= {d + 1}")
        coef[j], intercept[j] = ols(X[members], y[members])
    return {"centroids": km.centroids, "coef": coef, "intercept": intercept}


def _fit_gp(Xs, yz, hp, ard, metadata):
    rng = make_rng(int(hp["seed"]), "gp")
    n = len(Xs)
    cap = int(hp["max_points"])
    if n > cap:
        keep = np.sort(rng.permutation(n)[:cap])
        Xs, yz = Xs[keep], yz[keep]
        metadata["gp_subsampled_from"] = n
    metadata["gp_points"] = len(Xs)
    if hp["lengthscale"] is not None:
        ls = np.broadcast_to(np.asarray(hp["lengthscale"], dtype=float), (Xs.shape[1],)).copy()
    else:
        m = min(len(Xs), int(hp["grid_subsample"]))
        sub = np.sort(rng.permutation(len(Xs))[:m])
        ls, lml = fit_hyperparameters(
            Xs[sub], yz[sub], ard=ard, variance=1.0, jitter=float(hp["jitter"]),
            grid_points=int(hp["grid_points"]), ard_sweeps=int(hp.get("ard_sweeps", 0)),
        )
        metadata["gp_grid_points"] = m
        metadata["gp_log_marginal_likelihood"] = lml
    return {"gp": fit_gp(Xs, yz, ls, variance=1.0, jitter=float(hp["jitter"]))}


def fit_regressor(spec: RegressorSpec, X, y) -> TrainedRegressor:
    hp = spec.resolved()
    X = check_features(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    n, d = X.shape
    if len(y) != n:
        raise ValueError("X and y lengths differ")
    if n < d + 1:
        raise ValueError(f"need at least {d + 1} feasible samples, got {n}")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")

    standardizer = Standardizer.fit(X, spec.kind != "linear")
    metadata: dict = {"n_train": n}
    if spec.kind == "linear":
        coef, intercept = ols(X, y)
        params: dict = {"coef": coef, "intercept": intercept}
    elif spec.kind == "piecewise_linear":
        params = _fit_piecewise(X, standardizer.transform(X), y, hp)
    else:
        Xs = standardizer.transform(X)
        ym = float(y.mean())
        ys = float(y.std())
        if not ys > 0:
            ys = 1.0
        yz = (y - ym) / ys
        if spec.kind == "mlp":
            schedule = MlpSchedule(
                hidden=int(hp["hidden"]), epochs=int(hp["epochs"]), batch_size=int(hp["batch_size"]),
                learning_rate=float(hp["learning_rate"]), decay=float(hp["decay"]),
                decay_every=int(hp["decay_every"]),
            )
            params = {"net": train_mlp(Xs, yz, "mse", schedule, make_rng(int(hp["seed"]), "mlp"))}
        else:
            params = _fit_gp(Xs, yz, hp, spec.kind == "gp_ard_matern32", metadata)
        params["target_mean"] = ym
        params["target_std"] = ys
    return TrainedRegressor(spec.kind, hp, standardizer, params, metadata)


def train_regressor(spec: RegressorSpec, train: Dataset) -> TrainedRegressor:
    """Fit a cost regressor on the feasible samples of ``train``."""
    feasible = train.feasible_only()
    return fit_regressor(spec, feasible.loads, feasible.cost)


def predict_cost(model: TrainedRegressor, load) -> float:
    x = load if type(load) is np.ndarray else np.asarray(load, dtype=float)
    if x.shape != (model.dim,):
        raise DimensionMismatchError(f"load must have length {model.dim}, got shape {x.shape}")
    return model._one(x)
