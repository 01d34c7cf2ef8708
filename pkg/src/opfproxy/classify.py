"""Feasibility classifiers: trivial, Gaussian naive Bayes, logistic regression,
CART, random forest, extremely randomized trees and a one-hidden-layer MLP.

Inputs are standardized with training-set statistics (``standardize=True``
by default) before any kind sees them. A training set holding a single class
yields a constant predictor for that class, except for ``trivial`` which
always predicts 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._common import DimensionMismatchError, Standardizer, check_features, merge_hyperparameters, require
from .dataset import Dataset
from .mlp import Mlp, MlpSchedule, train_mlp
from .seeding import derive_seed, make_rng
from .trees import Tree, fit_tree, forest_vote, resolve_max_features

__all__ = [
    "CLASSIFIER_KINDS",
    "ClassifierSpec",
    "TrainedClassifier",
    "fit_classifier",
    "predict_feasible",
    "train_classifier",
]

_TREE = {"max_depth": None, "min_samples_split": 2, "min_samples_leaf": 1, "standardize": True}
_MLP = {
    "hidden": 10, "epochs": 200, "batch_size": 32, "learning_rate": 0.01,
    "decay": 0.5, "decay_every": 50, "seed": 0, "standardize": True,
}
DEFAULTS: dict[str, dict] = {
    "trivial": {},
    "gaussian_nb": {"var_floor": 1e-9, "standardize": True},
    "logistic": {"l2": 1e-4, "max_iter": 100, "standardize": True},
    "decision_tree": dict(_TREE),
    "random_forest": {**_TREE, "n_trees": 100, "max_features": "sqrt", "bootstrap": True, "seed": 0},
    "extra_trees": {**_TREE, "n_trees": 100, "max_features": "sqrt", "bootstrap": False, "seed": 0},
    "mlp": dict(_MLP),
}
CLASSIFIER_KINDS = tuple(DEFAULTS)


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        hp = merge_hyperparameters(self.kind, DEFAULTS, self.hyperparameters)
        if "n_trees" in hp:
            require(int(hp["n_trees"]) >= 1, "n_trees must be >= 1")
        if "min_samples_split" in hp:
            require(int(hp["min_samples_split"]) >= 2, "min_samples_split must be >= 2")
            require(int(hp["min_samples_leaf"]) >= 1, "min_samples_leaf must be >= 1")
            require(hp["max_depth"] is None or int(hp["max_depth"]) >= 1, "max_depth must be >= 1")
        if self.kind == "logistic":
            require(hp["l2"] >= 0, "l2 must be >= 0")
        if self.kind == "gaussian_nb":
            require(hp["var_floor"] > 0, "var_floor must be > 0")
        return hp


@dataclass
class TrainedClassifier:
    kind: str
    hyperparameters: dict
    standardizer: Standardizer
    parameters: dict
    _one: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self._one = _compile(self)

    @property
    def dim(self) -> int:
        return len(self.standardizer.mean)

    def predict(self, X) -> np.ndarray:
        """Predicted feasibility (0/1) for each row of ``X``."""
        X = check_features(X, self.dim)
        p = self.parameters
        if self.kind == "trivial":
            return np.ones(len(X), dtype=np.int64)
        if "constant" in p:
            return np.full(len(X), int(p["constant"]), dtype=np.int64)
        Xs = self.standardizer.transform(X)
        if self.kind == "gaussian_nb":
            return (_nb_margin(p, Xs) >= 0).astype(np.int64)
        if self.kind == "logistic":
            return (Xs @ p["weights"] + p["bias"] >= 0).astype(np.int64)
        if self.kind == "decision_tree":
            return p["trees"][0].predict(Xs)
        if self.kind in ("random_forest", "extra_trees"):
            return forest_vote(p["trees"], Xs)
        if self.kind == "mlp":
            net = p["net"]
            z = np.tanh(Xs @ net.W1 + net.b1) @ net.w2 + net.b2
            return (z >= 0).astype(np.int64)
        raise ValueError(f"unknown kind {self.kind!r}")


def _nb_margin(p: dict, Xs: np.ndarray) -> np.ndarray:
    """log P(1 | x) - log P(0 | x) up to the shared evidence term."""
    mean, var, log_prior = p["mean"], p["var"], p["log_prior"]
    ll = -0.5 * (np.log(2 * np.pi * var)[None] + (Xs[:, None, :] - mean[None]) ** 2 / var[None]).sum(axis=2)
    ll += log_prior[None]
    return ll[:, 1] - ll[:, 0]


def _compile(model: TrainedClassifier) -> Callable[[np.ndarray], int]:
    """Single-sample predictor with the per-call overhead kept minimal."""
    p = model.parameters
    mean, std = model.standardizer.mean, model.standardizer.std
    if model.kind == "trivial":
        return lambda x: 1
    if "constant" in p:
        c = int(p["constant"])
        return lambda x: c
    if model.kind == "logistic":
        w = p["weights"] / std
        b = p["bias"] - float(w @ mean)
        return lambda x: int(float(w @ x) + b >= 0)
    if model.kind == "mlp":
        net: Mlp = p["net"]
        W1 = net.W1 / std[:, None]
        b1 = net.b1 - mean @ W1
        w2, b2 = net.w2, net.b2
        return lambda x: int(float(np.tanh(x @ W1 + b1) @ w2) + b2 >= 0)
    if model.kind == "decision_tree":
        tree = p["trees"][0]
        return lambda x: tree.predict_one((x - mean) / std)
    if model.kind in ("random_forest", "extra_trees"):
        trees = p["trees"]
        half = len(trees)

        def vote(x):
            xs = (x - mean) / std
            return int(2 * sum(t.predict_one(xs) for t in trees) >= half)

        return vote
    return lambda x: int(model.predict(x[None])[0])


def _fit_gaussian_nb(Xs, y, hp):
    mean = np.empty((2, Xs.shape[1]))
    var = np.empty_like(mean)
    prior = np.empty(2)
    for c in (0, 1):
        Xc = Xs[y == c]
        mean[c] = Xc.mean(axis=0)
        var[c] = np.maximum(Xc.var(axis=0), hp["var_floor"])
        prior[c] = len(Xc) / len(Xs)
    return {"mean": mean, "var": var, "log_prior": np.log(prior)}


def _fit_logistic(Xs, y, hp):
    """Damped Newton (IRLS) on mean cross-entropy + l2/2 * |w|^2 (bias unpenalized)."""
    n, d = Xs.shape
    Xa = np.hstack([Xs, np.ones((n, 1))])
    penalty = np.full(d + 1, float(hp["l2"]))
    penalty[-1] = 0.0
    theta = np.zeros(d + 1)

    def objective(t):
        z = Xa @ t
        return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * penalty @ (t * t))

    f = objective(theta)
    for _ in range(int(hp["max_iter"])):
        prob = 1.0 / (1.0 + np.exp(-(Xa @ theta)))
        grad = Xa.T @ (prob - y) / n + penalty * theta
        weight = prob * (1.0 - prob)
        hess = (Xa.T * weight) @ Xa / n + np.diag(penalty) + 1e-12 * np.eye(d + 1)
        step = np.linalg.solve(hess, grad)
        t = 1.0
        while True:
            cand = theta - t * step
            fc = objective(cand)
            if fc <= f or t < 1e-10:
                break
            t *= 0.5
        theta, f_old, f = cand, f, fc
        if np.abs(t * step).max() < 1e-10 or abs(f_old - f) <= 1e-15 * max(1.0, abs(f)):
            break
    return {"weights": theta[:d], "bias": float(theta[d])}


def _fit_trees(Xs, y, hp, kind):
    n, d = Xs.shape
    tree_kw = dict(
        max_depth=None if hp["max_depth"] is None else int(hp["max_depth"]),
        min_samples_split=int(hp["min_samples_split"]),
        min_samples_leaf=int(hp["min_samples_leaf"]),
    )
    if kind == "decision_tree":
        return {"trees": [fit_tree(Xs, y, **tree_kw)]}
    k = resolve_max_features(hp["max_features"], d)
    trees = []
    for t in range(int(hp["n_trees"])):
        rng = make_rng(int(hp["seed"]), "tree", t)
        if hp["bootstrap"]:
            idx = rng.integers(0, n, size=n)
            Xt, yt = Xs[idx], y[idx]
        else:
            Xt, yt = Xs, y
        trees.append(
            fit_tree(Xt, yt, max_features=k, random_thresholds=kind == "extra_trees", rng=rng, **tree_kw)
        )
    return {"trees": trees}


def _fit_mlp(Xs, y, hp):
    schedule = MlpSchedule(
        hidden=int(hp["hidden"]), epochs=int(hp["epochs"]), batch_size=int(hp["batch_size"]),
        learning_rate=float(hp["learning_rate"]), decay=float(hp["decay"]), decay_every=int(hp["decay_every"]),
    )
    return {"net": train_mlp(Xs, y, "bce", schedule, make_rng(int(hp["seed"]), "mlp"))}


def fit_classifier(spec: ClassifierSpec, X, y) -> TrainedClassifier:
    """Fit ``spec`` on feature matrix ``X`` and 0/1 labels ``y``."""
    hp = spec.resolved()
    X = check_features(X)
    y = np.asarray(y).astype(np.int64).reshape(-1)
    if len(X) == 0:
        raise ValueError("empty training set")
    if len(y) != len(X):
        raise ValueError("X and y lengths differ")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")

    standardizer = Standardizer.fit(X, bool(hp.get("standardize", False)))
    classes = np.unique(y)
    if spec.kind == "trivial":
        params: dict = {}
    elif len(classes) == 1:
        params = {"constant": int(classes[0])}
    else:
        Xs = standardizer.transform(X)
        yf = y.astype(float)
        if spec.kind == "gaussian_nb":
            params = _fit_gaussian_nb(Xs, y, hp)
        elif spec.kind == "logistic":
            params = _fit_logistic(Xs, yf, hp)
        elif spec.kind in ("decision_tree", "random_forest", "extra_trees"):
            params = _fit_trees(Xs, yf, hp, spec.kind)
        else:
            params = _fit_mlp(Xs, yf, hp)
    return TrainedClassifier(spec.kind, hp, standardizer, params)


def train_classifier(spec: ClassifierSpec, train: Dataset) -> TrainedClassifier:
    """Fit a feasibility classifier on all samples (feasible and infeasible)."""
    if train.n == 0:
        raise ValueError("empty training set")
    return fit_classifier(spec, train.loads, train.feasible.astype(np.int64))


def predict_feasible(model: TrainedClassifier, load) -> int:
    x = load if type(load) is np.ndarray else np.asarray(load, dtype=float)
    if x.shape != (model.dim,):
        raise DimensionMismatchError(f"load must have length {model.dim}, got shape {x.shape}")
    return model._one(x)
