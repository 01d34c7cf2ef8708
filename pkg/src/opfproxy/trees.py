"""Binary classification trees (CART with Gini impurity) and their ensembles.

A fitted tree is a set of flat arrays indexed by node id, root at 0. Leaves
have ``feature == -1`` and carry the fraction of positive labels in
``value``; a leaf predicts 1 when that fraction is at least one half.

Split selection is deterministic: candidate thresholds are midpoints of
consecutive distinct sorted values and, among equal impurities, the
candidate with the lowest (feature index, threshold) wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Tree", "fit_tree", "forest_vote", "resolve_max_features"]


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray  # int64, -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # positive fraction per node

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Predicted classes for rows of ``X``."""
        X = np.atleast_2d(X)
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while len(active):
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return (self.value[node] >= 0.5).astype(np.int64)

    def predict_one(self, x) -> int:
        feature, threshold, left, right = self.feature, self.threshold, self.left, self.right
        node = 0
        while feature[node] >= 0:
            node = left[node] if x[feature[node]] <= threshold[node] else right[node]
        return int(self.value[node] >= 0.5)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d: dict) -> Tree:
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=float),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=float),
        )


def resolve_max_features(max_features, d: int) -> int:
    if max_features is None or max_features == "all":
        return d
    if max_features == "sqrt":
        return max(1, int(math.isqrt(d)))
    k = int(max_features)
    if not 1 <= k <= d:
        raise ValueError(f"max_features must be in [1, {d}], got {k}")
    return k


def _best_exhaustive(x: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best midpoint split of one feature: ``(impurity, threshold)`` or None."""
    n = len(x)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    pos = np.cumsum(y[order])[:-1]
    n_left = np.arange(1, n)
    valid = xs[:-1] < xs[1:]
    if min_leaf > 1:
        valid &= (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not valid.any():
        return None
    n_right = n - n_left
    p_left = pos / n_left
    p_right = (pos[-1] + y[order[-1]] - pos) / n_right
    # Weighted Gini impurity: sum over sides of n_side * 2 p (1 - p), divided by n.
    impurity = (n_left * p_left * (1.0 - p_left) + n_right * p_right * (1.0 - p_right)) * (2.0 / n)
    impurity = np.where(valid, impurity, np.inf)
    i = int(np.argmin(impurity))
    lo, hi = xs[i], xs[i + 1]
    thr = 0.5 * (lo + hi)
    if thr >= hi:
        thr = lo
    return float(impurity[i]), float(thr)


def _best_random(x: np.ndarray, y: np.ndarray, min_leaf: int, rng: np.random.Generator):
    lo, hi = x.min(), x.max()
    if not lo < hi:
        return None
    thr = float(rng.uniform(lo, hi))
    left = x <= thr
    n = len(x)
    n_left = int(left.sum())
    n_right = n - n_left
    if n_left < max(1, min_leaf) or n_right < max(1, min_leaf):
        return None
    pl = y[left].mean()
    pr = y[~left].mean()
    impurity = (n_left * pl * (1 - pl) + n_right * pr * (1 - pr)) * (2.0 / n)
    return float(impurity), thr


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    *,
    max_features: int | None = None,
    random_thresholds: bool = False,
    max_depth: int | None = None,
    min_samples_split: int = 2,
    min_samples_leaf: int = 1,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Grow a tree on features ``X`` (n, d) and binary labels ``y``.

    ``max_features`` features are examined per node (all by default); when it
    is smaller than ``d`` they are drawn at random, and drawing continues past
    constant features until enough usable ones were seen. With
    ``random_thresholds`` each examined feature gets a single uniform cut
    between its node minimum and maximum (extremely randomized trees).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    k = d if max_features is None else max_features
    if (k < d or random_thresholds) and rng is None:
        raise ValueError("a random generator is required for randomized trees")

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def new_node(frac: float) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(frac)
        return len(feature) - 1

    root = new_node(float(y.mean()))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yi = y[idx]
        frac = value[node]
        if (
            frac == 0.0
            or frac == 1.0
            or len(idx) < min_samples_split
            or (max_depth is not None and depth >= max_depth)
        ):
            continue

        order = range(d) if k >= d else rng.permutation(d)
        best = None  # (impurity, feature, threshold)
        usable = 0
        for f in order:
            xf = X[idx, f]
            if random_thresholds:
                cand = _best_random(xf, yi, min_samples_leaf, rng)
            else:
                cand = _best_exhaustive(xf, yi, min_samples_leaf)
            if xf.min() < xf.max():
                usable += 1
            if cand is not None:
                key = (cand[0], int(f), cand[1])
                if best is None or key < best:
                    best = key
            if usable >= k:
                break
        if best is None:
            continue

        _, f, thr = best
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(float(y[li].mean()))
        right[node] = new_node(float(y[ri].mean()))
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=float),
    )


def forest_vote(trees: list[Tree], X: np.ndarray) -> np.ndarray:
    """Majority vote of the trees; an even split goes to class 1."""
    votes = np.zeros(len(np.atleast_2d(X)))
    for tree in trees:
        votes += tree.predict(X)
    return (2 * votes >= len(trees)).astype(np.int64)
