"""Evaluation: accuracy, relative error, run-time gain, daily-profile sweeps,
K-means error segmentation and PCA projection of loads, plus the CSV and
key=value report writers used by the command line.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from .classify import TrainedClassifier, predict_feasible
from .dataset import Dataset
from .kmeans import kmeans
from .netcase import DcModel
from .opf import solve_opf
from .regress import TrainedRegressor, predict_cost
from .seeding import make_rng

__all__ = [
    "DailyProfile",
    "ErrorSegmentation",
    "EvalReport",
    "ExactCostOracle",
    "ZeroCostError",
    "accuracy",
    "classification_accuracy",
    "kmeans_segment",
    "load_daily_profile",
    "mean_relative_error",
    "pca_project",
    "profile_sweep",
    "relative_errors",
    "runtime_gain",
    "time_per_call",
    "write_pca_csv",
    "write_profile_csv",
    "write_report",
    "write_residuals_csv",
]


class ZeroCostError(ValueError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"sample {index} has non-positive true cost; relative error undefined")


def accuracy(predicted, labels) -> float:
    predicted = np.asarray(predicted).astype(int)
    labels = np.asarray(labels).astype(int)
    if len(labels) == 0:
        raise ValueError("empty test set")
    if predicted.shape != labels.shape:
        raise ValueError("predictions and labels differ in length")
    return int((predicted == labels).sum()) / len(labels)


def classification_accuracy(model: TrainedClassifier, test: Dataset) -> float:
    """Fraction of test samples whose predicted feasibility matches the label."""
    if test.n == 0:
        raise ValueError("empty test set")
    return accuracy(model.predict(test.loads), test.feasible)


def relative_errors(predicted, true) -> np.ndarray:
    predicted = np.asarray(predicted, dtype=float)
    true = np.asarray(true, dtype=float)
    if len(true) == 0:
        raise ValueError("no feasible samples to evaluate")
    bad = np.flatnonzero(~(true > 0))
    if len(bad):
        raise ZeroCostError(int(bad[0]))
    return np.abs(predicted - true) / true


def mean_relative_error(model: TrainedRegressor, test: Dataset) -> tuple[float, float]:
    """Mean and per-sample standard deviation of ``|C_hat - C| / C`` over feasible samples."""
    feasible = test.feasible_only()
    rel = relative_errors(model.predict(feasible.loads) if feasible.n else [], feasible.cost)
    return float(rel.mean()), float(rel.std())


def time_per_call(fn: Callable, inputs, groups: int = 5, min_calls: int = 100, min_group_seconds: float = 1e-3) -> float:
    """Median over ``groups`` of the mean wall time per ``fn(x)`` call.

    Calls are timed in batches with a monotonic clock after one warm-up call;
    a group's batch is repeated until it lasts at least ``min_group_seconds``
    so sub-microsecond calls are resolved.
    """
    inputs = list(inputs)
    if not inputs:
        raise ValueError("nothing to time")
    while len(inputs) < min_calls:
        inputs = inputs + inputs
    fn(inputs[0])
    chunks = [inputs[i::groups] for i in range(groups)]
    means = []
    for chunk in chunks:
        reps = 0
        start = time.perf_counter()
        while True:
            for x in chunk:
                fn(x)
            reps += 1
            elapsed = time.perf_counter() - start
            if elapsed >= min_group_seconds:
                break
        means.append(elapsed / (reps * len(chunk)))
    return float(np.median(means))


def _median_of_means(values: np.ndarray, groups: int = 5) -> float:
    return float(np.median([chunk.mean() for chunk in np.array_split(np.asarray(values, dtype=float), groups)]))


def runtime_gain(
    model,
    test: Dataset,
    model_kind: str | None = None,
    exact: Callable | None = None,
    calls: int = 100,
) -> tuple[float, float, float]:
    """Exact-solve time over prediction time; returns ``(gain, exact_s, predict_s)``.

    Prediction time is that of the model's compiled predictor, after
    validating the test loads once. With ``exact`` (a callable taking a load
    vector) the exact solve is re-timed in this process on up to ``calls`` test loads; otherwise the
    solve times recorded in the dataset are used.
    """
    if test.n == 0:
        raise ValueError("empty test set")
    if model_kind is None:
        model_kind = "classifier" if isinstance(model, TrainedClassifier) else "regressor"
    if model_kind not in ("classifier", "regressor"):
        raise ValueError(f"model_kind must be 'classifier' or 'regressor', got {model_kind!r}")
    check = predict_feasible if model_kind == "classifier" else predict_cost
    loads = [test.loads[i] for i in range(min(test.n, max(calls, 1)))]
    # Inputs are validated once here; the timed loop runs the compiled predictor.
    for x in loads:
        check(model, x)
    predict_s = time_per_call(model._one, loads, min_calls=calls)
    if exact is not None:
        exact_s = time_per_call(exact, loads, min_calls=calls, min_group_seconds=0.0)
    else:
        exact_s = _median_of_means(test.solve_time)
    if not (predict_s > 0 and exact_s > 0):
        raise ValueError("timer resolution insufficient")
    return exact_s / predict_s, exact_s, predict_s


@dataclass(frozen=True)
class DailyProfile:
    multipliers: tuple[float, ...]

    def __post_init__(self):
        m = tuple(float(v) for v in self.multipliers)
        object.__setattr__(self, "multipliers", m)
        if len(m) != 24:
            raise ValueError(f"daily profile needs 24 hourly values, got {len(m)}")
        if not all(0 < v <= 1 for v in m):
            raise ValueError("profile multipliers must lie in (0, 1]")
        if max(m) != 1.0:
            raise ValueError("profile must be peak-normalized (max exactly 1)")

    @classmethod
    def constant(cls) -> DailyProfile:
        return cls((1.0,) * 24)


def load_daily_profile(path: str | Path | None = None) -> DailyProfile:
    """Read ``hour,multiplier`` rows; defaults to the bundled profile."""
    if path is None:
        path = Path(str(resources.files("opfproxy") / "data" / "daily_profile.csv"))
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    rows.sort(key=lambda r: int(r["hour"]))
    if [int(r["hour"]) for r in rows] != list(range(24)):
        raise ValueError("profile must list hours 0..23 exactly once")
    return DailyProfile(tuple(float(r["multiplier"]) for r in rows))


class ExactCostOracle:
    """Callable returning the exact OPF cost (None when infeasible); usable as a sweep model."""

    def __init__(self, model: DcModel):
        self.model = model

    def __call__(self, load) -> float | None:
        return solve_opf(self.model, load).cost


def profile_sweep(
    model,
    casebase: DcModel,
    profile: DailyProfile,
    peak,
    per_hour_samples: int = 20,
    seed: int = 0,
    jitter: float = 0.05,
) -> np.ndarray:
    """Mean relative error for each hour of the day (NaN when no sample is feasible).

    Hour ``h`` evaluates ``peak * profile[h] * (1 + u)`` with ``u`` uniform in
    ``[-jitter, jitter]`` independently per bus, labels each load with the
    exact solver and compares against ``model`` (a trained regressor or any
    callable mapping a load to a cost).
    """
    if per_hour_samples < 1:
        raise ValueError("per_hour_samples must be >= 1")
    if jitter < 0:
        raise ValueError("jitter must be >= 0")
    peak = np.asarray(peak, dtype=float)
    if peak.shape != (casebase.n_b,):
        raise ValueError(f"peak must have length {casebase.n_b}")
    predict = (lambda x: predict_cost(model, x)) if isinstance(model, TrainedRegressor) else model
    rng = make_rng(seed, "sweep")
    out = np.full(24, np.nan)
    for hour, mult in enumerate(profile.multipliers):
        errs = []
        for _ in range(per_hour_samples):
            load = peak * mult * (1.0 + rng.uniform(-jitter, jitter, size=len(peak)))
            truth = solve_opf(casebase, load)
            if not truth.feasible:
                continue
            errs.append(float(relative_errors([predict(load)], [truth.cost])[0]))
        if errs:
            out[hour] = float(np.mean(errs))
    return out


@dataclass(frozen=True)
class ErrorSegmentation:
    centroids: np.ndarray  # ascending
    labels: np.ndarray  # 0 = lowest-error segment
    intervals: tuple[tuple[float, float], ...]
    loads: np.ndarray | None = None


def kmeans_segment(residuals, loads=None, k: int = 3, seed: int = 0, max_iter: int = 300) -> ErrorSegmentation:
    """Split relative errors into ``k`` ordered segments by 1-D K-means.

    Segment boundaries are the midpoints between adjacent sorted centroids;
    the intervals run from 0 to the largest error.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    r = np.asarray(residuals, dtype=float).reshape(-1)
    if len(np.unique(r)) < k:
        raise ValueError(f"need at least k={k} distinct residual values, got {len(np.unique(r))}")
    km = kmeans(r[:, None], k, make_rng(seed, "segment"), max_iter=max_iter, n_init=10)
    order = np.argsort(km.centroids[:, 0], kind="stable")
    centroids = km.centroids[order, 0]
    rank = np.empty(k, dtype=int)
    rank[order] = np.arange(k)
    labels = rank[km.labels]
    cuts = 0.5 * (centroids[:-1] + centroids[1:])
    edges = [0.0, *cuts.tolist(), float(r.max())]
    intervals = tuple((edges[i], edges[i + 1]) for i in range(k))
    return ErrorSegmentation(centroids, labels, intervals, None if loads is None else np.asarray(loads, dtype=float))


def pca_project(loads, dims: int) -> tuple[np.ndarray, np.ndarray]:
    """Project mean-centered rows onto the top ``dims`` covariance eigenvectors.

    Returns ``(projection, explained_variance_ratio)``. Each component's sign
    is fixed so its largest-magnitude loading is positive.
    """
    X = np.asarray(loads, dtype=float)
    if X.ndim != 2 or len(X) < 2:
        raise ValueError("need at least 2 samples")
    if not 1 <= dims <= X.shape[1]:
        raise ValueError(f"dims must be in [1, {X.shape[1]}], got {dims}")
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / (len(X) - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order]
    total = vals.sum()
    if not total > 0:
        return np.zeros((len(X), dims)), np.zeros(dims)
    pivot = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    return Xc @ vecs[:, :dims], vals[:dims] / total


@dataclass
class EvalReport:
    metrics: dict[str, float]
    timings: dict[str, float] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def lines(self) -> list[str]:
        items = {**{f"meta.{k}": v for k, v in self.metadata.items()}, **self.metrics}
        return [f"{k}={_fmt(v)}" for k, v in items.items()]

    def timing_lines(self) -> list[str]:
        return [f"{k}={_fmt(v)}" for k, v in self.timings.items()]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_report(report: EvalReport, path: str | Path, timings_path: str | Path | None = None) -> None:
    """Metrics to ``path``; timings (never reproducible) to a separate log."""
    Path(path).write_text("\n".join(report.lines()) + "\n", encoding="utf-8")
    if timings_path is not None:
        Path(timings_path).write_text("\n".join(report.timing_lines()) + "\n", encoding="utf-8")


def _csv_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else repr(float(v))
    return str(v)


def _write_csv(path, header, rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_value(v) for v in row])


def write_residuals_csv(path, loads, true_cost, predicted_cost, rel_err, segment=None) -> None:
    loads = np.asarray(loads, dtype=float)
    header = [f"l_{i + 1}" for i in range(loads.shape[1])] + ["true_cost", "predicted_cost", "relative_error"]
    if segment is not None:
        header.append("segment")
    rows = []
    for i in range(len(loads)):
        row = [*loads[i].tolist(), float(true_cost[i]), float(predicted_cost[i]), float(rel_err[i])]
        if segment is not None:
            row.append(int(segment[i]))
        rows.append(row)
    _write_csv(path, header, rows)


def write_profile_csv(path, errors) -> None:
    _write_csv(path, ["hour", "mean_rel_err"], [[h, float(e)] for h, e in enumerate(errors)])


def write_pca_csv(path, projection, segment) -> None:
    projection = np.asarray(projection, dtype=float)
    header = [f"pc_{i + 1}" for i in range(projection.shape[1])] + ["segment"]
    _write_csv(path, header, [[*projection[i].tolist(), int(segment[i])] for i in range(len(projection))])
