"""Labeled learning sets ``{(l, feasible, cost)}``: generation, persistence, splitting.

Dataset CSV layout::

    l_1,...,l_nb,feasible,cost,solve_time

``feasible`` is 0/1, ``cost`` is empty for infeasible rows, floats are
written with ``repr`` so they read back bit-exactly. A JSON sidecar with the
same basename and a ``.meta`` suffix stores the case name and sampler
settings.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .netcase import DcModel
from .opf import OpfSolveError, solve_opf
from .sampler import Polytope, SamplerConfig, hit_and_run
from .seeding import derive_seed, make_rng

__all__ = [
    "CHAIN_LENGTH",
    "Dataset",
    "DatasetFormatError",
    "LabeledSample",
    "generate_dataset",
    "load",
    "meta_path",
    "save",
    "split",
]

# Samples per independent Markov chain. Chains, not workers, own the seeds, so
# the output does not depend on how many workers label them.
CHAIN_LENGTH = 1000


class DatasetFormatError(ValueError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


@dataclass(frozen=True)
class LabeledSample:
    load: np.ndarray
    feasible: bool
    cost: float | None
    solve_time: float


@dataclass
class Dataset:
    """Column-oriented learning set; ``cost`` is NaN where infeasible."""

    loads: np.ndarray
    feasible: np.ndarray
    cost: np.ndarray
    solve_time: np.ndarray
    case_name: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        loads = np.asarray(self.loads, dtype=float)
        self.loads = loads if loads.ndim == 2 else loads.reshape(len(self.feasible), -1)
        self.feasible = np.asarray(self.feasible, dtype=bool)
        self.cost = np.asarray(self.cost, dtype=float)
        self.solve_time = np.asarray(self.solve_time, dtype=float)
        n = len(self.feasible)
        if not (len(self.loads) == len(self.cost) == len(self.solve_time) == n):
            raise ValueError("dataset columns have different lengths")
        if np.any(np.isnan(self.cost) == self.feasible):
            bad = int(np.flatnonzero(np.isnan(self.cost) == self.feasible)[0])
            raise ValueError(f"sample {bad}: cost must be present iff feasible")

    @property
    def n(self) -> int:
        return len(self.feasible)

    @property
    def dim(self) -> int:
        return self.loads.shape[1]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> LabeledSample:
        feasible = bool(self.feasible[i])
        return LabeledSample(self.loads[i].copy(), feasible, float(self.cost[i]) if feasible else None,
                             float(self.solve_time[i]))

    @property
    def samples(self) -> list[LabeledSample]:
        return [self[i] for i in range(self.n)]

    def subset(self, indices) -> Dataset:
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.loads[idx], self.feasible[idx], self.cost[idx], self.solve_time[idx],
                       self.case_name, dict(self.metadata))

    def feasible_only(self) -> Dataset:
        return self.subset(np.flatnonzero(self.feasible))

    def equals(self, other: Dataset, ignore_timing: bool = False) -> bool:
        """Bit-exact comparison of all numeric columns (NaN == NaN)."""
        same = (
            self.loads.shape == other.loads.shape
            and np.array_equal(self.loads, other.loads)
            and np.array_equal(self.feasible, other.feasible)
            and np.array_equal(self.cost, other.cost, equal_nan=True)
        )
        if not ignore_timing:
            same = same and np.array_equal(self.solve_time, other.solve_time)
        return bool(same)


def _label_chain(args) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    model, poly, config, chain_index, count, offset = args
    chain_config = SamplerConfig(
        seed=derive_seed(config.seed, "chain", chain_index),
        burn_in=config.burn_in,
        thinning=config.thinning,
        alpha_min=config.alpha_min,
        alpha_max=config.alpha_max,
    )
    loads = hit_and_run(poly, chain_config, count)
    feasible = np.zeros(count, dtype=bool)
    cost = np.full(count, np.nan)
    times = np.zeros(count)
    for i, load in enumerate(loads):
        try:
            out = solve_opf(model, load)
        except OpfSolveError as exc:
            raise OpfSolveError(f"sample {offset + i}: {exc.message}", load) from exc
        feasible[i] = out.feasible
        if out.feasible:
            cost[i] = out.cost
        times[i] = out.solve_time
    return loads, feasible, cost, times


def generate_dataset(
    model: DcModel,
    poly: Polytope,
    config: SamplerConfig,
    n: int,
    workers: int = 1,
    case_name: str | None = None,
) -> Dataset:
    """Sample ``n`` loads with hit-and-run and label each one with the exact OPF.

    Sample ``j`` belongs to chain ``j // CHAIN_LENGTH``, seeded from
    ``(config.seed, "chain", chain_index)``. Chains are labeled in parallel
    when ``workers > 1`` and merged in index order.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if poly.n_b != model.n_b:
        raise ValueError(f"polytope dimension {poly.n_b} does not match network ({model.n_b} buses)")
    jobs = [
        (model, poly, config, c, min(CHAIN_LENGTH, n - start), start)
        for c, start in enumerate(range(0, n, CHAIN_LENGTH))
    ]
    if workers == 1 or len(jobs) == 1:
        parts = [_label_chain(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            parts = list(pool.map(_label_chain, jobs))
    loads, feasible, cost, times = (np.concatenate(col) for col in zip(*parts))
    metadata = {"sampler": config.to_dict(), "chain_length": CHAIN_LENGTH, "n": n}
    return Dataset(loads, feasible, cost, times, case_name or model.name, metadata)


def split(data: Dataset, train_fraction: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Uniform random train/test partition with ``round(train_fraction * n)`` training rows."""
    if not (0 < train_fraction < 1):
        raise ValueError("train_fraction must be in (0, 1)")
    n_train = int(math.floor(train_fraction * data.n + 0.5))
    if n_train == 0 or n_train == data.n:
        raise ValueError(f"split of {data.n} samples at {train_fraction} leaves an empty partition")
    order = make_rng(seed, "split").permutation(data.n)
    return data.subset(np.sort(order[:n_train])), data.subset(np.sort(order[n_train:]))


def meta_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".meta")


def save(data: Dataset, path: str | Path) -> None:
    path = Path(path)
    header = [f"l_{i + 1}" for i in range(data.dim)] + ["feasible", "cost", "solve_time"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(data.n):
            feasible = bool(data.feasible[i])
            writer.writerow(
                [repr(float(v)) for v in data.loads[i]]
                + [int(feasible), repr(float(data.cost[i])) if feasible else "", repr(float(data.solve_time[i]))]
            )
    meta = {"case_name": data.case_name, **data.metadata}
    meta_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load(path: str | Path) -> Dataset:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetFormatError("file is empty (missing header)")
    header = rows[0]
    if len(header) < 4 or header[-3:] != ["feasible", "cost", "solve_time"]:
        raise DatasetFormatError("header must end with feasible,cost,solve_time", row=1)
    dim = len(header) - 3
    if header[:dim] != [f"l_{i + 1}" for i in range(dim)]:
        raise DatasetFormatError("load columns must be named l_1..l_nb", row=1)

    n = len(rows) - 1
    loads = np.empty((n, dim))
    feasible = np.empty(n, dtype=bool)
    cost = np.full(n, np.nan)
    times = np.empty(n)
    for k, row in enumerate(rows[1:]):
        rowno = k + 2
        if len(row) != dim + 3:
            raise DatasetFormatError(f"expected {dim + 3} fields, got {len(row)}", row=rowno)
        try:
            loads[k] = [float(v) for v in row[:dim]]
            flag = row[dim]
            if flag not in ("0", "1"):
                raise DatasetFormatError(f"feasible must be 0 or 1, got {flag!r}", row=rowno)
            feasible[k] = flag == "1"
            if feasible[k]:
                cost[k] = float(row[dim + 1])
            elif row[dim + 1] != "":
                raise DatasetFormatError("infeasible row must have an empty cost", row=rowno)
            times[k] = float(row[dim + 2])
        except ValueError as exc:
            if isinstance(exc, DatasetFormatError):
                raise
            raise DatasetFormatError(str(exc), row=rowno) from None

    meta: dict = {}
    mp = meta_path(path)
    if mp.is_file():
        meta = json.loads(mp.read_text(encoding="utf-8"))
    case_name = meta.pop("case_name", "")
    return Dataset(loads, feasible, cost, times, case_name, meta)
