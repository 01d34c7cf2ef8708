"""Command-line front end: ``opfproxy {generate,train,eval,sweep,segment,solve}``.

All randomness comes from ``--seed``; each stage draws its own seed as
``derive_seed(seed, stage)`` (SeedSequence hashing of the seed and a stage
name), so changing one stage never shifts another. Timings go to stdout and
``*.log`` files, never into CSV outputs.

Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import dataset as ds
from .classify import CLASSIFIER_KINDS, ClassifierSpec, TrainedClassifier, train_classifier
from .evaluation import (
    EvalReport,
    ZeroCostError,
    classification_accuracy,
    kmeans_segment,
    load_daily_profile,
    mean_relative_error,
    pca_project,
    profile_sweep,
    relative_errors,
    runtime_gain,
    write_pca_csv,
    write_profile_csv,
    write_report,
    write_residuals_csv,
)
from .netcase import bundled_case_path, build_dc_model, load_case, nominal_load_vector
from .opf import solve_opf
from .persist import load_model, save_model
from .regress import REGRESSOR_KINDS, RegressorSpec, TrainedRegressor, train_regressor
from .sampler import SamplerConfig, box_polytope
from .seeding import derive_seed

__all__ = ["UsageError", "main"]

ALL_KINDS = [f"classify:{k}" for k in CLASSIFIER_KINDS] + [f"regress:{k}" for k in REGRESSOR_KINDS]


class UsageError(Exception):
    pass


def _resolve_case(path: str) -> Path:
    p = Path(path)
    if p.is_file():
        return p
    if p.parent == Path(".") and not p.exists():
        try:
            bundled = bundled_case_path(p.stem)
            if bundled.is_file():
                return bundled
        except (FileNotFoundError, ValueError):
            pass
    raise UsageError(f"case file not found: {path}")


def _existing(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _parse_overrides(items: list[str] | None) -> dict:
    out = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--set expects key=value, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _resolve_task(kind: str, task: str | None) -> str:
    if ":" in kind:
        task, kind_only = kind.split(":", 1)
        kind = kind_only
    in_c, in_r = kind in CLASSIFIER_KINDS, kind in REGRESSOR_KINDS
    if task is None:
        if in_c and in_r:
            raise UsageError(f"model {kind!r} exists for both tasks; pass --task classify or --task regress")
        task = "classify" if in_c else "regress" if in_r else None
    if task == "classify" and in_c or task == "regress" and in_r:
        return task
    where = f" for task {task}" if task else ""
    raise UsageError(f"unknown model {kind!r}{where}; valid kinds ({len(ALL_KINDS)}): {', '.join(ALL_KINDS)}")


def _select(data: ds.Dataset, which: str, fraction: float, seed: int) -> ds.Dataset:
    if which == "all":
        return data
    train, test = ds.split(data, fraction, derive_seed(seed, "split"))
    return train if which == "train" else test


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _emit(lines) -> None:
    for line in lines:
        print(line)


def cmd_generate(args) -> int:
    case = load_case(_resolve_case(args.case))
    model = build_dc_model(case)
    nominal = nominal_load_vector(case)
    poly = box_polytope(nominal, args.alpha_min, args.alpha_max)
    config = SamplerConfig(seed=derive_seed(args.seed, "sampler"), burn_in=args.burn_in, thinning=args.thinning,
                           alpha_min=args.alpha_min, alpha_max=args.alpha_max)
    start = time.perf_counter()
    data = ds.generate_dataset(model, poly, config, args.n, workers=args.workers, case_name=case.name)
    data.metadata["seed"] = args.seed
    elapsed = time.perf_counter() - start
    ds.save(data, args.out)
    _emit([
        f"samples={data.n}",
        f"feasible_fraction={_fmt(float(data.feasible.mean()))}",
        f"mean_solve_time_s={_fmt(float(data.solve_time.mean()))}",
        f"generate_time_s={_fmt(elapsed)}",
        f"wrote={args.out}",
    ])
    return 0


def cmd_train(args) -> int:
    task = _resolve_task(args.model, args.task)
    kind = args.model.split(":", 1)[-1]
    data = _select(ds.load(_existing(args.data, "dataset")), args.split, args.train_fraction, args.seed)
    overrides = _parse_overrides(args.set)
    defaults = (ClassifierSpec if task == "classify" else RegressorSpec)(kind).resolved()
    if "seed" in defaults and "seed" not in overrides:
        overrides["seed"] = derive_seed(args.seed, "model", task, kind)
    start = time.perf_counter()
    if task == "classify":
        model = train_classifier(ClassifierSpec(kind, overrides), data)
        metric = f"training_accuracy={_fmt(classification_accuracy(model, data))}"
    else:
        model = train_regressor(RegressorSpec(kind, overrides), data)
        mean, _ = mean_relative_error(model, data)
        metric = f"training_mean_relative_error={_fmt(mean)}"
    elapsed = time.perf_counter() - start
    save_model(model, args.out)
    Path(args.out).with_suffix(".log").write_text(f"train_time_s={_fmt(elapsed)}\n", encoding="utf-8")
    _emit([f"task={task}", f"kind={kind}", f"n_train={data.n}", metric, f"train_time_s={_fmt(elapsed)}",
           f"wrote={args.out}"])
    return 0


def _residual_table(model: TrainedRegressor, data: ds.Dataset):
    feasible = data.feasible_only()
    if feasible.n == 0:
        raise ValueError("no feasible samples to evaluate")
    pred = model.predict(feasible.loads)
    return feasible, pred, relative_errors(pred, feasible.cost)


def cmd_eval(args) -> int:
    model = load_model(_existing(args.model, "model file"))
    data = _select(ds.load(_existing(args.data, "dataset")), args.split, args.train_fraction, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"kind": model.kind, "dataset": Path(args.data).name, "split": args.split, "seed": args.seed,
            "n_test": data.n}
    if isinstance(model, TrainedClassifier):
        meta["task"] = "classify"
        metrics = {"accuracy": classification_accuracy(model, data),
                   "feasible_fraction": float(data.feasible.mean())}
        kind = "classifier"
    else:
        meta["task"] = "regress"
        feasible, pred, rel = _residual_table(model, data)
        metrics = {"mean_relative_error": float(rel.mean()), "std_relative_error": float(rel.std()),
                   "n_feasible": feasible.n}
        write_residuals_csv(out / "residuals.csv", feasible.loads, feasible.cost, pred, rel)
        kind = "regressor"
    gain, exact_s, predict_s = runtime_gain(model, data, kind, calls=args.timing_calls)
    report = EvalReport(metrics, {"runtime_gain": gain, "mean_exact_solve_s": exact_s,
                                  "mean_predict_s": predict_s}, meta)
    write_report(report, out / "report.txt", out / "timings.log")
    _emit(report.lines() + report.timing_lines())
    return 0


def cmd_sweep(args) -> int:
    model = load_model(_existing(args.model, "model file"))
    if not isinstance(model, TrainedRegressor):
        raise UsageError("sweep needs a cost regressor")
    case = load_case(_resolve_case(args.case))
    dc = build_dc_model(case)
    if model.dim != dc.n_b:
        raise UsageError(f"model expects {model.dim} loads but case has {dc.n_b} buses")
    profile = load_daily_profile(args.profile)
    peak = nominal_load_vector(case) * args.peak_scale
    errors = profile_sweep(model, dc, profile, peak, args.per_hour_samples, derive_seed(args.seed, "sweep"),
                           args.jitter)
    write_profile_csv(args.out, errors)
    finite = errors[np.isfinite(errors)]
    _emit([f"hours=24", f"missing_hours={int(np.isnan(errors).sum())}",
           f"max_hourly_error={_fmt(float(finite.max())) if len(finite) else 'nan'}", f"wrote={args.out}"])
    return 0


def cmd_segment(args) -> int:
    model = load_model(_existing(args.model, "model file"))
    if not isinstance(model, TrainedRegressor):
        raise UsageError("segment needs a cost regressor")
    data = _select(ds.load(_existing(args.data, "dataset")), args.split, args.train_fraction, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    feasible, pred, rel = _residual_table(model, data)
    seg = kmeans_segment(rel, feasible.loads, k=args.k, seed=derive_seed(args.seed, "segment"))
    write_residuals_csv(out / "residuals.csv", feasible.loads, feasible.cost, pred, rel, seg.labels)
    lines = [f"k={args.k}"]
    for i, (c, (lo, hi)) in enumerate(zip(seg.centroids, seg.intervals)):
        lines += [f"segment_{i}.centroid={_fmt(c)}", f"segment_{i}.low={_fmt(lo)}", f"segment_{i}.high={_fmt(hi)}",
                  f"segment_{i}.count={int((seg.labels == i).sum())}"]
    if args.pca_dims > 0:
        proj, ratios = pca_project(feasible.loads, args.pca_dims)
        write_pca_csv(out / "pca.csv", proj, seg.labels)
        lines += [f"pca_{i + 1}.explained_variance_ratio={_fmt(r)}" for i, r in enumerate(ratios)]
    (out / "segments.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _emit(lines)
    return 0


def cmd_solve(args) -> int:
    case = load_case(_resolve_case(args.case))
    dc = build_dc_model(case)
    try:
        load = np.array([float(v) for v in args.load.split(",")])
    except ValueError:
        raise UsageError(f"--load must be comma-separated numbers, got {args.load!r}") from None
    if load.shape != (dc.n_b,):
        raise UsageError(f"--load needs {dc.n_b} values (one per bus, ordered by bus id), got {len(load)}")
    outcome = solve_opf(dc, load)
    lines = [f"feasible={int(outcome.feasible)}"]
    if outcome.feasible:
        lines.append(f"cost={_fmt(outcome.cost)}")
        lines.append("dispatch=" + ",".join(_fmt(p) for p in outcome.dispatch))
    lines.append(f"solve_time_s={_fmt(outcome.solve_time)}")
    _emit(lines)
    return 0


def _add_split(p) -> None:
    p.add_argument("--split", choices=("all", "train", "test"), default="all",
                   help="which partition of the dataset to use (split seeded from --seed)")
    p.add_argument("--train-fraction", type=float, default=0.8)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opfproxy", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_, allow_abbrev=False)
        p.add_argument("--seed", type=int, default=0, help="master seed; stage seeds are derived from it")
        p.set_defaults(func=func)
        return p

    p = add("generate", cmd_generate, "sample loads with hit-and-run and label them with the exact OPF")
    p.add_argument("--case", required=True, help="case file, or the name of a bundled case (case2, case3, case5)")
    p.add_argument("--n", type=int, required=True, help="number of samples")
    p.add_argument("--out", default="dataset.csv")
    p.add_argument("--workers", type=int, default=1, help="parallel labeling processes (output is independent)")
    p.add_argument("--alpha-min", type=float, default=0.2)
    p.add_argument("--alpha-max", type=float, default=2.0)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--thinning", type=int, default=5)

    p = add("train", cmd_train, "train a feasibility classifier or cost regressor")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="model kind, optionally prefixed with classify: or regress:")
    p.add_argument("--task", choices=("classify", "regress"), help="needed only for kinds valid in both tasks")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="hyperparameter override (JSON value)")
    p.add_argument("--out", default="model.json")
    _add_split(p)

    p = add("eval", cmd_eval, "accuracy or relative error, run-time gain and residual export")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--timing-calls", type=int, default=100)
    _add_split(p)

    p = add("sweep", cmd_sweep, "hourly mean relative error over a daily load profile")
    p.add_argument("--model", required=True)
    p.add_argument("--case", required=True)
    p.add_argument("--profile", help="hour,multiplier CSV (default: bundled profile)")
    p.add_argument("--peak-scale", type=float, default=1.0, help="peak load as a multiple of nominal")
    p.add_argument("--per-hour-samples", type=int, default=20)
    p.add_argument("--jitter", type=float, default=0.05)
    p.add_argument("--out", default="profile.csv")

    p = add("segment", cmd_segment, "K-means segmentation of relative errors with optional PCA export")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--pca-dims", type=int, default=2, help="0 disables pca.csv")
    p.add_argument("--out-dir", default=".")
    _add_split(p)

    p = add("solve", cmd_solve, "exact OPF for one load vector")
    p.add_argument("--case", required=True)
    p.add_argument("--load", required=True, help="comma-separated per-bus loads in bus-id order")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, FileNotFoundError) as exc:
        print(f"opfproxy {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, ZeroCostError) as exc:
        print(f"opfproxy {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"opfproxy {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
