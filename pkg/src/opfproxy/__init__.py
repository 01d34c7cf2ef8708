"""Learned proxies for DC optimal power flow: feasibility classifiers and
cost regressors trained on hit-and-run sampled, exactly labeled loads."""

from .classify import CLASSIFIER_KINDS, ClassifierSpec, TrainedClassifier, predict_feasible, train_classifier
from .dataset import Dataset, LabeledSample, generate_dataset, split
from .evaluation import (
    DailyProfile,
    ErrorSegmentation,
    EvalReport,
    ExactCostOracle,
    classification_accuracy,
    kmeans_segment,
    load_daily_profile,
    mean_relative_error,
    pca_project,
    profile_sweep,
    runtime_gain,
)
from .netcase import DcModel, NetworkCase, build_dc_model, bundled_case_path, load_case, parse_case
from .opf import OpfOutcome, solve_opf
from .persist import load_model, save_model
from .regress import REGRESSOR_KINDS, RegressorSpec, TrainedRegressor, predict_cost, train_regressor
from .sampler import Polytope, SamplerConfig, box_polytope, hit_and_run

__version__ = "0.1.0"

__all__ = [
    "CLASSIFIER_KINDS",
    "REGRESSOR_KINDS",
    "ClassifierSpec",
    "DailyProfile",
    "Dataset",
    "DcModel",
    "ErrorSegmentation",
    "EvalReport",
    "ExactCostOracle",
    "LabeledSample",
    "NetworkCase",
    "OpfOutcome",
    "Polytope",
    "RegressorSpec",
    "SamplerConfig",
    "TrainedClassifier",
    "TrainedRegressor",
    "box_polytope",
    "build_dc_model",
    "bundled_case_path",
    "classification_accuracy",
    "generate_dataset",
    "hit_and_run",
    "kmeans_segment",
    "load_case",
    "load_daily_profile",
    "load_model",
    "mean_relative_error",
    "parse_case",
    "pca_project",
    "predict_cost",
    "predict_feasible",
    "profile_sweep",
    "runtime_gain",
    "save_model",
    "solve_opf",
    "split",
    "train_classifier",
    "train_regressor",
]
