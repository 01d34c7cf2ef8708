"""Self-describing JSON serialization of trained classifiers and regressors.

Arrays are stored as tagged objects (dtype, shape, flat data); Python's
``repr``-based float formatting makes the round trip bit-exact. GP models
embed their training inputs and dual weights.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ._common import Standardizer
from .classify import TrainedClassifier
from .gp import GpFit
from .mlp import Mlp
from .regress import TrainedRegressor
from .trees import Tree

__all__ = ["FORMAT_VERSION", "ModelFormatError", "dumps_model", "load_model", "loads_model", "save_model"]

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def _encode(obj):
    if isinstance(obj, np.ndarray):
        kind = "int" if np.issubdtype(obj.dtype, np.integer) else "float"
        data = obj.astype(np.int64 if kind == "int" else float).reshape(-1).tolist()
        return {"__array__": kind, "shape": list(obj.shape), "data": data}
    if isinstance(obj, Tree):
        return {"__tree__": {k: _encode(v) for k, v in obj.to_dict().items()}}
    if isinstance(obj, Mlp):
        return {"__mlp__": {"W1": _encode(obj.W1), "b1": _encode(obj.b1), "w2": _encode(obj.w2),
                            "b2": float(obj.b2), "loss": obj.loss}}
    if isinstance(obj, GpFit):
        return {"__gp__": {"X": _encode(obj.X), "alpha": _encode(obj.alpha),
                           "lengthscales": _encode(obj.lengthscales), "variance": float(obj.variance),
                           "jitter": float(obj.jitter)}}
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _decode(obj):
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    if not isinstance(obj, dict):
        return obj
    if "__array__" in obj:
        dtype = np.int64 if obj["__array__"] == "int" else float
        return np.asarray(obj["data"], dtype=dtype).reshape(obj["shape"])
    if "__tree__" in obj:
        return Tree.from_dict({k: _decode(v) for k, v in obj["__tree__"].items()})
    if "__mlp__" in obj:
        m = obj["__mlp__"]
        return Mlp(_decode(m["W1"]), _decode(m["b1"]), _decode(m["w2"]), float(m["b2"]), m["loss"])
    if "__gp__" in obj:
        g = obj["__gp__"]
        return GpFit(_decode(g["X"]), _decode(g["alpha"]), _decode(g["lengthscales"]), float(g["variance"]),
                     float(g["jitter"]))
    return {k: _decode(v) for k, v in obj.items()}


def dumps_model(model: TrainedClassifier | TrainedRegressor) -> str:
    if isinstance(model, TrainedClassifier):
        role, metadata = "classifier", {}
    elif isinstance(model, TrainedRegressor):
        role, metadata = "regressor", model.metadata
    else:
        raise TypeError(f"not a trained model: {type(model).__name__}")
    doc = {
        "format": "opfproxy-model",
        "version": FORMAT_VERSION,
        "role": role,
        "kind": model.kind,
        "hyperparameters": _encode(model.hyperparameters),
        "standardizer": {"mean": _encode(model.standardizer.mean), "std": _encode(model.standardizer.std)},
        "parameters": _encode(model.parameters),
        "metadata": _encode(metadata),
    }
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def loads_model(text: str) -> TrainedClassifier | TrainedRegressor:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != "opfproxy-model":
        raise ModelFormatError("not an opfproxy model file")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {doc.get('version')!r}")
    try:
        std = Standardizer(_decode(doc["standardizer"]["mean"]), _decode(doc["standardizer"]["std"]))
        hp = _decode(doc["hyperparameters"])
        params = _decode(doc["parameters"])
        if doc["role"] == "classifier":
            return TrainedClassifier(doc["kind"], hp, std, params)
        if doc["role"] == "regressor":
            return TrainedRegressor(doc["kind"], hp, std, params, _decode(doc["metadata"]))
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"malformed model file: missing or invalid {exc}") from None
    raise ModelFormatError(f"unknown model role {doc['role']!r}")


def save_model(model, path: str | Path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def load_model(path: str | Path):
    return loads_model(Path(path).read_text(encoding="utf-8"))
