"""JSON model persistence with schema versioning.

All array parameters round-trip exactly (decimal with 17 significant
digits, which numpy's float repr guarantees via repr-level precision in
json with full float fidelity).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .cgmr import CgmrModel
from .classifiers import ClassifierModel
from .dhmm import DhmmLayer, DhmmStack
from .errors import SchemaError, VersionMismatch
from .gmm import Gmm
from .hmm import GaussianHmm

SCHEMA_VERSION = 1


def _arr(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _encode(model) -> dict:
    if isinstance(model, GaussianHmm):
        return {
            "kind": "gaussian_hmm",
            "initial": _arr(model.initial),
            "transition": _arr(model.transition),
            "means": _arr(model.means),
            "variances": _arr(model.variances),
        }
    if isinstance(model, Gmm):
        return {
            "kind": "gmm",
            "weights": _arr(model.weights),
            "means": _arr(model.means),
            "covariances": _arr(model.covariances),
        }
    if isinstance(model, CgmrModel):
        return {
            "kind": "cgmr",
            "joint": _encode(model.joint),
            "input_dims": list(model.input_dims),
            "output_dims": list(model.output_dims),
        }
    if isinstance(model, DhmmStack):
        return {
            "kind": "dhmm_stack",
            "layers": [
                {"window": layer.window, "models": [_encode(m) for m in layer.models]}
                for layer in model.layers
            ],
            "class_labels": list(model.class_labels),
            "feature_mode": model.feature_mode,
            "top_mode": model.top_mode,
            "feature_scale": model.feature_scale,
            "clock_dt": model.clock_dt,
        }
    if isinstance(model, ClassifierModel):
        params = {}
        for key, val in model.params.items():
            if isinstance(val, GaussianHmm):
                params[str(key)] = _encode(val)
            else:
                params[str(key)] = _arr(val)
        return {
            "kind": "classifier",
            "classifier_kind": model.kind,
            "classes": list(model.classes),
            "priors": _arr(model.priors),
            "params": params,
        }
    raise SchemaError(f"cannot persist model of type {type(model).__name__}")


def _decode(doc: dict):
    kind = doc.get("kind")
    if kind == "gaussian_hmm":
        return GaussianHmm(
            initial=np.array(doc["initial"]),
            transition=np.array(doc["transition"]),
            means=np.array(doc["means"]),
            variances=np.array(doc["variances"]),
        )
    if kind == "gmm":
        return Gmm(
            weights=np.array(doc["weights"]),
            means=np.array(doc["means"]),
            covariances=np.array(doc["covariances"]),
        )
    if kind == "cgmr":
        return CgmrModel(
            joint=_decode(doc["joint"]),
            input_dims=tuple(doc["input_dims"]),
            output_dims=tuple(doc["output_dims"]),
        )
    if kind == "dhmm_stack":
        return DhmmStack(
            layers=[
                DhmmLayer(
                    models=[_decode(m) for m in layer["models"]],
                    window=layer["window"],
                )
                for layer in doc["layers"]
            ],
            class_labels=list(doc["class_labels"]),
            feature_mode=doc.get("feature_mode", "loglik"),
            top_mode=doc.get("top_mode", "windowed"),
            feature_scale=doc.get("feature_scale", 1.0),
            clock_dt=doc.get("clock_dt", 0.0),
        )
    if kind == "classifier":
        params = {}
        for key, val in doc["params"].items():
            if isinstance(val, dict):
                params[key] = _decode(val)
            else:
                params[key] = np.array(val)
        return ClassifierModel(
            kind=doc["classifier_kind"],
            classes=list(doc["classes"]),
            priors=np.array(doc["priors"]),
            params=params,
        )
    raise SchemaError(f"unknown model kind {kind!r}")


def save_model(path, model) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "model": _encode(model)}
    Path(path).write_text(json.dumps(doc))


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON: {e}") from None
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise SchemaError(f"{path}: missing schema_version field")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise VersionMismatch(
            f"{path}: schema version {doc['schema_version']} != {SCHEMA_VERSION}"
        )
    if "model" not in doc:
        raise SchemaError(f"{path}: missing model payload")
    return _decode(doc["model"])
