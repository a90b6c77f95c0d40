"""Versioned JSON documents for trained models.

Floats are written with ``repr`` precision by :mod:`json`, so a model read
back predicts exactly what the original predicted.
"""

from __future__ import annotations

import json

import numpy as np

from ..dataset import DataError
from .forest import ForestModel, Tree
from .logistic import LogisticModel

FORMAT = "fairpsych-model"
VERSION = 1


def model_to_dict(model) -> dict:
    doc = {"format": FORMAT, "version": VERSION, "kind": model.kind,
           "feature_names": list(model.feature_names)}
    if model.kind == "logistic":
        doc.update(
            standardization={"mean": model.mean.tolist(), "scale": model.scale.tolist()},
            coef=model.coef.tolist(),
            intercept=model.intercept,
            converged=model.converged,
            n_iter=model.n_iter,
        )
    else:
        doc["trees"] = [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
            }
            for t in model.trees
        ]
    return doc


def model_from_dict(doc: dict):
    if doc.get("format") != FORMAT:
        raise DataError("not a serialized model document")
    if doc.get("version") != VERSION:
        raise DataError(f"unsupported model document version {doc.get('version')!r}")
    names = tuple(doc["feature_names"])
    if doc["kind"] == "logistic":
        std = doc["standardization"]
        return LogisticModel(
            feature_names=names,
            mean=np.array(std["mean"], dtype=float),
            scale=np.array(std["scale"], dtype=float),
            coef=np.array(doc["coef"], dtype=float),
            intercept=float(doc["intercept"]),
            converged=bool(doc["converged"]),
            n_iter=int(doc["n_iter"]),
        )
    if doc["kind"] == "forest":
        trees = tuple(
            Tree(
                np.array(t["feature"], dtype=np.int64),
                np.array(t["threshold"], dtype=float),
                np.array(t["left"], dtype=np.int64),
                np.array(t["right"], dtype=np.int64),
                np.array(t["value"], dtype=float),
            )
            for t in doc["trees"]
        )
        return ForestModel(feature_names=names, trees=trees)
    raise DataError(f"unknown model kind {doc['kind']!r}")


def dumps(model) -> str:
    return json.dumps(model_to_dict(model))


def loads(text: str):
    return model_from_dict(json.loads(text))
