"""Classifiers producing scores in [0, 1]."""

from typing import Union

from .forest import ForestConfig, ForestModel, train_forest
from .logistic import LogisticConfig, LogisticModel, objective, prejudice_index, train_logistic
from .serialize import dumps, loads, model_from_dict, model_to_dict

TrainedModel = Union[LogisticModel, ForestModel]


def predict_scores(model: TrainedModel, features):
    return model.predict_scores(features)


__all__ = [
    "ForestConfig",
    "ForestModel",
    "LogisticConfig",
    "LogisticModel",
    "TrainedModel",
    "dumps",
    "loads",
    "model_from_dict",
    "model_to_dict",
    "objective",
    "predict_scores",
    "prejudice_index",
    "train_forest",
    "train_logistic",
]
