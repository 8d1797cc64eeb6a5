"""Classifier zoo behind a uniform train / predict-probability interface."""

from .base import ModelSpec, ProbabilisticPrediction, default_hyperparameters
from .pipeline import Dataset, TrainedModel, predict_proba, train

__all__ = [
    "Dataset",
    "ModelSpec",
    "ProbabilisticPrediction",
    "TrainedModel",
    "default_hyperparameters",
    "predict_proba",
    "train",
]
