"""Predict generalization gaps from combinations of seven simple complexity metrics."""

from gencombo.combination import (
    SearchResult,
    combine,
    contribution_report,
    enumerate_inclusions,
    search_best,
    transform,
)
from gencombo.metrics import METRIC_NAMES, compute_all
from gencombo.model import Dataset, ModelSpec, TrainingRecipe, forward, init_weights, train
from gencombo.ranking import generalization_gap, kendall_tau

__all__ = [
    "METRIC_NAMES",
    "Dataset",
    "ModelSpec",
    "SearchResult",
    "TrainingRecipe",
    "combine",
    "compute_all",
    "contribution_report",
    "enumerate_inclusions",
    "forward",
    "generalization_gap",
    "init_weights",
    "kendall_tau",
    "search_best",
    "train",
    "transform",
]
