"""The seven complexity metrics. Each one maps a trained model to a score in [0, 1]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gencombo.model import (
    Dataset,
    ModelSpec,
    TrainingRecipe,
    accuracy,
    forward,
    logistic_spec,
    train,
    train_logistic_regression,
)
from gencombo.seeding import derive_seed

METRIC_NAMES = (
    "non_uniform_weights",
    "normalized_difference",
    "distance_simple_classifier",
    "margin",
    "lr_mean",
    "lr_distance",
    "categorical_cross_entropy",
)

SWEEP_LEARNING_RATES = (0.0001, 0.001, 0.01)
SWEEP_RUNS = 3
SWEEP_EPOCHS = 5
# Assumed upper bound on the per-learning-rate accuracy variance.
VARIANCE_SCALE = 0.002
MARGIN_THRESHOLD = 0.2
PROB_FLOOR = 1e-12

# Baseline classifier for the distance metric.
LOGREG_LEARNING_RATE = 0.1
LOGREG_EPOCHS = 50
LOGREG_BATCH_SIZE = 32

# Sub-seed tags under a snapshot's seed.
LOGREG_SEED_TAG = 3
SWEEP_SEED_TAG = 4


class MetricError(RuntimeError):
    def __init__(self, metric: str, cause: Exception):
        super().__init__(f"{metric}: {cause}")
        self.metric = metric


@dataclass(frozen=True)
class LrSweepResult:
    learning_rates: tuple[float, ...]
    accuracies: np.ndarray  # (num learning rates, runs * epochs)
    variances: np.ndarray  # population variance per learning rate

    def __post_init__(self):
        acc = np.asarray(self.accuracies, dtype=np.float64)
        var = np.asarray(self.variances, dtype=np.float64)
        if len(self.learning_rates) != 3 or acc.ndim != 2 or acc.shape[0] != 3 or var.shape != (3,):
            raise ValueError("a sweep holds exactly three learning rates")
        if np.any(var < 0) or np.isnan(var).any():
            raise ValueError("variances must be non-negative")
        object.__setattr__(self, "accuracies", acc)
        object.__setattr__(self, "variances", var)

    @classmethod
    def from_variances(cls, variances) -> "LrSweepResult":
        return cls(SWEEP_LEARNING_RATES, np.zeros((3, 0)), np.asarray(variances, dtype=np.float64))


def _weight_deltas(init, trained) -> np.ndarray:
    a = np.asarray(init, dtype=np.float64)
    b = np.asarray(trained, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"weight vectors differ in shape: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("weight vectors are empty")
    return np.abs(b - a)


def metric_nonuniform_weights(init, trained) -> float:
    """Fraction of weights that moved by strictly more than the std of all moves."""
    deltas = _weight_deltas(init, trained)
    beta = deltas.std()
    return float(np.mean(deltas > beta))


def metric_normalized_difference(init, trained) -> float:
    deltas = _weight_deltas(init, trained)
    largest = deltas.max()
    if largest == 0:
        return 0.0
    # Dividing first keeps every term in [0, 1], so the mean cannot exceed 1 by rounding.
    return float(min(np.mean(deltas / largest), 1.0))


def metric_distance_simple_classifier(dnn_train_accuracy: float, lr_train_accuracy: float) -> float:
    for name, v in (("dnn_train_accuracy", dnn_train_accuracy), ("lr_train_accuracy", lr_train_accuracy)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
    return abs(float(dnn_train_accuracy) - float(lr_train_accuracy))


def metric_margin(preds) -> float:
    """Fraction of rows whose top-two probability gap is at least 0.2."""
    P = np.asarray(preds, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] < 2:
        raise ValueError(f"need at least two classes, got predictions of shape {P.shape}")
    if P.shape[0] == 0:
        raise ValueError("no predictions")
    top2 = np.partition(P, -2, axis=1)[:, -2:]
    return float(np.mean(top2[:, 1] - top2[:, 0] >= MARGIN_THRESHOLD))


def lr_sweep(
    spec: ModelSpec,
    init,
    data: Dataset,
    base_seed: int,
    batch_size: int = 32,
    learning_rates=SWEEP_LEARNING_RATES,
) -> LrSweepResult:
    """Retrain from ``init`` three times per learning rate and pool the per-epoch accuracies."""
    if len(learning_rates) != 3:
        raise ValueError("the sweep uses exactly three learning rates")
    pooled = []
    for lr_index, lr in enumerate(learning_rates):
        accs = []
        for run in range(SWEEP_RUNS):
            recipe = TrainingRecipe(lr, SWEEP_EPOCHS, batch_size, derive_seed(base_seed, lr_index, run))
            _, trace = train(spec, init, data, recipe)
            accs.extend(trace)
        pooled.append(accs)
    accuracies = np.array(pooled, dtype=np.float64)
    return LrSweepResult(tuple(learning_rates), accuracies, population_variance(accuracies))


def population_variance(rows: np.ndarray) -> np.ndarray:
    """Row-wise divide-by-N variance, exactly 0 for constant rows."""
    # Centering on the first entry makes constant rows cancel exactly.
    d = rows - rows[:, :1]
    return ((d - d.mean(axis=1, keepdims=True)) ** 2).mean(axis=1)


def metric_lr_mean(sweep: LrSweepResult) -> float:
    return float(min(sweep.variances.sum() / (3 * VARIANCE_SCALE), 1.0))


def metric_lr_distance(sweep: LrSweepResult) -> float:
    v = sweep.variances
    spread = np.abs(v - v.mean()).sum()
    return float(min(2.0 / (3 * VARIANCE_SCALE) * spread, 1.0))


def metric_categorical_cross_entropy(preds, labels) -> float:
    P = np.asarray(preds, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if P.ndim != 2 or y.shape != (P.shape[0],):
        raise ValueError(f"predictions {P.shape} vs labels {y.shape}")
    if y.size == 0:
        raise ValueError("no predictions")
    p_true = np.maximum(P[np.arange(len(y)), y], PROB_FLOOR)
    # Rounding can leave -log(p) at -0.0 or a hair below zero for p == 1.
    return float(min(max(-np.mean(np.log(p_true)), 0.0), 1.0))


def compute_all(snapshot, data: Dataset) -> np.ndarray:
    """All seven metrics for one zoo snapshot, in ``METRIC_NAMES`` order.

    ``snapshot`` needs ``spec``, ``init``, ``trained``, ``recipe`` and ``seed``.
    """
    spec = snapshot.spec
    scores = {}

    def run(name, fn, *args):
        try:
            scores[name] = fn(*args)
        except Exception as exc:
            raise MetricError(name, exc) from exc

    run("non_uniform_weights", metric_nonuniform_weights, snapshot.init, snapshot.trained)
    run("normalized_difference", metric_normalized_difference, snapshot.init, snapshot.trained)

    # Shared by the prediction-based metrics; failures are charged to the first of them.
    run("distance_simple_classifier", forward, spec, snapshot.trained, data.features)
    preds = scores.pop("distance_simple_classifier")

    def distance():
        recipe = TrainingRecipe(
            LOGREG_LEARNING_RATE, LOGREG_EPOCHS, LOGREG_BATCH_SIZE, derive_seed(snapshot.seed, LOGREG_SEED_TAG)
        )
        lr_weights = train_logistic_regression(data, recipe)
        lr_preds = forward(logistic_spec(data.input_dim, data.num_classes), lr_weights, data.features)
        return metric_distance_simple_classifier(accuracy(preds, data.labels), accuracy(lr_preds, data.labels))

    run("distance_simple_classifier", distance)
    run("margin", metric_margin, preds)

    sweep = {}

    def sweep_then(metric):
        if "result" not in sweep:
            sweep["result"] = lr_sweep(
                spec, snapshot.init, data, derive_seed(snapshot.seed, SWEEP_SEED_TAG), snapshot.recipe.batch_size
            )
        return metric(sweep["result"])

    run("lr_mean", sweep_then, metric_lr_mean)
    run("lr_distance", sweep_then, metric_lr_distance)
    run("categorical_cross_entropy", metric_categorical_cross_entropy, preds, data.labels)
    return np.array([scores[name] for name in METRIC_NAMES], dtype=np.float64)
