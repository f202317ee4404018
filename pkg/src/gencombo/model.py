"""Dense ReLU networks and multinomial logistic regression trained with plain SGD.

Weights live in a single flat float64 vector. The layout is layer-major: for
each layer the (fan_in, fan_out) weight matrix in row-major order, followed
by that layer's bias. Logits are computed as ``x @ W + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DimensionError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, message: str = "loss became non-finite"):
        super().__init__(f"training diverged in epoch {epoch}: {message}")
        self.epoch = epoch


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise DimensionError(f"features must be 2-D, got shape {X.shape}")
        if y.ndim != 1 or len(y) != X.shape[0]:
            raise DimensionError(f"{X.shape[0]} feature rows but labels of shape {y.shape}")
        if self.num_classes < 2:
            raise ValueError("num_classes must be at least 2")
        if y.size and not np.issubdtype(y.dtype, np.integer):
            if not np.all(y == np.round(y)):
                raise ValueError("labels must be integers")
        y = y.astype(np.int64)
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain NaN or Inf")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.features.shape[0]

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class ModelSpec:
    input_dim: int
    hidden_layer_widths: tuple[int, ...] = field(default=())
    num_classes: int = 2

    def __post_init__(self):
        widths = tuple(int(w) for w in self.hidden_layer_widths)
        object.__setattr__(self, "hidden_layer_widths", widths)
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if any(w < 1 for w in widths):
            raise ValueError(f"hidden widths must be positive, got {list(widths)}")
        if self.num_classes < 2:
            raise ValueError("num_classes must be at least 2")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim, *self.hidden_layer_widths, self.num_classes]

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        sizes = self.layer_sizes
        return list(zip(sizes[:-1], sizes[1:]))

    @property
    def num_params(self) -> int:
        return sum(n_in * n_out + n_out for n_in, n_out in self.layer_shapes)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_layer_widths": list(self.hidden_layer_widths),
            "num_classes": self.num_classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(int(d["input_dim"]), tuple(d["hidden_layer_widths"]), int(d["num_classes"]))


@dataclass(frozen=True)
class TrainingRecipe:
    learning_rate: float
    epochs: int
    batch_size: int
    shuffle_seed: int = 0

    def __post_init__(self):
        # A zero step size is allowed; it is how callers freeze the weights.
        if not (self.learning_rate >= 0 and np.isfinite(self.learning_rate)):
            raise ValueError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "shuffle_seed": self.shuffle_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingRecipe":
        return cls(float(d["learning_rate"]), int(d["epochs"]), int(d["batch_size"]), int(d["shuffle_seed"]))


def unflatten(spec: ModelSpec, weights: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat vector into per-layer ``(W, b)`` views (no copies)."""
    weights = np.asarray(weights)
    if weights.ndim != 1 or weights.shape[0] != spec.num_params:
        raise DimensionError(
            f"weight vector has shape {weights.shape}, spec needs ({spec.num_params},)"
        )
    layers = []
    offset = 0
    for n_in, n_out in spec.layer_shapes:
        W = weights[offset:offset + n_in * n_out].reshape(n_in, n_out)
        offset += n_in * n_out
        b = weights[offset:offset + n_out]
        offset += n_out
        layers.append((W, b))
    return layers


def init_weights(spec: ModelSpec, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    weights = np.zeros(spec.num_params, dtype=np.float64)
    for W, _ in unflatten(spec, weights):
        bound = 1.0 / np.sqrt(W.shape[0])
        W[...] = rng.uniform(-bound, bound, size=W.shape)
    return weights


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _check_features(spec: ModelSpec, features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise DimensionError(f"features of shape {X.shape} do not match input_dim={spec.input_dim}")
    return X


def _forward_cache(layers, X):
    activations = [X]
    pre = []
    a = X
    for i, (W, b) in enumerate(layers):
        z = a @ W + b
        pre.append(z)
        a = np.maximum(z, 0.0) if i < len(layers) - 1 else z
        activations.append(a)
    return pre, activations


def logits(spec: ModelSpec, weights: np.ndarray, features) -> np.ndarray:
    X = _check_features(spec, features)
    _, activations = _forward_cache(unflatten(spec, weights), X)
    return activations[-1]


def forward(spec: ModelSpec, weights: np.ndarray, features) -> np.ndarray:
    """Class probabilities, one row per instance."""
    return softmax(logits(spec, weights, features))


def loss_and_grad(spec: ModelSpec, weights: np.ndarray, features, labels) -> tuple[float, np.ndarray]:
    """Mean categorical cross entropy over the batch and its gradient w.r.t. the flat weights."""
    X = _check_features(spec, features)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (X.shape[0],):
        raise DimensionError(f"{X.shape[0]} rows but {y.shape} labels")
    layers = unflatten(spec, weights)
    pre, activations = _forward_cache(layers, X)
    z = activations[-1]
    n = X.shape[0]
    rows = np.arange(n)

    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[rows, y]))

    grad = np.zeros(spec.num_params, dtype=np.float64)
    grad_layers = unflatten(spec, grad)
    delta = np.exp(shifted - log_norm[:, None])
    delta[rows, y] -= 1.0
    delta /= n
    for i in range(len(layers) - 1, -1, -1):
        gW, gb = grad_layers[i]
        gW[...] = activations[i].T @ delta
        gb[...] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ layers[i][0].T) * (pre[i - 1] > 0)
    return loss, grad


def accuracy(preds, labels) -> float:
    P = np.asarray(preds)
    y = np.asarray(labels)
    if P.ndim != 2 or y.ndim != 1 or P.shape[0] != y.shape[0]:
        raise DimensionError(f"predictions {P.shape} vs labels {y.shape}")
    if P.shape[0] == 0:
        raise ValueError("accuracy of an empty set is undefined")
    # np.argmax returns the first maximal column, i.e. the lowest index on ties
    return float(np.mean(np.argmax(P, axis=1) == y))


def train(
    spec: ModelSpec,
    init: np.ndarray,
    data: Dataset,
    recipe: TrainingRecipe,
) -> tuple[np.ndarray, list[float]]:
    """Mini-batch SGD on cross entropy.

    Returns the trained weights and the full-training-set accuracy measured
    after each epoch. Batch order depends only on ``recipe.shuffle_seed``.
    """
    if data.input_dim != spec.input_dim or data.num_classes != spec.num_classes:
        raise DimensionError(
            f"dataset ({data.input_dim} inputs, {data.num_classes} classes) does not match spec "
            f"({spec.input_dim} inputs, {spec.num_classes} classes)"
        )
    w = np.array(init, dtype=np.float64, copy=True)
    unflatten(spec, w)
    X, y = data.features, data.labels
    n = len(data)
    rng = np.random.default_rng(recipe.shuffle_seed)
    lr = recipe.learning_rate
    trace = []
    # Overflow is detected explicitly below, so numpy's warnings are noise here.
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, recipe.epochs + 1):
            order = rng.permutation(n)
            for start in range(0, n, recipe.batch_size):
                idx = order[start:start + recipe.batch_size]
                loss, grad = loss_and_grad(spec, w, X[idx], y[idx])
                if not np.isfinite(loss):
                    raise DivergenceError(epoch)
                w -= lr * grad
            if not np.all(np.isfinite(w)):
                raise DivergenceError(epoch, "weights became non-finite")
            trace.append(accuracy(forward(spec, w, X), y))
    return w, trace


def logistic_spec(input_dim: int, num_classes: int) -> ModelSpec:
    return ModelSpec(input_dim, (), num_classes)


def train_logistic_regression(data: Dataset, recipe: TrainingRecipe, init: np.ndarray | None = None) -> np.ndarray:
    """Multinomial logistic regression on the raw features; starts from zeros unless given ``init``."""
    spec = logistic_spec(data.input_dim, data.num_classes)
    if init is None:
        init = np.zeros(spec.num_params, dtype=np.float64)
    weights, _ = train(spec, init, data, recipe)
    return weights

