"""Generalization gap and Kendall's tau-a."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

import numpy as np


@dataclass(frozen=True)
class GapRecord:
    model_id: str
    train_accuracy: float
    validation_accuracy: float
    gap: float


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def generalization_gap(train_acc: float, val_acc: float) -> float:
    """``|train_acc - val_acc|``, subtracting the shortest decimal forms of the inputs.

    Accuracies are usually short decimals (k/200 = 0.735, ...), so this keeps
    gaps such as 1.0 - 0.8 at exactly 0.2 and makes equal gaps compare equal.
    """
    a = Decimal(repr(_check_unit("train_acc", train_acc)))
    b = Decimal(repr(_check_unit("val_acc", val_acc)))
    return float(abs(a - b))


def pair_signs(values) -> np.ndarray:
    """Sign of ``values[j] - values[i]`` for every pair ``i < j`` (row-major over i).

    Works on float arrays and on object arrays of exact numbers (ints, Fractions).
    """
    v = np.asarray(values)
    n = v.shape[-1]
    i, j = np.triu_indices(n, 1)
    lo, hi = v[..., i], v[..., j]
    return (hi > lo).astype(np.int8) - (hi < lo).astype(np.int8)


def _check_pair(xs, ys):
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise ValueError("kendall_tau needs at least two observations")
    for name, v in (("xs", xs), ("ys", ys)):
        arr = np.asarray(v)
        if arr.dtype.kind == "f" and np.isnan(arr).any():
            raise ValueError(f"{name} contains NaN")


def kendall_numerator(xs, ys) -> int:
    """Concordant minus discordant pairs; tied pairs contribute nothing."""
    _check_pair(xs, ys)
    return int(np.dot(pair_signs(xs).astype(np.int64), pair_signs(ys).astype(np.int64)))


def kendall_tau(xs, ys) -> float:
    n = len(xs)
    return kendall_numerator(xs, ys) / (n * (n - 1) // 2)
