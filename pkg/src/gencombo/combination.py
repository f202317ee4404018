"""Signed metric combinations and the exhaustive search over them.

A combination is an inclusion vector ``f`` in {-1, 0, 1}^7. Each metric score
``x`` is kept (``f=1``), complemented (``f=-1``) or dropped (``f=0``), and the
transformed scores are summed into one complexity value per model.

The search ranks models by these sums with exact rational arithmetic: every
float score is a dyadic rational, so scaling by a common power of two turns
all sums into Python integers. Ties between models are therefore true ties,
and negating ``f`` reverses every comparison exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from gencombo.metrics import METRIC_NAMES
from gencombo.ranking import kendall_numerator, pair_signs

NUM_METRICS = len(METRIC_NAMES)
INCLUSION_VALUES = (-1, 0, 1)
NUM_COMBINATIONS = len(INCLUSION_VALUES) ** NUM_METRICS


def transform(x: float, f: int) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"score must lie in [0, 1], got {x!r}")
    if f == 1:
        return x
    if f == -1:
        return 1.0 - x
    if f == 0:
        return 0.0
    raise ValueError(f"inclusion value must be -1, 0 or 1, got {f!r}")


def _check_inclusion(f) -> tuple[int, ...]:
    f = tuple(int(v) for v in f)
    if len(f) != NUM_METRICS or any(v not in INCLUSION_VALUES for v in f):
        raise ValueError(f"inclusion vector must have {NUM_METRICS} entries from {{-1, 0, 1}}, got {f}")
    return f


def _check_scores(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != NUM_METRICS:
        raise ValueError(f"expected {NUM_METRICS} metric scores, got shape {x.shape}")
    if np.isnan(x).any() or (x < 0).any() or (x > 1).any():
        raise ValueError("metric scores must lie in [0, 1]")
    return x


def combine(x, f) -> float:
    """Sum of the transformed scores, accumulated left to right."""
    x = _check_scores(x)
    f = _check_inclusion(f)
    total = 0.0
    for xi, fi in zip(x, f):
        total += transform(float(xi), fi)
    return total


def combine_exact(x, f) -> Fraction:
    x = _check_scores(x)
    f = _check_inclusion(f)
    return sum((_exact_transform(Fraction(float(xi)), fi) for xi, fi in zip(x, f)), Fraction(0))


def _exact_transform(x: Fraction, f: int) -> Fraction:
    return x if f == 1 else (1 - x if f == -1 else Fraction(0))


def enumerate_inclusions() -> list[tuple[int, ...]]:
    """All 3^7 inclusion vectors in lexicographic order (-1 < 0 < 1)."""
    return list(itertools.product(INCLUSION_VALUES, repeat=NUM_METRICS))


@dataclass(frozen=True)
class SearchResult:
    scored: list[tuple[tuple[int, ...], float]]
    best: tuple[int, ...]
    best_tau: float

    def __post_init__(self):
        if len(self.scored) != NUM_COMBINATIONS:
            raise ValueError(f"a complete search scores {NUM_COMBINATIONS} vectors, got {len(self.scored)}")

    @property
    def taus(self) -> np.ndarray:
        return np.array([tau for _, tau in self.scored], dtype=np.float64)


def _scaled_integers(matrix: np.ndarray) -> tuple[np.ndarray, int]:
    """Represent every score as an integer numerator over one shared power of two."""
    ratios = [float(v).as_integer_ratio() for v in matrix.ravel()]
    shift = max(den.bit_length() - 1 for _, den in ratios)
    out = np.empty(matrix.size, dtype=object)
    for k, (num, den) in enumerate(ratios):
        out[k] = num << (shift - (den.bit_length() - 1))
    return out.reshape(matrix.shape), 1 << shift


def combined_scores_exact(metric_matrix, inclusions=None) -> np.ndarray:
    """Exact combined scores times a shared power of two, shape (num vectors, num models)."""
    X = _check_scores(np.atleast_2d(metric_matrix))
    F = np.array(enumerate_inclusions() if inclusions is None else inclusions, dtype=np.int64)
    numerators, one = _scaled_integers(X)
    # h = sum_{f=1} x + sum_{f=-1} (1 - x) = (#negative entries) + F @ x
    n_neg = (F == -1).sum(axis=1).astype(object)
    return F.astype(object) @ numerators.T + (n_neg * one)[:, None]


def search_best(metric_matrix, gaps) -> SearchResult:
    X = _check_scores(np.atleast_2d(metric_matrix))
    gaps = np.asarray(gaps, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != gaps.shape[0] or gaps.ndim != 1:
        raise ValueError(f"{X.shape[0]} metric rows but {gaps.shape} gaps")
    n = X.shape[0]
    if n < 2:
        raise ValueError("search needs at least two models")
    if np.isnan(gaps).any():
        raise ValueError("gaps contain NaN")

    inclusions = enumerate_inclusions()
    H = combined_scores_exact(X, inclusions)
    numerators = pair_signs(H).astype(np.int64) @ pair_signs(gaps).astype(np.int64)
    num_pairs = n * (n - 1) // 2
    scored = [(f, int(k) / num_pairs) for f, k in zip(inclusions, numerators)]
    # argmax returns the first maximum, which is the lexicographically smallest vector
    best_index = int(np.argmax(numerators))
    return SearchResult(scored, inclusions[best_index], scored[best_index][1])


def single_metric_taus(metric_matrix, gaps) -> list[float]:
    """Tau of each metric on its own (inclusion value 1 in one slot)."""
    X = _check_scores(np.atleast_2d(metric_matrix))
    n = X.shape[0]
    return [kendall_numerator(X[:, k], gaps) / (n * (n - 1) // 2) for k in range(NUM_METRICS)]


@dataclass(frozen=True)
class ContributionReport:
    metrics: tuple[str, ...]
    values: tuple[int, ...]
    mean_tau: np.ndarray  # (7, 3), columns follow ``values``
    counts: np.ndarray  # vectors averaged per cell

    @property
    def best_values(self) -> list[int]:
        # first maximum, i.e. the smallest inclusion value on ties
        return [self.values[int(np.argmax(row))] for row in self.mean_tau]

    def to_json(self) -> list[dict]:
        return [
            {"metric": m, "mean_tau": [float(v) for v in row], "best_value": b}
            for m, row, b in zip(self.metrics, self.mean_tau, self.best_values)
        ]


def contribution_report(result: SearchResult) -> ContributionReport:
    """Mean tau per (metric, inclusion value) over the vectors sharing that entry."""
    if sorted(f for f, _ in result.scored) != enumerate_inclusions():
        raise ValueError("contribution report needs a complete search result")
    sums = [[Fraction(0)] * len(INCLUSION_VALUES) for _ in range(NUM_METRICS)]
    counts = np.zeros((NUM_METRICS, len(INCLUSION_VALUES)), dtype=np.int64)
    for f, tau in result.scored:
        exact = Fraction(tau)
        for slot, v in enumerate(f):
            col = INCLUSION_VALUES.index(v)
            sums[slot][col] += exact
            counts[slot, col] += 1
    means = np.array(
        [[float(sums[m][c] / int(counts[m, c])) for c in range(len(INCLUSION_VALUES))] for m in range(NUM_METRICS)]
    )
    return ContributionReport(METRIC_NAMES, INCLUSION_VALUES, means, counts)
