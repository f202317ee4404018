"""Independent reference implementations used only by the tests.

They are written for clarity, not speed, and share no code with the package.
"""

import itertools
import math
from fractions import Fraction


def naive_kendall(xs, ys):
    n = len(xs)
    concordant = discordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            if (xs[i] < xs[j] and ys[i] < ys[j]) or (xs[i] > xs[j] and ys[i] > ys[j]):
                concordant += 1
            elif (xs[i] < xs[j] and ys[i] > ys[j]) or (xs[i] > xs[j] and ys[i] < ys[j]):
                discordant += 1
    return (concordant - discordant) / (n * (n - 1) // 2)


def exact_h(x, f):
    """h(x, f) in exact rational arithmetic; ``x`` may hold floats or Fractions."""
    total = Fraction(0)
    for xi, fi in zip(x, f):
        xi = Fraction(xi)
        if fi == 1:
            total += xi
        elif fi == -1:
            total += 1 - xi
    return total


def brute_force_search(metric_rows, gaps):
    """Every inclusion vector in lexicographic order, its tau, and the first maximum."""
    all_f = list(itertools.product([-1, 0, 1], repeat=7))
    rows = [[Fraction(v) for v in row] for row in metric_rows]
    taus = []
    for f in all_f:
        h = [exact_h(row, f) for row in rows]
        taus.append(naive_kendall(h, list(gaps)))
    best_k = 0
    for k in range(1, len(all_f)):
        if taus[k] > taus[best_k]:
            best_k = k
    return all_f, taus, all_f[best_k], taus[best_k]


def two_pass_variance(values):
    n = len(values)
    mean = sum(values) / n
    return sum((v - mean) ** 2 for v in values) / n


def loop_cross_entropy(preds, labels):
    total = 0.0
    for row, y in zip(preds, labels):
        total += -math.log(max(row[y], 1e-12))
    return min(total / len(labels), 1.0)


def loop_softmax(logits):
    m = max(logits)
    e = [math.exp(v - m) for v in logits]
    s = sum(e)
    return [v / s for v in e]


def central_difference(fn, w, step=1e-6):
    grad = []
    for i in range(len(w)):
        plus = w.copy()
        minus = w.copy()
        plus[i] += step
        minus[i] -= step
        grad.append((fn(plus) - fn(minus)) / (2 * step))
    return grad


def relative_errors(analytic, numeric, floor=1e-5):
    return [abs(a - b) / max(abs(a), abs(b), floor) for a, b in zip(analytic, numeric)]
