import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gencombo.ranking import generalization_gap, kendall_tau
from oracles import naive_kendall


@pytest.mark.parametrize(
    "train_acc, val_acc, gap",
    [(1.0, 0.8, 0.2), (0.6, 0.6, 0.0), (0.3, 0.9, 0.6)],
)
def test_generalization_gap(train_acc, val_acc, gap):
    assert generalization_gap(train_acc, val_acc) == gap


@settings(max_examples=300)
@given(st.integers(0, 200), st.integers(0, 200), st.integers(0, 200), st.integers(0, 200))
def test_equal_gaps_compare_equal(a, b, c, d):
    gap_ab = generalization_gap(a / 200, b / 200)
    gap_cd = generalization_gap(c / 200, d / 200)
    assert gap_ab == pytest.approx(abs(a - b) / 200, abs=1e-15)
    assert (gap_ab == gap_cd) == (abs(a - b) == abs(c - d))


def test_gap_rejects_out_of_range():
    with pytest.raises(ValueError):
        generalization_gap(1.2, 0.5)
    with pytest.raises(ValueError):
        generalization_gap(0.5, -0.1)


def test_kendall_examples():
    assert kendall_tau([1, 2, 3], [1, 2, 3]) == 1.0
    assert kendall_tau([1, 2, 3], [3, 2, 1]) == -1.0
    # pairs: (1,2)+ (1,3)+ (1,4)+ (2,3)- (2,4)+ (3,4)+
    assert kendall_tau([1, 2, 3, 4], [1, 3, 2, 4]) == 4 / 6
    # pair (0,1) is tied in x and counts as neither; (0,2) and (1,2) are concordant
    assert kendall_tau([1, 1, 2], [1, 2, 3]) == 2 / 3


def test_kendall_rejects_bad_input():
    with pytest.raises(ValueError):
        kendall_tau([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        kendall_tau([1], [1])
    with pytest.raises(ValueError):
        kendall_tau([1.0, float("nan")], [1.0, 2.0])


values = st.lists(st.integers(-5, 5), min_size=2, max_size=30)


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_kendall_matches_oracle_and_properties(data):
    xs = data.draw(values)
    ys = data.draw(st.lists(st.integers(-5, 5), min_size=len(xs), max_size=len(xs)))
    tau = kendall_tau(xs, ys)
    assert tau == naive_kendall(xs, ys)
    assert -1.0 <= tau <= 1.0
    assert kendall_tau(ys, xs) == tau
    assert kendall_tau([-x for x in xs], ys) == -tau
    # strictly increasing transform
    assert kendall_tau([x**3 + 7 * x for x in xs], ys) == tau
    assert kendall_tau(np.exp(np.array(xs, dtype=float)), ys) == tau


def test_tau_one_only_when_all_pairs_concordant():
    assert kendall_tau([1, 2, 3], [1, 2, 2]) < 1.0
    assert kendall_tau([0.1, 0.5, 0.7], [2, 3, 9]) == 1.0
