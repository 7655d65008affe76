import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spectrocheck import metrics
from spectrocheck.errors import InputError


def brute_auc(scores, y):
    pos = [s for s, t in zip(scores, y) if t == 1]
    neg = [s for s, t in zip(scores, y) if t == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def hand_mcc(tp, tn, fp, fn):
    d = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    return 0.0 if d == 0 else (tp * tn - fp * fn) / math.sqrt(d)


def test_confusion_examples():
    assert np.array_equal(metrics.confusion_matrix([0, 0, 1, 1], [0, 1, 1, 1], 2), [[1, 1], [0, 2]])
    assert np.array_equal(metrics.confusion_matrix([0, 1, 2], [0, 1, 2], 3), np.eye(3))
    assert not metrics.confusion_matrix([], [], 3).any()
    with pytest.raises(InputError):
        metrics.confusion_matrix([0, 1], [0], 2)
    with pytest.raises(InputError):
        metrics.confusion_matrix([0, 2], [0, 1], 2)


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), max_size=60))
def test_confusion_row_sums(pairs):
    truth = [a for a, _ in pairs]
    cm = metrics.confusion_matrix(truth, [b for _, b in pairs], 4)
    assert cm.sum(axis=1).tolist() == [truth.count(k) for k in range(4)]


def test_accuracy_examples():
    assert metrics.accuracy(np.diag([3, 4])) == 100.0
    assert metrics.accuracy([[239, 1], [1, 239]]) == pytest.approx(99.58, abs=0.005)
    assert metrics.accuracy([[0, 3], [5, 0]]) == 0.0
    with pytest.raises(InputError):
        metrics.accuracy(np.zeros((2, 2)))


def test_mcc_examples():
    assert metrics.mcc([[50, 0], [0, 50]]) == 1.0
    assert metrics.mcc([[95, 5], [5, 95]]) == pytest.approx(0.9)
    assert metrics.mcc([[0, 10], [0, 10]]) == 0.0
    with pytest.raises(InputError):
        metrics.mcc(np.eye(3))


def test_hinge_examples():
    assert metrics.mean_hinge_loss([1, -2], [1, -1]) == 0.0
    assert metrics.mean_hinge_loss([0.5], [1]) == 0.5
    assert metrics.mean_hinge_loss([0, 0], [1, -1]) == 1.0
    with pytest.raises(InputError):
        metrics.mean_hinge_loss([0, 0], [1])


def test_auc_examples():
    assert metrics.roc_auc([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0]) == 1.0
    assert metrics.roc_auc([0.9, 0.8, 0.3, 0.2], [0, 0, 1, 1]) == 0.0
    assert metrics.roc_auc([0.4] * 6, [0, 1, 0, 1, 1, 0]) == 0.5
    with pytest.raises(InputError):
        metrics.roc_auc([1, 2], [1, 1])


def test_auc_equals_all_pairs(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 101))
        y = rng.integers(0, 2, n)
        y[0], y[1] = 0, 1
        # coarse grid forces plenty of ties
        s = rng.integers(0, 8, n) / 4.0
        assert metrics.roc_auc(s, y) == brute_auc(s.tolist(), y.tolist())


def test_binary_metrics_on_random_matrices(rng):
    for _ in range(1000):
        tn, fp, fn, tp = (int(v) for v in rng.integers(0, 60, 4))
        cm = np.array([[tn, fp], [fn, tp]])
        if cm.sum() == 0:
            continue
        total = tn + fp + fn + tp
        assert metrics.accuracy(cm) == pytest.approx(100.0 * (tp + tn) / total, abs=1e-12)
        assert metrics.mcc(cm) == pytest.approx(hand_mcc(tp, tn, fp, fn), abs=1e-12)
        assert metrics.accuracy(cm) + metrics.zero_one_loss(cm) == 100.0
        assert -1.0 <= metrics.mcc(cm) <= 1.0
        assert (metrics.mcc(cm) == pytest.approx(1.0)) == (fp == fn == 0 and tp > 0 and tn > 0)


@given(st.lists(st.integers(0, 50), min_size=9, max_size=9).filter(lambda v: sum(v) > 0))
def test_accuracy_plus_loss_exact(counts):
    cm = np.array(counts).reshape(3, 3)
    assert metrics.accuracy(cm) + metrics.zero_one_loss(cm) == 100.0


def test_pearson_examples():
    t = np.array([1.0, 4.0, 2.0, 8.0])
    assert metrics.pearson_r(t, t) == 1.0
    assert metrics.pearson_r(-t, t) == -1.0
    assert metrics.pearson_r([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    with pytest.raises(InputError):
        metrics.pearson_r([1, 1, 1], [1, 2, 3])
    with pytest.raises(InputError):
        metrics.pearson_r([1], [1])


@given(st.floats(0.01, 100), st.floats(-100, 100), st.floats(0.01, 100), st.floats(-100, 100))
def test_pearson_affine_invariance(a, b, c, d):
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=30), rng.normal(size=30)
    base = metrics.pearson_r(x, y)
    assert metrics.pearson_r(a * x + b, c * y + d) == pytest.approx(base, abs=1e-12)


def test_regression_accuracy():
    t = np.array([0, 25, 50, 75, 100.0])
    assert metrics.regression_accuracy(t, t) == 100.0
    assert metrics.regression_accuracy(t + 1.39, t) == pytest.approx(98.61)
    assert metrics.regression_accuracy(t + 120, t) == 0.0
    with pytest.raises(InputError):
        metrics.regression_accuracy([1, 2], [1])
