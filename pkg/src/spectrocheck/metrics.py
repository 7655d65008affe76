"""Figures of merit: confusion matrix, accuracy, MCC, hinge loss, ROC AUC,
Pearson correlation and the regression "accuracy" used for dilution tables.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import rankdata

from .errors import InputError


def confusion_matrix(truth, pred, k):
    """``counts[i, j]`` = number of samples with true class i predicted as j."""
    truth = np.asarray(truth, dtype=np.int64).reshape(-1)
    pred = np.asarray(pred, dtype=np.int64).reshape(-1)
    if truth.size != pred.size:
        raise InputError(f"truth has {truth.size} labels, pred has {pred.size}")
    for name, arr in (("truth", truth), ("pred", pred)):
        if arr.size and (arr.min() < 0 or arr.max() >= k):
            raise InputError(f"{name} labels must lie in [0, {k})")
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (truth, pred), 1)
    return cm


def accuracy(cm):
    """Percent of samples on the diagonal."""
    cm = np.asarray(cm)
    total = cm.sum()
    if total <= 0:
        raise InputError("accuracy of an empty confusion matrix")
    return 100.0 * np.trace(cm) / total


def zero_one_loss(cm):
    """Percent misclassified; ``100 - accuracy`` computed from the same counts."""
    cm = np.asarray(cm)
    total = cm.sum()
    if total <= 0:
        raise InputError("loss of an empty confusion matrix")
    return 100.0 * (total - np.trace(cm)) / total


def binary_counts(cm):
    """``(tp, tn, fp, fn)`` with class 1 as the positive class."""
    cm = np.asarray(cm)
    if cm.shape != (2, 2):
        raise InputError(f"expected a 2x2 confusion matrix, got shape {cm.shape}")
    return int(cm[1, 1]), int(cm[0, 0]), int(cm[0, 1]), int(cm[1, 0])


def mcc(cm):
    """Matthews correlation; 0 whenever any marginal count is zero."""
    tp, tn, fp, fn = binary_counts(cm)
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom)


def mean_hinge_loss(scores, truth):
    """Mean of ``max(0, 1 - y*s)`` for labels ``y`` in {-1, +1}."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if scores.size != truth.size:
        raise InputError(f"{scores.size} scores but {truth.size} labels")
    if scores.size == 0:
        return 0.0
    return float(np.mean(np.maximum(0.0, 1.0 - truth * scores)))


def roc_auc(scores, truth):
    """P(score of a random positive > score of a random negative), ties 1/2.

    Mann-Whitney form on mid-ranks: ``(R_pos - n_pos(n_pos+1)/2) / (n_pos n_neg)``.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    if scores.size != truth.size:
        raise InputError(f"{scores.size} scores but {truth.size} labels")
    pos = truth == 1
    n_pos = int(pos.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InputError("ROC AUC needs both classes present")
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def pearson_r(pred, target):
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if pred.size != target.size:
        raise InputError(f"{pred.size} predictions but {target.size} targets")
    if pred.size < 2:
        raise InputError("correlation needs at least 2 points")
    dp = pred - pred.mean()
    dt = target - target.mean()
    sp, st = np.sqrt(dp @ dp), np.sqrt(dt @ dt)
    if sp == 0 or st == 0:
        raise InputError("correlation is undefined for a constant sequence")
    return float(np.clip((dp @ dt) / (sp * st), -1.0, 1.0))


def regression_accuracy(pred, target):
    """``100 - mean |pred - target|`` in percentage points, floored at 0.

    A reconstruction: dilution tables quote an "accuracy %" for regression
    without defining it.
    """
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if pred.size != target.size or pred.size == 0:
        raise InputError("regression accuracy needs equal, non-empty sequences")
    return max(0.0, 100.0 - float(np.mean(np.abs(pred - target))))


def one_vs_rest_hinge(scores, truth):
    """Mean hinge over every (sample, class) pair of one-vs-rest scores."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.int64)
    Y = -np.ones_like(scores)
    Y[np.arange(truth.size), truth] = 1.0
    return mean_hinge_loss(scores, Y)
