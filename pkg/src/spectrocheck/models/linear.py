"""Logistic regression, linear SVM and ridge linear regression, trained by
plain mini-batch gradient descent with a fixed step.

Inputs are either uint8 pixel matrices, scaled per batch according to the
model's ``preprocessing`` flag, or float matrices taken as already-scaled
features. Weights always start at zero, so the optimum does not depend on the
seed; the seed only orders the mini-batches (``Stream(derive(seed, epoch))``).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import expit, log_expit, logsumexp, softmax

from ..errors import ConfigError, DivergenceError, KindError, ShapeError
from ..preprocess import PREPROCESSING, to_features
from ..rng import Stream, derive

KINDS = ("logreg", "svm", "linreg")
_CHUNK = 256


@dataclass(frozen=True)
class LinearHyper:
    learning_rate: float
    epochs: int = 30
    batch_size: int = 32
    regularization: float = 0.0
    seed: int = 0
    preprocessing: str = "unit"
    # optimise on mean-centred features; the mean is folded back into the bias
    center: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.regularization < 0:
            raise ConfigError("regularization must be >= 0")
        if self.preprocessing not in PREPROCESSING:
            raise ConfigError(f"preprocessing must be one of {PREPROCESSING}")


DEFAULT_HYPER = {
    "logreg": LinearHyper(learning_rate=0.1),
    "svm": LinearHyper(learning_rate=0.1, regularization=1e-4),
    "linreg": LinearHyper(learning_rate=1e-3, regularization=1e-6),
}


def default_hyper(kind, **overrides):
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(DEFAULT_HYPER[kind], **overrides)


@dataclass
class LinearModel:
    kind: str
    weights: np.ndarray  # (rows, features); rows = 1 for linreg and binary classifiers
    bias: np.ndarray  # (rows,)
    labels: tuple = ()
    preprocessing: str = "unit"
    hyper: dict = field(default_factory=dict)
    history: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise KindError(f"unknown linear model kind {self.kind!r}")
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=np.float64))
        self.bias = np.atleast_1d(np.asarray(self.bias, dtype=np.float64))
        self.labels = tuple(self.labels)
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(f"bias shape {self.bias.shape} does not match weights {self.weights.shape}")
        if self.kind != "linreg":
            if not self.labels or len(set(self.labels)) != len(self.labels):
                raise ConfigError("label_set must be non-empty and duplicate-free")
            want = 1 if len(self.labels) == 2 else len(self.labels)
            if self.weights.shape[0] != want:
                raise ShapeError(f"{len(self.labels)} classes need {want} weight rows, got {self.weights.shape[0]}")

    @property
    def n_features(self):
        return self.weights.shape[1]

    @property
    def n_classes(self):
        return len(self.labels)

    @property
    def n_parameters(self):
        return self.weights.size + self.bias.size


# ---------------------------------------------------------------------------
# objectives and analytic gradients (float inputs)


def logreg_loss_grad(W, b, X, y):
    """Mean cross-entropy and its gradient.

    One weight row means binary (sigmoid, ``y`` in {0, 1}); K rows mean
    multinomial softmax over K classes.
    """
    n = X.shape[0]
    if W.shape[0] == 1:
        z = X @ W[0] + b[0]
        loss = -np.mean(y * log_expit(z) + (1 - y) * log_expit(-z))
        g = (expit(z) - y) / n
        return loss, (g @ X)[None, :], np.array([g.sum()])
    Z = X @ W.T + b
    lse = logsumexp(Z, axis=1)
    loss = np.mean(lse - Z[np.arange(n), y])
    G = softmax(Z, axis=1)
    G[np.arange(n), y] -= 1.0
    G /= n
    return loss, G.T @ X, G.sum(axis=0)


def _svm_targets(y, rows):
    if rows == 1:
        return np.where(y == 1, 1.0, -1.0)[:, None]
    Y = -np.ones((y.size, rows))
    Y[np.arange(y.size), y] = 1.0
    return Y


def svm_loss_grad(W, b, X, y, lam):
    """Sum over one-vs-rest problems of ``lam*|w_k|^2 + mean hinge``, and a subgradient.

    At a margin of exactly 1 the hinge term contributes zero.
    """
    n = X.shape[0]
    Y = _svm_targets(y, W.shape[0])
    margins = Y * (X @ W.T + b)
    active = margins < 1.0
    loss = lam * np.sum(W * W) + np.sum(np.maximum(0.0, 1.0 - margins)) / n
    G = -(Y * active) / n
    return loss, G.T @ X + 2.0 * lam * W, G.sum(axis=0)


def linreg_loss_grad(W, b, X, t, alpha):
    """Mean squared error plus ``alpha*|w|^2`` and its gradient."""
    n = X.shape[0]
    r = X @ W[0] + b[0] - t
    loss = np.mean(r * r) + alpha * np.sum(W * W)
    g = 2.0 * r / n
    return loss, (g @ X)[None, :] + 2.0 * alpha * W, np.array([g.sum()])


def _features(X, preprocessing):
    if X.dtype == np.uint8:
        return to_features(X, preprocessing)
    return np.asarray(X, dtype=np.float64)


def _objective(kind, hyper):
    if kind == "logreg":
        return lambda W, b, X, y: logreg_loss_grad(W, b, X, y)
    if kind == "svm":
        return lambda W, b, X, y: svm_loss_grad(W, b, X, y, hyper.regularization)
    return lambda W, b, X, y: linreg_loss_grad(W, b, X, y, hyper.regularization)


def feature_mean(X, preprocessing):
    n = X.shape[0]
    total = np.zeros(X.shape[1])
    for s in range(0, n, _CHUNK):
        total += _features(X[s:s + _CHUNK], preprocessing).sum(axis=0)
    return total / n


def full_loss(kind, hyper, W, b, X, y, shift=None):
    """Objective over the whole set, evaluated in fixed-size chunks.

    Data terms are means, so chunk losses are weighted by chunk size; the
    regulariser is added once. ``shift`` is subtracted from every feature row.
    """
    n = X.shape[0]
    reg = 0.0 if kind == "logreg" else hyper.regularization * np.sum(W * W)
    total = 0.0
    f = _objective(kind, replace(hyper, regularization=0.0))
    for s in range(0, n, _CHUNK):
        xb = _features(X[s:s + _CHUNK], hyper.preprocessing)
        if shift is not None:
            xb = xb - shift  # xb may be a view of the caller's float data
        loss, _, _ = f(W, b, xb, y[s:s + _CHUNK])
        total += loss * xb.shape[0]
    return total / n + reg


def _gradient_descent(kind, X, y, rows, hyper):
    """Fixed-step mini-batch descent; returns weights, bias and per-epoch losses.

    With ``hyper.center`` the iterates live on ``x - mean(x)``: the affine
    function is the same family, but the dominant mean-image direction no
    longer limits the stable step size.
    """
    n, d = X.shape
    W = np.zeros((rows, d))
    b = np.zeros(rows)
    mu = feature_mean(X, hyper.preprocessing) if hyper.center else None
    f = _objective(kind, hyper)
    losses = [full_loss(kind, hyper, W, b, X, y, mu)]
    for epoch in range(1, hyper.epochs + 1):
        order = Stream(derive(hyper.seed, epoch)).permutation(n)
        # overflow is reported as DivergenceError below, not as numpy warnings
        with np.errstate(over="ignore", invalid="ignore"):
            for s in range(0, n, hyper.batch_size):
                idx = order[s:s + hyper.batch_size]
                xb = _features(X[idx], hyper.preprocessing)
                if mu is not None:
                    xb -= mu
                _, gW, gb = f(W, b, xb, y[idx])
                W -= hyper.learning_rate * gW
                b -= hyper.learning_rate * gb
            loss = full_loss(kind, hyper, W, b, X, y, mu)
        if not np.isfinite(loss) or not np.all(np.isfinite(W)):
            raise DivergenceError(epoch, loss)
        losses.append(loss)
    if mu is not None:
        b = b - W @ mu
    return W, b, losses


def _class_targets(y, labels):
    """Class indices for ``y``; integer ``y`` with explicit ``labels`` are indices already."""
    y = np.asarray(y)
    if labels is None:
        labels = tuple(np.unique(y).tolist())
        index = {lab: k for k, lab in enumerate(labels)}
        idx = np.array([index[v] for v in y.tolist()], dtype=np.int64)
    elif y.dtype.kind in "iu":
        idx = y.astype(np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= len(labels)):
            raise ConfigError(f"class index out of range for {len(labels)} labels")
    else:
        index = {lab: k for k, lab in enumerate(labels)}
        try:
            idx = np.array([index[v] for v in y.tolist()], dtype=np.int64)
        except KeyError as exc:
            raise ConfigError(f"label {exc.args[0]!r} not in label set {tuple(labels)}") from None
    labels = tuple(labels)
    present = np.unique(idx)
    if len(labels) < 2 or present.size < len(labels):
        raise ConfigError(
            f"need >= 2 classes with >= 1 sample each; got {present.size} of {len(labels)} labels present"
        )
    return idx, labels


def _check_xy(X, y):
    X = np.asarray(X)
    if X.ndim != 2:
        raise ShapeError(f"training features must be 2-D, got {X.shape}")
    if len(y) != X.shape[0]:
        raise ShapeError(f"{X.shape[0]} samples but {len(y)} targets")
    return X


def logreg_train(X, y, labels=None, hyper=None):
    """Binary (sigmoid) or multinomial (softmax) logistic regression.

    ``y`` holds class indices into ``labels`` (or raw label values). The
    returned model's ``history["loss"]`` starts with the loss at the zero
    initialisation, followed by one entry per epoch.
    """
    hyper = hyper or DEFAULT_HYPER["logreg"]
    X = _check_xy(X, y)
    idx, labels = _class_targets(y, labels)
    rows = 1 if len(labels) == 2 else len(labels)
    W, b, losses = _gradient_descent("logreg", X, idx, rows, hyper)
    return LinearModel("logreg", W, b, labels, hyper.preprocessing, asdict(hyper), {"loss": losses})


def svm_train(X, y, labels=None, hyper=None):
    """Soft-margin linear SVM (one-vs-rest for more than two classes)."""
    hyper = hyper or DEFAULT_HYPER["svm"]
    X = _check_xy(X, y)
    idx, labels = _class_targets(y, labels)
    rows = 1 if len(labels) == 2 else len(labels)
    W, b, losses = _gradient_descent("svm", X, idx, rows, hyper)
    return LinearModel("svm", W, b, labels, hyper.preprocessing, asdict(hyper), {"loss": losses})


def linreg_fit(X, t, hyper=None):
    """Ridge-regularised least squares on dilution percent targets."""
    hyper = hyper or DEFAULT_HYPER["linreg"]
    X = _check_xy(X, t)
    t = np.asarray(t, dtype=np.float64)
    if np.unique(t).size < 2:
        raise ConfigError("linear regression needs at least 2 distinct target values")
    W, b, losses = _gradient_descent("linreg", X, t, 1, hyper)
    return LinearModel("linreg", W, b, (), hyper.preprocessing, asdict(hyper), {"loss": losses})


# ---------------------------------------------------------------------------
# prediction


def _as_batch(model, x):
    x = np.asarray(x)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeError(f"model expects {model.n_features} features, got shape {x.shape}")
    return single, X


def _raw_scores(model, X):
    out = np.empty((X.shape[0], model.weights.shape[0]))
    for s in range(0, X.shape[0], _CHUNK):
        xb = _features(X[s:s + _CHUNK], model.preprocessing)
        out[s:s + _CHUNK] = xb @ model.weights.T + model.bias
    return out


def decision_scores(model, x):
    """Per-class scores; argmax is the prediction.

    Binary logistic models give ``(0, z)`` so the softmax of the scores is the
    sigmoid probability; binary SVMs give ``(-s, s)``.
    """
    if model.kind == "linreg":
        raise KindError("decision scores are not defined for linear regression")
    single, X = _as_batch(model, x)
    S = _raw_scores(model, X)
    if model.weights.shape[0] == 1:
        s = S[:, 0]
        S = np.stack([np.zeros_like(s) if model.kind == "logreg" else -s, s], axis=1)
    return S[0] if single else S


def svm_decision(model, x):
    if model.kind != "svm":
        raise KindError(f"svm_decision needs an svm model, got {model.kind}")
    return decision_scores(model, x)


def margin_scores(model, x):
    """Signed score of the positive class (binary) or all one-vs-rest scores."""
    single, X = _as_batch(model, x)
    S = _raw_scores(model, X)
    if model.weights.shape[0] == 1:
        S = S[:, 0]
    return S[0] if single else S


def logreg_predict_proba(model, x):
    if model.kind != "logreg":
        raise KindError(f"probabilities need a logreg model, got {model.kind}")
    return softmax(decision_scores(model, x), axis=-1)


def argmax_lowest(scores):
    """Argmax along the last axis; ties go to the lowest index."""
    return np.argmax(np.asarray(scores), axis=-1)


def predict_index(model, x):
    if model.kind == "linreg":
        raise KindError("predict_class is not defined for linear regression")
    return argmax_lowest(decision_scores(model, x))


def predict_class(model, x):
    idx = predict_index(model, x)
    if np.ndim(idx) == 0:
        return model.labels[int(idx)]
    return [model.labels[i] for i in idx]


def linreg_raw(model, x):
    if model.kind != "linreg":
        raise KindError(f"linreg_predict needs a linreg model, got {model.kind}")
    single, X = _as_batch(model, x)
    out = _raw_scores(model, X)[:, 0]
    return out[0] if single else out


def clamp_percent(values):
    return np.clip(values, 0.0, 100.0)


def linreg_predict(model, x):
    """Dilution percent, clamped to [0, 100]."""
    return clamp_percent(linreg_raw(model, x))
