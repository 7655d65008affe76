"""Convolutional classifier written directly in numpy.

Layout is channels-last (N, H, W, C). Each stage is a valid 3x3 convolution
(stride 1), ReLU and 2x2 max-pooling; then a ReLU dense layer and an output
layer (one sigmoid unit for two classes, softmax otherwise).

Default shape chain for a 150x150x3 frame::

    conv 148x148x8 -> pool 74x74x8 -> conv 72x72x16 -> pool 36x36x16
    -> conv 34x34x32 -> pool 17x17x32 -> flatten 9248 -> dense 64 -> out
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit, log_expit, logsumexp, softmax

from ..errors import ConfigError, DivergenceError, ShapeError
from ..metrics import roc_auc
from ..preprocess import PREPROCESSING, to_features
from ..rng import Stream, derive
from ..spectral import IMAGE_SHAPE, SpectrumImage

DEFAULT_CHAIN = [
    ("conv", (148, 148, 8)), ("pool", (74, 74, 8)),
    ("conv", (72, 72, 16)), ("pool", (36, 36, 16)),
    ("conv", (34, 34, 32)), ("pool", (17, 17, 32)),
    ("flatten", (9248,)),
]


@dataclass(frozen=True)
class CnnArchitecture:
    input_shape: tuple = IMAGE_SHAPE
    conv_channels: tuple = (8, 16, 32)
    dense_units: int = 64
    n_classes: int = 2

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "conv_channels", tuple(int(v) for v in self.conv_channels))
        if self.n_classes < 2:
            raise ConfigError("a classifier needs at least 2 classes")
        h, w, _ = self.input_shape
        for k, _c in enumerate(self.conv_channels):
            if h < 4 or w < 4:
                raise ShapeError(
                    f"input {self.input_shape} too small for {len(self.conv_channels)} conv+pool stages "
                    f"(stage {k} sees {h}x{w})"
                )
            h, w = (h - 2) // 2, (w - 2) // 2
        if self.input_shape == IMAGE_SHAPE and self.conv_channels == (8, 16, 32):
            assert self.shape_chain() == DEFAULT_CHAIN

    @property
    def n_outputs(self):
        return 1 if self.n_classes == 2 else self.n_classes

    def shape_chain(self):
        h, w, c = self.input_shape
        chain = []
        for k in self.conv_channels:
            h, w, c = h - 2, w - 2, k
            chain.append(("conv", (h, w, c)))
            h, w = h // 2, w // 2
            chain.append(("pool", (h, w, c)))
        chain.append(("flatten", (h * w * c,)))
        return chain

    @property
    def flat_size(self):
        return self.shape_chain()[-1][1][0]

    def param_shapes(self):
        """Ordered ``(name, shape)`` of every parameter block."""
        shapes = []
        c = self.input_shape[2]
        for i, k in enumerate(self.conv_channels):
            shapes += [(f"conv{i}.w", (3, 3, c, k)), (f"conv{i}.b", (k,))]
            c = k
        shapes += [("dense.w", (self.flat_size, self.dense_units)), ("dense.b", (self.dense_units,)),
                   ("out.w", (self.dense_units, self.n_outputs)), ("out.b", (self.n_outputs,))]
        return shapes

    def to_dict(self):
        return {"input_shape": list(self.input_shape), "conv_channels": list(self.conv_channels),
                "dense_units": self.dense_units, "n_classes": self.n_classes}


@dataclass(frozen=True)
class CnnHyper:
    learning_rate: float = 0.01
    epochs: int = 15
    batch_size: int = 32
    seed: int = 0
    preprocessing: str = "unit"
    # arithmetic precision of training; parameters are stored as float64
    dtype: str = "float32"

    def __post_init__(self):
        if not self.learning_rate > 0 or self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("need learning_rate > 0, epochs >= 0, batch_size >= 1")
        if self.preprocessing not in PREPROCESSING:
            raise ConfigError(f"preprocessing must be one of {PREPROCESSING}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")


@dataclass
class CnnModel:
    arch: CnnArchitecture
    params: dict
    labels: tuple = ()
    preprocessing: str = "unit"
    hyper: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    kind = "cnn"

    def __post_init__(self):
        self.labels = tuple(self.labels)
        if self.labels and len(self.labels) != self.arch.n_classes:
            raise ConfigError(f"{len(self.labels)} labels for a {self.arch.n_classes}-class network")
        for name, shape in self.arch.param_shapes():
            if name not in self.params or tuple(self.params[name].shape) != shape:
                raise ShapeError(f"parameter {name} must have shape {shape}")

    @property
    def n_parameters(self):
        return sum(int(np.prod(s)) for _, s in self.arch.param_shapes())


def init_params(arch, seed=0):
    """Glorot-uniform weights in ``+-sqrt(6/(fan_in+fan_out))``, zero biases.

    Block ``i`` of :meth:`CnnArchitecture.param_shapes` draws from
    ``Stream(derive(seed, 0, i))``.
    """
    params = {}
    for i, (name, shape) in enumerate(arch.param_shapes()):
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
            continue
        if len(shape) == 4:
            fan_in, fan_out = 9 * shape[2], 9 * shape[3]
        else:
            fan_in, fan_out = shape
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        u = Stream(derive(seed, 0, i)).uniform(int(np.prod(shape)))
        params[name] = ((2.0 * u - 1.0) * limit).reshape(shape)
    return params


def zero_model(arch, labels=()):
    return CnnModel(arch, {n: np.zeros(s) for n, s in arch.param_shapes()}, labels)


# ---------------------------------------------------------------------------
# layers


def _im2col(x):
    """Patches ``(N*(H-2)*(W-2), 9*C)`` ordered (row offset, col offset, channel)."""
    n, h, w, c = x.shape
    p = sliding_window_view(x, (3, 3), axis=(1, 2))  # n, h-2, w-2, c, 3, 3
    return p.transpose(0, 1, 2, 4, 5, 3).reshape(n * (h - 2) * (w - 2), 9 * c)


def conv2d_forward(x, kernels, bias):
    """Valid 3x3 cross-correlation plus bias.

    ``x`` is ``(H, W, C)`` or ``(N, H, W, C)``; ``kernels`` is ``(3, 3, C, K)``.
    """
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.ndim != 4 or kernels.ndim != 4 or kernels.shape[:2] != (3, 3) or kernels.shape[2] != x.shape[3]:
        raise ShapeError(f"cannot convolve input {x.shape} with kernels {kernels.shape}")
    if bias.shape != (kernels.shape[3],):
        raise ShapeError(f"bias shape {bias.shape} does not match {kernels.shape[3]} kernels")
    n, h, w, _ = x.shape
    if h < 3 or w < 3:
        raise ShapeError(f"input {h}x{w} smaller than the 3x3 kernel")
    out = (_im2col(x) @ kernels.reshape(-1, kernels.shape[3]) + bias).reshape(n, h - 2, w - 2, -1)
    return out[0] if single else out


def _conv_backward(dout, x, cols, kernels, need_dx=True):
    k = kernels.shape[3]
    d = dout.reshape(-1, k)
    dw = (cols.T @ d).reshape(kernels.shape)
    db = d.sum(axis=0)
    if not need_dx:
        return None, dw, db
    _, h, w, _ = x.shape
    dx = np.zeros_like(x)
    for i in range(3):
        for j in range(3):
            dx[:, i:i + h - 2, j:j + w - 2, :] += dout @ kernels[i, j].T
    return dx, dw, db


def maxpool2x2(x):
    """2x2/2 max-pool; returns ``(pooled, argmax)``.

    ``argmax`` holds the window position 0..3 in row-major order (first
    occurrence on ties); an odd trailing row/column is dropped.
    """
    single = x.ndim == 3
    if single:
        x = x[None]
    n, h, w, k = x.shape
    if h < 2 or w < 2:
        raise ShapeError(f"cannot pool a {h}x{w} map")
    ho, wo = h // 2, w // 2
    win = x[:, :2 * ho, :2 * wo].reshape(n, ho, 2, wo, 2, k).transpose(0, 1, 3, 5, 2, 4)
    win = win.reshape(n, ho, wo, k, 4)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    if single:
        return out[0], arg[0]
    return out, arg


def _unpool(dout, arg, in_shape):
    n, ho, wo, k = dout.shape
    up = np.zeros((n, ho, wo, k, 4), dtype=dout.dtype)
    np.put_along_axis(up, arg[..., None], dout[..., None], axis=-1)
    up = up.reshape(n, ho, wo, k, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(n, 2 * ho, 2 * wo, k)
    dx = np.zeros(in_shape, dtype=dout.dtype)
    dx[:, :2 * ho, :2 * wo] = up
    return dx


# ---------------------------------------------------------------------------
# network


def _forward(arch, params, x):
    caches = []
    h = x
    for i in range(len(arch.conv_channels)):
        cols = _im2col(h)
        w, b = params[f"conv{i}.w"], params[f"conv{i}.b"]
        z = (cols @ w.reshape(-1, w.shape[3]) + b).reshape(h.shape[0], h.shape[1] - 2, h.shape[2] - 2, -1)
        a = np.maximum(z, 0)
        p, arg = maxpool2x2(a)
        caches.append((h, cols, z, arg))
        h = p
    flat = h.reshape(h.shape[0], -1)
    zd = flat @ params["dense.w"] + params["dense.b"]
    ad = np.maximum(zd, 0)
    logits = ad @ params["out.w"] + params["out.b"]
    return logits, (caches, h.shape, flat, zd, ad)


def _loss_and_dlogits(logits, y):
    n = logits.shape[0]
    if logits.shape[1] == 1:
        z = logits[:, 0]
        loss = -np.mean(y * log_expit(z) + (1 - y) * log_expit(-z))
        return loss, ((expit(z) - y) / n)[:, None].astype(logits.dtype)
    lse = logsumexp(logits, axis=1)
    loss = np.mean(lse - logits[np.arange(n), y])
    g = softmax(logits, axis=1)
    g[np.arange(n), y] -= 1
    return loss, (g / n).astype(logits.dtype)


def loss_and_grads(arch, params, x, y, return_logits=False):
    """Mean cross-entropy on a batch and the gradient of every parameter block."""
    logits, (caches, pooled_shape, flat, zd, ad) = _forward(arch, params, x)
    loss, dlog = _loss_and_dlogits(logits, y)
    grads = {"out.w": ad.T @ dlog, "out.b": dlog.sum(axis=0)}
    dad = dlog @ params["out.w"].T
    dzd = dad * (zd > 0)
    grads["dense.w"] = flat.T @ dzd
    grads["dense.b"] = dzd.sum(axis=0)
    dh = (dzd @ params["dense.w"].T).reshape(pooled_shape)
    for i in reversed(range(len(arch.conv_channels))):
        h_in, cols, z, arg = caches[i]
        dz = _unpool(dh, arg, z.shape) * (z > 0)
        dh, grads[f"conv{i}.w"], grads[f"conv{i}.b"] = _conv_backward(
            dz, h_in, cols, params[f"conv{i}.w"], need_dx=i > 0)
    if return_logits:
        return loss, grads, logits
    return loss, grads


def _prepare(model_or_pre, images, dtype):
    arr = images.data if isinstance(images, SpectrumImage) else np.asarray(images)
    if arr.dtype == np.uint8:
        return to_features(arr, model_or_pre, dtype)
    return arr.astype(dtype, copy=False)


def _probs_from_logits(logits):
    if logits.shape[1] == 1:
        p = expit(logits[:, 0].astype(np.float64))
        return np.stack([1.0 - p, p], axis=1)
    return softmax(logits.astype(np.float64), axis=1)


def predict_proba(model, images, batch_size=64, dtype=np.float64):
    """Class probabilities for a batch ``(N, H, W, 3)``."""
    x_all = np.asarray(images.data if isinstance(images, SpectrumImage) else images)
    if x_all.shape[1:] != model.arch.input_shape:
        raise ShapeError(f"network expects {model.arch.input_shape} inputs, got {x_all.shape[1:]}")
    params = {k: v.astype(dtype) for k, v in model.params.items()}
    out = []
    for s in range(0, x_all.shape[0], batch_size):
        x = _prepare(model.preprocessing, x_all[s:s + batch_size], dtype)
        logits, _ = _forward(model.arch, params, x)
        out.append(_probs_from_logits(logits))
    if not out:
        return np.zeros((0, model.arch.n_classes))
    return np.concatenate(out)


def cnn_forward(model, img):
    """Probability distribution over the model's classes for one frame."""
    arr = img.data if isinstance(img, SpectrumImage) else np.asarray(img)
    if arr.shape != model.arch.input_shape:
        raise ShapeError(f"network expects a {model.arch.input_shape} frame, got {arr.shape}")
    return predict_proba(model, arr[None])[0]


def logit_scores(model, images, batch_size=64):
    """Raw output-layer scores (positive-class logit for binary networks)."""
    x_all = np.asarray(images)
    out = []
    for s in range(0, x_all.shape[0], batch_size):
        x = _prepare(model.preprocessing, x_all[s:s + batch_size], np.float64)
        logits, _ = _forward(model.arch, model.params, x)
        out.append(logits[:, 0] if logits.shape[1] == 1 else logits)
    return np.concatenate(out)


def _epoch_metrics(model, images, y):
    probs = predict_proba(model, images, dtype=np.dtype(model.hyper.get("dtype", "float64")))
    acc = float(np.mean(np.argmax(probs, axis=1) == y)) * 100.0
    auc = None
    if model.arch.n_classes == 2 and np.unique(y).size == 2:
        auc = float(roc_auc(probs[:, 1], y))
    return acc, auc


def cnn_train(train_images, train_y, val_images, val_y, labels, hyper=None, arch=None,
              callback=None):
    """Mini-batch gradient descent on cross-entropy; returns ``(model, history)``.

    ``history`` has one dict per epoch with ``train_loss`` (mean of the batch
    losses seen during the epoch), ``train_accuracy`` (of those batches,
    before each update), ``val_accuracy`` and ``val_roc_auc``. ``callback``
    receives each epoch's dict as it completes.
    """
    hyper = hyper or CnnHyper()
    labels = tuple(labels)
    train_y = np.asarray(train_y, dtype=np.int64)
    val_y = np.asarray(val_y, dtype=np.int64)
    if len(train_images) == 0 or len(val_images) == 0:
        raise ConfigError("training and validation sets must be non-empty")
    if len(labels) < 2:
        raise ConfigError("need at least 2 classes")
    if len(train_images) != train_y.size or len(val_images) != val_y.size:
        raise ShapeError("images and labels differ in length")
    arch = arch or CnnArchitecture(tuple(train_images.shape[1:]), n_classes=len(labels))
    dtype = np.dtype(hyper.dtype)
    params = {k: v.astype(dtype) for k, v in init_params(arch, hyper.seed).items()}
    model = CnnModel(arch, params, labels, hyper.preprocessing, asdict(hyper))
    history = []
    n = train_y.size
    lr = dtype.type(hyper.learning_rate)
    for epoch in range(1, hyper.epochs + 1):
        order = Stream(derive(hyper.seed, 1, epoch)).permutation(n)
        total, correct = 0.0, 0
        for s in range(0, n, hyper.batch_size):
            idx = order[s:s + hyper.batch_size]
            x = _prepare(hyper.preprocessing, train_images[idx], dtype)
            loss, grads, logits = loss_and_grads(arch, params, x, train_y[idx], return_logits=True)
            if not np.isfinite(loss):
                raise DivergenceError(epoch, float(loss))
            total += float(loss) * idx.size
            pred = (logits[:, 0] > 0).astype(np.int64) if logits.shape[1] == 1 else logits.argmax(axis=1)
            correct += int(np.sum(pred == train_y[idx]))
            for name in params:
                params[name] -= lr * grads[name]
        val_acc, val_auc = _epoch_metrics(model, val_images, val_y)
        history.append({"epoch": epoch, "train_loss": total / n, "train_accuracy": 100.0 * correct / n,
                        "val_accuracy": val_acc, "val_roc_auc": val_auc})
        if callback is not None:
            callback(history[-1])
    model.params = {k: v.astype(np.float64) for k, v in params.items()}
    model.history = history
    return model, history


# ---------------------------------------------------------------------------
# verification


def sample_loss(arch, params, image, label):
    """``-log p(label)`` for one image (float64)."""
    x = np.asarray(image, dtype=np.float64)[None]
    logits, _ = _forward(arch, params, x)
    loss, _ = _loss_and_dlogits(logits, np.array([label]))
    return float(loss)


def gradient_check(arch, image, label, step=1e-5, n_params=200, seed=0, params=None):
    """Largest relative gap between backprop and central differences.

    Checks ``n_params`` parameters drawn across all blocks (all of them if
    fewer exist); the error of one parameter is
    ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    params = {k: np.array(v, dtype=np.float64) for k, v in
              (params if params is not None else init_params(arch, seed)).items()}
    x = np.asarray(image, dtype=np.float64)[None]
    _, grads = loss_and_grads(arch, params, x, np.array([label]))
    names = [n for n, _ in arch.param_shapes()]
    offsets = np.cumsum([0] + [params[n].size for n in names])
    total = int(offsets[-1])
    picks = np.arange(total) if total <= n_params else \
        np.sort(Stream(derive(seed, 2)).permutation(total)[:n_params])
    worst = 0.0
    for flat_idx in picks:
        block = int(np.searchsorted(offsets, flat_idx, side="right") - 1)
        name, j = names[block], int(flat_idx - offsets[block])
        p = params[name].reshape(-1)
        orig = p[j]
        p[j] = orig + step
        up = sample_loss(arch, params, image, label)
        p[j] = orig - step
        down = sample_loss(arch, params, image, label)
        p[j] = orig
        numeric = (up - down) / (2.0 * step)
        analytic = grads[name].reshape(-1)[j]
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst
