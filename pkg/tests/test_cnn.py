import numpy as np
import pytest

from spectrocheck.errors import ConfigError, DivergenceError, ShapeError
from spectrocheck.models.cnn import (
    DEFAULT_CHAIN,
    CnnArchitecture,
    CnnHyper,
    cnn_forward,
    cnn_train,
    conv2d_forward,
    gradient_check,
    init_params,
    loss_and_grads,
    maxpool2x2,
    predict_proba,
    zero_model,
)
from spectrocheck.spectral import SpectrumImage

TOY = CnnArchitecture((12, 12, 3), (4, 6), 16, 2)


def conv_reference(x, k, b):
    h, w, c = x.shape
    out = np.zeros((h - 2, w - 2, k.shape[3]))
    for i in range(h - 2):
        for j in range(w - 2):
            for o in range(k.shape[3]):
                acc = b[o]
                for di in range(3):
                    for dj in range(3):
                        for ch in range(c):
                            acc += x[i + di, j + dj, ch] * k[di, dj, ch, o]
                out[i, j, o] = acc
    return out


def test_conv_identity_kernel(rng):
    x = rng.random((7, 9, 2))
    k = np.zeros((3, 3, 2, 2))
    k[1, 1, 0, 0] = k[1, 1, 1, 1] = 1.0
    assert np.array_equal(conv2d_forward(x, k, np.zeros(2)), x[1:-1, 1:-1])


def test_conv_all_ones():
    out = conv2d_forward(np.ones((5, 5, 1)), np.ones((3, 3, 1, 1)), np.zeros(1))
    assert out.shape == (3, 3, 1) and np.all(out == 9)


def test_conv_matches_reference_6x6x2(rng):
    x, k, b = rng.normal(size=(6, 6, 2)), rng.normal(size=(3, 3, 2, 2)), rng.normal(size=2)
    assert np.allclose(conv2d_forward(x, k, b), conv_reference(x, k, b), rtol=0, atol=1e-12)


def test_conv_equals_reference_exactly(rng):
    # quarter-integer operands: every partial sum is exact, so summation order cannot matter
    for _ in range(100):
        h, w, c, o = (int(v) for v in rng.integers([3, 3, 1, 1], [9, 9, 4, 5]))
        x = rng.integers(-8, 9, (h, w, c)) / 4.0
        k = rng.integers(-8, 9, (3, 3, c, o)) / 4.0
        b = rng.integers(-8, 9, o) / 4.0
        assert np.array_equal(conv2d_forward(x, k, b), conv_reference(x, k, b))


def test_conv_batched_and_errors(rng):
    x, k, b = rng.normal(size=(3, 6, 5, 2)), rng.normal(size=(3, 3, 2, 4)), rng.normal(size=4)
    out = conv2d_forward(x, k, b)
    assert out.shape == (3, 4, 3, 4)
    assert np.allclose(out[1], conv2d_forward(x[1], k, b))
    with pytest.raises(ShapeError):
        conv2d_forward(x, rng.normal(size=(3, 3, 3, 4)), b)
    with pytest.raises(ShapeError):
        conv2d_forward(np.ones((2, 5, 1)), np.ones((3, 3, 1, 1)), np.zeros(1))


def test_pool_rules():
    out, arg = maxpool2x2(np.full((4, 6, 2), 3.0))
    assert np.all(out == 3.0) and np.all(arg == 0)
    win = np.array([[1.0, 2.0], [3.0, 4.0]])[:, :, None]
    out, arg = maxpool2x2(win)
    assert out[0, 0, 0] == 4.0 and arg[0, 0, 0] == 3
    out, _ = maxpool2x2(np.arange(25.0).reshape(5, 5, 1))
    assert out.shape == (2, 2, 1)
    assert out[:, :, 0].tolist() == [[6.0, 8.0], [16.0, 18.0]]


def test_pool_non_argmax_perturbation(rng):
    for _ in range(50):
        x = rng.normal(size=(6, 6, 2))
        out, arg = maxpool2x2(x)
        i, j, c = (int(v) for v in rng.integers([0, 0, 0], [3, 3, 2]))
        pos = int(arg[i, j, c])
        other = (pos + 1 + int(rng.integers(0, 3))) % 4
        di, dj = divmod(other, 2)
        y = x.copy()
        gap = out[i, j, c] - x[2 * i + di, 2 * j + dj, c]
        y[2 * i + di, 2 * j + dj, c] += gap / 2
        assert np.array_equal(maxpool2x2(y)[0], out)
        y[2 * i + di, 2 * j + dj, c] -= gap
        assert np.array_equal(maxpool2x2(y)[0], out)


def test_default_shape_chain():
    arch = CnnArchitecture()
    assert arch.shape_chain() == DEFAULT_CHAIN
    assert arch.flat_size == 9248
    shapes = dict(arch.param_shapes())
    assert shapes["dense.w"] == (9248, 64) and shapes["out.w"] == (64, 1)
    assert CnnArchitecture(n_classes=5).param_shapes()[-1] == ("out.b", (5,))
    with pytest.raises(ShapeError):
        CnnArchitecture((12, 12, 3), (8, 16, 32))
    with pytest.raises(ConfigError):
        CnnArchitecture(n_classes=1)


def test_zero_model_is_uniform():
    img = SpectrumImage(np.full((150, 150, 3), 90, dtype=np.uint8))
    assert np.array_equal(cnn_forward(zero_model(CnnArchitecture(), ("a", "b")), img), [0.5, 0.5])
    p = predict_proba(zero_model(CnnArchitecture(n_classes=3), "abc"), img.data[None])
    assert np.allclose(p, 1 / 3)


def test_forward_deterministic_and_normalised(rng):
    arch = CnnArchitecture(n_classes=4)
    from spectrocheck.models.cnn import CnnModel
    model = CnnModel(arch, init_params(arch, 3), "abcd")
    img = rng.integers(0, 256, (150, 150, 3), dtype=np.uint8)
    a, b = cnn_forward(model, img), cnn_forward(model, img)
    assert np.array_equal(a, b)
    assert abs(a.sum() - 1.0) <= 1e-9
    with pytest.raises(ShapeError):
        cnn_forward(model, img[:100, :100])


@pytest.mark.parametrize("label", [0, 1])
def test_gradient_check_toy_binary(rng, label):
    img = rng.random((12, 12, 3))
    assert gradient_check(TOY, img, label, step=1e-5, n_params=300) < 1e-3


def test_gradient_check_toy_multiclass(rng):
    arch = CnnArchitecture((12, 12, 3), (4, 6), 16, 3)
    assert gradient_check(arch, rng.random((12, 12, 3)), 2, step=1e-5, n_params=300) < 1e-3


def test_gradient_check_three_stages(rng):
    arch = CnnArchitecture((22, 22, 3), (4, 6, 8), 16, 2)
    assert gradient_check(arch, rng.random((22, 22, 3)), 1, step=1e-5) < 1e-3


def test_gradient_check_step_too_large(rng):
    img = rng.random((12, 12, 3))
    assert gradient_check(TOY, img, 1, step=1e-1) > gradient_check(TOY, img, 1, step=1e-5)


def test_gradient_check_identity_convs(rng):
    # identity kernels and positive inputs: every ReLU passes, the net is linear up to the head
    arch = CnnArchitecture((12, 12, 3), (3, 3), 8, 2)
    params = init_params(arch, 0)
    for name in ("conv0", "conv1"):
        k = np.zeros((3, 3, 3, 3))
        for c in range(3):
            k[1, 1, c, c] = 1.0
        params[name + ".w"] = k
    params["dense.b"] = np.full(8, 5.0)
    img = 0.5 + 0.5 * rng.random((12, 12, 3))
    assert gradient_check(arch, img, 1, step=1e-5, n_params=300, params=params) < 1e-6


def test_gradient_shapes(rng):
    params = init_params(TOY, 1)
    loss, grads = loss_and_grads(TOY, params, rng.random((4, 12, 12, 3)), np.array([0, 1, 1, 0]))
    assert np.isfinite(loss)
    assert {k: v.shape for k, v in grads.items()} == {k: v.shape for k, v in params.items()}


def test_init_is_glorot_and_seeded():
    a, b, c = init_params(TOY, 0), init_params(TOY, 0), init_params(TOY, 1)
    lim = np.sqrt(6 / (9 * 3 + 9 * 4))
    assert np.abs(a["conv0.w"]).max() <= lim
    assert not a["conv0.b"].any()
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert not np.array_equal(a["dense.w"], c["dense.w"])


def _toy_images(rng, n):
    y = np.arange(n) % 2
    imgs = rng.integers(0, 120, (n, 12, 12, 3)).astype(np.uint8)
    imgs[y == 1, :, 6:] += 100
    return imgs, y


def test_training_history_and_determinism(rng):
    imgs, y = _toy_images(rng, 10)
    hyper = CnnHyper(epochs=1, batch_size=4, dtype="float64")
    model, history = cnn_train(imgs, y, imgs, y, ("a", "b"), hyper, arch=TOY)
    assert len(history) == 1
    assert set(history[0]) == {"epoch", "train_loss", "train_accuracy", "val_accuracy", "val_roc_auc"}
    again, _ = cnn_train(imgs, y, imgs, y, ("a", "b"), hyper, arch=TOY)
    assert all(model.params[k].tobytes() == again.params[k].tobytes() for k in model.params)


def test_training_learns_toy(rng):
    imgs, y = _toy_images(rng, 40)
    hyper = CnnHyper(epochs=30, batch_size=8, learning_rate=0.05, dtype="float64")
    _, history = cnn_train(imgs, y, imgs, y, ("a", "b"), hyper, arch=TOY)
    assert history[-1]["train_loss"] < history[0]["train_loss"]
    assert history[-1]["val_accuracy"] == 100.0


def test_training_errors(rng):
    imgs, y = _toy_images(rng, 6)
    with pytest.raises(ConfigError):
        cnn_train(imgs, y, imgs[:0], y[:0], ("a", "b"), arch=TOY)
    with pytest.raises(DivergenceError), np.errstate(all="ignore"):
        cnn_train(imgs, y, imgs, y, ("a", "b"),
                  CnnHyper(epochs=5, batch_size=2, learning_rate=1e200, dtype="float64"), arch=TOY)
