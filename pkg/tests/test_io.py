import json
import struct

import numpy as np
import pytest

from spectrocheck.errors import FormatError
from spectrocheck.models.cnn import CnnArchitecture, CnnModel, init_params
from spectrocheck.models.io import MAGIC, ModelIOError, decode_model, encode_model, load_model, save_model
from spectrocheck.models.linear import LinearModel


def _linear(rng, rows=1, labels=("a", "b")):
    return LinearModel("svm", rng.normal(size=(rows, 5)), rng.normal(size=rows), labels, "unit",
                       {"learning_rate": 0.1})


def test_layout(rng):
    m = _linear(rng)
    buf = encode_model(m, {"split_seed": 0})
    assert buf[:8] == MAGIC
    (hlen,) = struct.unpack("<I", buf[8:12])
    header = json.loads(buf[12:12 + hlen])
    assert header["kind"] == "svm" and header["labels"] == ["a", "b"]
    assert header["blocks"] == [{"name": "weights", "shape": [1, 5]}, {"name": "bias", "shape": [1]}]
    assert header["preprocessing"] == "unit"
    body = np.frombuffer(buf[12 + hlen:], dtype="<f8")
    assert np.array_equal(body, np.concatenate([m.weights.ravel(), m.bias]))
    assert len(buf) == 12 + hlen + 8 * m.n_parameters


def test_linear_round_trip(rng, tmp_path):
    m = _linear(rng, rows=3, labels="xyz")
    n = save_model(m, tmp_path / "m.mdl", {"loss": [1.0, 0.5]})
    assert n == (tmp_path / "m.mdl").stat().st_size
    back, header = load_model(tmp_path / "m.mdl")
    assert np.array_equal(back.weights, m.weights) and np.array_equal(back.bias, m.bias)
    assert back.labels == ("x", "y", "z") and back.history == {"loss": [1.0, 0.5]}
    assert encode_model(back, header["training"]) == encode_model(m, {"loss": [1.0, 0.5]})


def test_cnn_round_trip():
    arch = CnnArchitecture((12, 12, 3), (4, 6), 16, 3)
    m = CnnModel(arch, init_params(arch, 4), ("a", "b", "c"), "unit", {"learning_rate": 0.01})
    back, header = decode_model(encode_model(m, {"history": [{"epoch": 1}]}))
    assert back.arch == arch
    assert all(np.array_equal(back.params[k], m.params[k]) for k in m.params)
    assert back.history == [{"epoch": 1}]
    assert [b["name"] for b in header["blocks"]] == [n for n, _ in arch.param_shapes()]


def test_deterministic_bytes(rng):
    m = _linear(rng)
    assert encode_model(m) == encode_model(m)


@pytest.mark.parametrize("mutate", [
    lambda b: b"NOTMODEL" + b[8:],
    lambda b: b[:-1],
    lambda b: b + b"\x00",
    lambda b: b[:14],
])
def test_corrupt(rng, mutate):
    with pytest.raises(FormatError):
        decode_model(mutate(encode_model(_linear(rng))))


def test_missing_file(tmp_path):
    with pytest.raises(ModelIOError):
        load_model(tmp_path / "nope.mdl")
