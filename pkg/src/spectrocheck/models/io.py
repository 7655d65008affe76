"""SPECMDL1 model files.

Byte layout::

    offset 0   8 bytes   magic b"SPECMDL1"
    offset 8   4 bytes   header length L, unsigned little-endian
    offset 12  L bytes   UTF-8 JSON header (sorted keys, compact separators)
    offset 12+L          parameter blocks, little-endian float64, row-major,
                         in the order of header["blocks"]

Header keys: ``format_version``, ``kind``, ``labels``, ``preprocessing``,
``hyperparameters``, ``blocks`` (list of ``{"name", "shape"}``),
``architecture`` (CNN only) and ``training`` (free-form metadata). Nothing
time-dependent is written unless the caller puts it in ``training``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError, SpectroError
from .cnn import CnnArchitecture, CnnModel
from .linear import LinearModel

MAGIC = b"SPECMDL1"
FORMAT_VERSION = 1


class ModelIOError(SpectroError, OSError):
    exit_code = 3


def _blocks(model):
    if isinstance(model, CnnModel):
        return [(name, model.params[name]) for name, _ in model.arch.param_shapes()]
    return [("weights", model.weights), ("bias", model.bias)]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def encode_model(model, training=None):
    blocks = _blocks(model)
    header = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "labels": list(model.labels),
        "preprocessing": model.preprocessing,
        "hyperparameters": _jsonable(model.hyper),
        "blocks": [{"name": n, "shape": list(np.shape(a))} for n, a in blocks],
        "training": _jsonable(training or {}),
    }
    if isinstance(model, CnnModel):
        header["architecture"] = model.arch.to_dict()
    text = json.dumps(header, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", len(text)), text]
    parts += [np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in blocks]
    return b"".join(parts)


def save_model(model, path, training=None):
    data = encode_model(model, training)
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise ModelIOError(f"{path}: {exc.strerror or exc}") from exc
    return len(data)


def decode_model(buf):
    """Returns ``(model, header)``."""
    if buf[:8] != MAGIC:
        raise FormatError("not a SPECMDL1 model file")
    if len(buf) < 12:
        raise FormatError("truncated model header")
    (hlen,) = struct.unpack("<I", buf[8:12])
    try:
        header = json.loads(buf[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt model header: {exc}") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported model format_version {header.get('format_version')!r}")
    offset = 12 + hlen
    arrays = {}
    for spec in header["blocks"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(buf):
            raise FormatError(f"model file truncated in block {spec['name']}")
        arrays[spec["name"]] = np.frombuffer(buf[offset:end], dtype="<f8").astype(np.float64).reshape(shape)
        offset = end
    if offset != len(buf):
        raise FormatError(f"{len(buf) - offset} trailing bytes after the last block")
    kind = header["kind"]
    labels = tuple(header["labels"])
    if kind == "cnn":
        a = header["architecture"]
        arch = CnnArchitecture(tuple(a["input_shape"]), tuple(a["conv_channels"]),
                               a["dense_units"], a["n_classes"])
        model = CnnModel(arch, arrays, labels, header["preprocessing"], header["hyperparameters"],
                         header["training"].get("history", []))
    else:
        model = LinearModel(kind, arrays["weights"], arrays["bias"], labels, header["preprocessing"],
                            header["hyperparameters"], {"loss": header["training"].get("loss", [])})
    return model, header


def load_model(path):
    try:
        buf = Path(path).read_bytes()
    except FileNotFoundError as exc:
        raise ModelIOError(f"{path}: model file not found") from exc
    except OSError as exc:
        raise ModelIOError(f"{path}: {exc.strerror or exc}") from exc
    return decode_model(buf)
