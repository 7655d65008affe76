"""Binary PPM (P6, maxval 255) reading and writing."""

from pathlib import Path

import numpy as np

from .errors import FormatError
from .spectral import SpectrumImage

_WHITESPACE = b" \t\r\n\v\f"


def encode_ppm(img):
    """P6 bytes: ``b"P6\\n<w> <h>\\n255\\n"`` followed by row-major RGB."""
    data = img.data if isinstance(img, SpectrumImage) else np.asarray(img, dtype=np.uint8)
    h, w = data.shape[:2]
    return b"P6\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(data, dtype=np.uint8).tobytes()


def _tokens(buf, count):
    """Read ``count`` header tokens, skipping whitespace and ``#`` comments."""
    pos, out = 0, []
    n = len(buf)
    while len(out) < count:
        while pos < n and buf[pos] in _WHITESPACE:
            pos += 1
        if pos < n and buf[pos] == ord("#"):
            while pos < n and buf[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < n and buf[pos] not in _WHITESPACE and buf[pos] != ord("#"):
            pos += 1
        if start == pos:
            raise FormatError("truncated PPM header")
        out.append(bytes(buf[start:pos]))
    # exactly one whitespace byte separates maxval from the raster
    if pos >= n or buf[pos] not in _WHITESPACE:
        raise FormatError("missing whitespace after PPM header")
    return out, pos + 1


def decode_ppm(buf):
    if buf[:2] != b"P6":
        raise FormatError(f"not a binary PPM (magic {bytes(buf[:2])!r})")
    (magic, w, h, maxval), offset = _tokens(buf, 4)
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError("non-integer PPM header field") from None
    if w <= 0 or h <= 0:
        raise FormatError(f"invalid PPM size {w}x{h}")
    if maxval != 255:
        raise FormatError(f"only maxval 255 is supported, got {maxval}")
    need = w * h * 3
    raster = buf[offset:offset + need]
    if len(raster) != need:
        raise FormatError(f"PPM raster truncated: {len(raster)} of {need} bytes")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3)
    return SpectrumImage(arr)


def write_ppm(path, img):
    Path(path).write_bytes(encode_ppm(img))


def read_ppm(path):
    return decode_ppm(Path(path).read_bytes())
