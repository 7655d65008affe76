"""Turn frames into model inputs and labelled train/test splits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, RangeError, ShapeError
from .rng import Stream, derive
from .spectral import IMAGE_HEIGHT, IMAGE_WIDTH, LabeledDataset, SpectrumImage

# Recorded in every model file; "unit" divides bytes by 255, "raw" keeps 0..255.
PREPROCESSING = ("unit", "raw")


def crop(raw, x, y, width=IMAGE_WIDTH, height=IMAGE_HEIGHT):
    """Exact ``height x width`` window of ``raw`` whose top-left pixel is ``(x, y)``."""
    data = raw.data if isinstance(raw, SpectrumImage) else np.asarray(raw)
    if width != IMAGE_WIDTH or height != IMAGE_HEIGHT:
        raise RangeError(f"crop must be {IMAGE_WIDTH}x{IMAGE_HEIGHT}, got {width}x{height}")
    h, w = data.shape[:2]
    if x < 0 or y < 0 or x + width > w or y + height > h:
        raise RangeError(
            f"crop rectangle ({x}, {y}, {width}, {height}) does not fit in a {w}x{h} image"
        )
    return SpectrumImage(data[y:y + height, x:x + width].copy())


def flatten_normalize(img):
    """Row-major, channel-interleaved pixels scaled to [0, 1] (length 67,500 for a standard frame)."""
    data = img.data if isinstance(img, SpectrumImage) else np.asarray(img, dtype=np.uint8)
    return data.reshape(-1).astype(np.float64) / 255.0


def to_features(pixels, preprocessing="unit", dtype=np.float64):
    """Scale a uint8 array (any shape) the way a model file declares."""
    if preprocessing not in PREPROCESSING:
        raise ConfigError(f"unknown preprocessing {preprocessing!r}, expected one of {PREPROCESSING}")
    out = np.asarray(pixels).astype(dtype)
    if preprocessing == "unit":
        out /= 255.0
    return out


def feature_matrix(images):
    """Stack frames into an ``(n, 67500)`` uint8 matrix; scaling happens per batch."""
    arr = np.asarray(images, dtype=np.uint8)
    if arr.ndim != 4:
        raise ShapeError(f"expected (n, H, W, 3) images, got {arr.shape}")
    return arr.reshape(arr.shape[0], -1)


@dataclass
class SplitPair:
    train: LabeledDataset
    test: LabeledDataset
    train_indices: np.ndarray
    test_indices: np.ndarray


def split_indices(labels, train_fraction, seed):
    """Per-class shuffled holdout; returns sorted ``(train_idx, test_idx)``.

    Class ``k`` (in first-seen order of sorted unique labels) is shuffled with
    ``Stream(derive(seed, k)).permutation`` and its first
    ``max(1, floor(n * train_fraction))`` members go to train.
    """
    labels = np.asarray(labels)
    if not 0 < train_fraction < 1:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    train, test = [], []
    for k, cls in enumerate(np.unique(labels)):
        members = np.flatnonzero(labels == cls)
        if members.size < 2:
            raise ConfigError(f"class {cls!r} has {members.size} item(s); at least 2 are needed")
        order = members[Stream(derive(seed, k)).permutation(members.size)]
        n_train = max(1, int(np.floor(members.size * train_fraction)))
        train.append(order[:n_train])
        test.append(order[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_split(ds, train_fraction=0.8, seed=0):
    """Class-preserving train/test split of a dataset (deterministic per seed).

    Classes are stratified by label; the dilution percent travels with the item.
    """
    idx = np.array([ds.labels.index(it.label) for it in ds.items])
    tr, te = split_indices(idx, train_fraction, seed)
    return SplitPair(ds.subset(tr), ds.subset(te), tr, te)
