"""Domain types shared across the package and wavelength/pixel calibration.

The spectrometer maps the visible band linearly onto the image columns:
column 0 is ``lambda_min`` and the last column is ``lambda_max``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, RangeError, ShapeError

IMAGE_HEIGHT = 150
IMAGE_WIDTH = 150
IMAGE_CHANNELS = 3
IMAGE_SHAPE = (IMAGE_HEIGHT, IMAGE_WIDTH, IMAGE_CHANNELS)
FEATURE_LENGTH = IMAGE_HEIGHT * IMAGE_WIDTH * IMAGE_CHANNELS

# 1350 lines/mm DVD grating; kept as documentation of the optics, the
# calibration itself is linear (see README "Calibration").
GRATING_LINES_PER_MM = 1350.0

_LABEL_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


def round_half_up(x):
    return math.floor(x + 0.5)


@dataclass(frozen=True)
class WavelengthGrid:
    lambda_min: float = 390.0
    lambda_max: float = 700.0
    columns: int = IMAGE_WIDTH

    def __post_init__(self):
        if not self.lambda_min < self.lambda_max:
            raise ConfigError(
                f"grid needs lambda_min < lambda_max, got {self.lambda_min}, {self.lambda_max}"
            )
        if int(self.columns) != self.columns or self.columns < 2:
            raise ConfigError(f"grid needs at least 2 integer columns, got {self.columns}")

    @property
    def span(self):
        return self.lambda_max - self.lambda_min

    def wavelengths(self):
        """Wavelength of every column, as a float array."""
        c = np.arange(self.columns, dtype=np.float64)
        return self.lambda_min + c * self.span / (self.columns - 1)

    def to_dict(self):
        return {"lambda_min": self.lambda_min, "lambda_max": self.lambda_max,
                "columns": self.columns}


def wavelength_to_column(lam, grid=WavelengthGrid()):
    """Column whose centre is nearest to ``lam`` (ties round toward red)."""
    if not grid.lambda_min <= lam <= grid.lambda_max:
        raise RangeError(
            f"wavelength {lam} nm outside [{grid.lambda_min}, {grid.lambda_max}] nm"
        )
    pos = (lam - grid.lambda_min) / grid.span * (grid.columns - 1)
    return min(round_half_up(pos), grid.columns - 1)


def column_to_wavelength(col, grid=WavelengthGrid()):
    if not 0 <= col <= grid.columns - 1:
        raise RangeError(f"column {col} outside [0, {grid.columns - 1}]")
    return grid.lambda_min + col * grid.span / (grid.columns - 1)


def spectral_resolution(grid=WavelengthGrid()):
    """Nanometres spanned by one column."""
    return grid.span / (grid.columns - 1)


@dataclass(frozen=True)
class SpectrumImage:
    """An 8-bit RGB frame stored row-major as ``(height, width, 3)``."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != IMAGE_CHANNELS:
            raise ShapeError(f"expected (height, width, 3) pixels, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise RangeError("pixel values must lie in [0, 255]")
        # own copy: freezing the caller's buffer would be a surprising side effect
        arr = np.array(arr, dtype=np.uint8, order="C")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]

    def tobytes(self):
        return self.data.tobytes()

    def is_standard(self):
        return self.data.shape == IMAGE_SHAPE

    def __eq__(self, other):
        return isinstance(other, SpectrumImage) and np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash(self.data.tobytes())


@dataclass(frozen=True)
class AbsorptionBand:
    center: float
    sigma: float
    strength: float

    def __post_init__(self):
        if not 300.0 <= self.center <= 800.0:
            raise ConfigError(f"band center {self.center} nm outside [300, 800]")
        if not self.sigma > 0:
            raise ConfigError(f"band sigma must be > 0, got {self.sigma}")
        if not self.strength >= 0:
            raise ConfigError(f"band strength must be >= 0, got {self.strength}")

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=np.float64)
        return self.strength * np.exp(-((lam - self.center) ** 2) / (2.0 * self.sigma**2))


@dataclass(frozen=True)
class Luminescence:
    """Narrow emission line; active only when the emitter's fraction exceeds ``threshold``."""

    center: float
    width: float
    intensity: float
    threshold: float = 0.0

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigError(f"luminescence width must be > 0, got {self.width}")
        if not self.intensity >= 0:
            raise ConfigError(f"luminescence intensity must be >= 0, got {self.intensity}")
        if not 0.0 <= self.threshold < 1.0:
            raise ConfigError(f"luminescence threshold must lie in [0, 1), got {self.threshold}")

    def emission(self, lam, amount):
        lam = np.asarray(lam, dtype=np.float64)
        if amount <= self.threshold:
            return np.zeros_like(lam)
        return amount * self.intensity * np.exp(-((lam - self.center) ** 2) / (2.0 * self.width**2))


@dataclass(frozen=True)
class SubstanceProfile:
    name: str
    bands: tuple = ()
    scattering: float = 0.0
    luminescence: Optional[Luminescence] = None

    def __post_init__(self):
        object.__setattr__(self, "bands", tuple(self.bands))
        if not self.scattering >= 0:
            raise ConfigError(f"{self.name}: scattering must be >= 0, got {self.scattering}")

    def absorbance(self, lam):
        lam = np.asarray(lam, dtype=np.float64)
        total = np.zeros_like(lam)
        for band in self.bands:
            total = total + band(lam)
        return total


TRANSPARENT = SubstanceProfile("transparent")


@dataclass(frozen=True)
class SampleRecipe:
    """A prepared sample: base substance diluted with filler, optionally dosed.

    ``api_fraction`` is the share of active ingredient retained (1.0 authentic,
    0.0 placebo). The recorded dilution percent is the share *replaced* by
    filler, ``100 * (1 - api_fraction)``, and is only reported when
    ``report_dilution`` is set.
    """

    label: str
    substance: SubstanceProfile
    api_fraction: float = 1.0
    filler: SubstanceProfile = TRANSPARENT
    contaminant: Optional[SubstanceProfile] = None
    dose: float = 0.0
    report_dilution: bool = False

    def __post_init__(self):
        if not _LABEL_RE.match(self.label):
            raise ConfigError(f"label {self.label!r} must match {_LABEL_RE.pattern}")
        if not 0.0 <= self.api_fraction <= 1.0:
            raise ConfigError(f"{self.label}: api_fraction must lie in [0, 1], got {self.api_fraction}")
        if not self.dose >= 0:
            raise ConfigError(f"{self.label}: contaminant dose must be >= 0, got {self.dose}")

    @property
    def dilution_percent(self):
        if not self.report_dilution:
            return None
        return 100.0 * (1.0 - self.api_fraction)

    @property
    def scattering(self):
        s = self.api_fraction * self.substance.scattering
        s += (1.0 - self.api_fraction) * self.filler.scattering
        if self.contaminant is not None:
            s += self.dose * self.contaminant.scattering
        return s


@dataclass(frozen=True)
class DatasetItem:
    file: str
    label: str
    dilution_percent: Optional[float]
    seed: int


@dataclass
class LabeledDataset:
    """Items of a generated (or ingested) dataset rooted at ``root``."""

    root: Path
    items: list
    labels: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.root = Path(self.root)
        self.labels = tuple(self.labels)
        if len(set(self.labels)) != len(self.labels):
            raise ConfigError(f"duplicate labels in {self.labels}")
        known = set(self.labels)
        for item in self.items:
            if item.label not in known:
                raise ConfigError(f"item {item.file} has undeclared label {item.label!r}")

    def __len__(self):
        return len(self.items)

    def subset(self, indices):
        return LabeledDataset(self.root, [self.items[i] for i in indices], self.labels, self.meta)

    def label_indices(self):
        index = {lab: k for k, lab in enumerate(self.labels)}
        return np.array([index[it.label] for it in self.items], dtype=np.int64)

    def dilution_targets(self):
        missing = [it.file for it in self.items if it.dilution_percent is None]
        if missing:
            raise ConfigError(
                f"{len(missing)} items have no dilution_percent (first: {missing[0]})"
            )
        return np.array([it.dilution_percent for it in self.items], dtype=np.float64)

    def has_dilution(self):
        return bool(self.items) and all(it.dilution_percent is not None for it in self.items)

    def load_images(self):
        """All images stacked into a ``(n, H, W, 3)`` uint8 array."""
        from .ppm import read_ppm

        if not self.items:
            return np.zeros((0,) + IMAGE_SHAPE, dtype=np.uint8)
        first = read_ppm(self.root / self.items[0].file).data
        out = np.empty((len(self.items),) + first.shape, dtype=np.uint8)
        out[0] = first
        for k, item in enumerate(self.items[1:], start=1):
            img = read_ppm(self.root / item.file).data
            if img.shape != first.shape:
                raise ShapeError(f"{item.file}: shape {img.shape} differs from {first.shape}")
            out[k] = img
        return out
