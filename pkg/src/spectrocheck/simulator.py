"""Synthetic stand-in for the spectrometer hardware.

A frame is rendered column by column: the lamp spectrum is attenuated by the
sample (Beer-Lambert, base 10), luminescent emission is added, scattering
blurs the spectrum horizontally, the result is spread vertically as a
Gaussian stripe, weighted by three Gaussian colour sensor curves, and then
jitter, ambient leakage and per-pixel sensor noise are applied before 8-bit
quantisation.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, SpectroError
from .ppm import encode_ppm
from .rng import Stream, derive
from .spectral import (
    IMAGE_HEIGHT,
    DatasetItem,
    LabeledDataset,
    SpectrumImage,
    WavelengthGrid,
    round_half_up,
)

MANIFEST_NAME = "manifest.json"
MANIFEST_SCHEMA_VERSION = 1

# second radiation constant hc/k in nm*K
C2_NM_K = 1.438776877e7

SENSOR_CENTERS = (610.0, 540.0, 460.0)
SENSOR_SIGMAS = (50.0, 45.0, 40.0)


@dataclass(frozen=True)
class LampConfig:
    temperature: float = 2800.0
    # the cuvette; path length is folded into band strengths (strength = eps*c*l)
    path_length: float = 3.0
    # peak 8-bit level of an unobstructed beam before noise
    exposure: float = 200.0

    def __post_init__(self):
        if not self.temperature > 0:
            raise ConfigError(f"lamp temperature must be > 0, got {self.temperature}")
        if not self.path_length > 0:
            raise ConfigError(f"path_length must be > 0, got {self.path_length}")
        if not self.exposure >= 0:
            raise ConfigError(f"exposure must be >= 0, got {self.exposure}")


@dataclass(frozen=True)
class NoiseConfig:
    gaussian_sigma: float = 8.0
    ambient_leak: float = 3.0
    intensity_jitter: float = 0.05
    band_row_center: float = 75.0
    band_row_sigma: float = 12.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value >= 0:
                raise ConfigError(f"noise.{name} must be >= 0, got {value}")
        if self.ambient_leak > 255:
            raise ConfigError(f"noise.ambient_leak must be <= 255, got {self.ambient_leak}")
        if self.band_row_center > IMAGE_HEIGHT - 1:
            raise ConfigError(f"band_row_center {self.band_row_center} outside the image")
        if self.band_row_sigma == 0:
            raise ConfigError("band_row_sigma must be > 0")

    @classmethod
    def noiseless(cls, **kw):
        """No jitter, no leakage, no sensor noise; stripe geometry kept."""
        kw.setdefault("gaussian_sigma", 0.0)
        kw.setdefault("ambient_leak", 0.0)
        kw.setdefault("intensity_jitter", 0.0)
        return cls(**kw)


def log_planck_radiance(temperature, lam):
    """Natural log of the relative Planck radiance; finite for any lam, T > 0."""
    lam = np.asarray(lam, dtype=np.float64)
    x = C2_NM_K / (lam * temperature)
    # log(expm1(x)) without overflow for large x
    log_expm1 = np.where(x > 30.0, x + np.log1p(-np.exp(-np.minimum(x, 700.0))),
                         np.log(np.expm1(np.minimum(x, 30.0))))
    return -5.0 * np.log(lam / 1000.0) - log_expm1


def planck_radiance(temperature, lam):
    """Relative spectral radiance ``lam**-5 / (exp(hc/(lam k T)) - 1)``, lam in nm.

    Units are arbitrary (wavelength taken in micrometres); only ratios matter.
    """
    if not temperature > 0:
        raise ConfigError(f"temperature must be > 0, got {temperature}")
    if np.any(np.asarray(lam) <= 0):
        raise ConfigError("wavelength must be > 0")
    return np.exp(log_planck_radiance(temperature, lam))


def lamp_spectrum(grid, lamp):
    """Lamp radiance on the grid columns, normalised to a maximum of 1."""
    log_b = log_planck_radiance(lamp.temperature, grid.wavelengths())
    return np.exp(log_b - log_b.max())


def absorbance(recipe, lam):
    """Base-10 absorbance of the prepared sample at ``lam``."""
    lam = np.asarray(lam, dtype=np.float64)
    a = recipe.api_fraction * recipe.substance.absorbance(lam)
    a = a + (1.0 - recipe.api_fraction) * recipe.filler.absorbance(lam)
    if recipe.contaminant is not None:
        a = a + recipe.dose * recipe.contaminant.absorbance(lam)
    return a


def transmittance(a):
    a = np.asarray(a, dtype=np.float64)
    if np.any(a < 0):
        raise ConfigError("absorbance must be non-negative")
    return np.power(10.0, -a)


def sensor_response(lam):
    """``(r, g, b)`` Gaussian sensor weights, each peaking at 1."""
    lam = np.asarray(lam, dtype=np.float64)
    return np.stack(
        [np.exp(-((lam - c) ** 2) / (2.0 * s * s)) for c, s in zip(SENSOR_CENTERS, SENSOR_SIGMAS)],
        axis=-1,
    )


def emission(recipe, lam):
    lam = np.asarray(lam, dtype=np.float64)
    out = np.zeros_like(lam)
    parts = [(recipe.substance, recipe.api_fraction), (recipe.filler, 1.0 - recipe.api_fraction)]
    if recipe.contaminant is not None:
        parts.append((recipe.contaminant, recipe.dose))
    for substance, amount in parts:
        if substance.luminescence is not None:
            out = out + substance.luminescence.emission(lam, amount)
    return out


def blur_width(scattering):
    return 1 + round_half_up(4.0 * scattering)


def box_blur(profile, width):
    """Moving average over ``width`` columns, renormalised at the edges.

    The window covers offsets ``-(width-1)//2 .. width//2``.
    """
    if width <= 1:
        return profile.copy()
    lo, hi = (width - 1) // 2, width // 2
    csum = np.concatenate([[0.0], np.cumsum(profile)])
    n = profile.size
    idx = np.arange(n)
    start = np.clip(idx - lo, 0, n)
    stop = np.clip(idx + hi + 1, 0, n)
    return (csum[stop] - csum[start]) / (stop - start)


def column_profile(recipe, grid=WavelengthGrid(), lamp=LampConfig()):
    """Relative intensity per column before the sensor (1 = bare lamp peak)."""
    lam = grid.wavelengths()
    profile = lamp_spectrum(grid, lamp) * transmittance(absorbance(recipe, lam))
    profile = profile + emission(recipe, lam)
    return box_blur(profile, blur_width(recipe.scattering))


def _exposure_gain(grid, lamp):
    lam = grid.wavelengths()
    peak = (lamp_spectrum(grid, lamp)[:, None] * sensor_response(lam)).max()
    return lamp.exposure / peak


def render_float(recipe, grid=WavelengthGrid(), lamp=LampConfig(), noise=NoiseConfig(), seed=0):
    """Unquantised, unclipped frame as float64 ``(150, columns, 3)``."""
    lam = grid.wavelengths()
    stream = Stream(seed)
    jitter = 1.0 + noise.intensity_jitter * (2.0 * stream.uniform(1)[0] - 1.0)
    rows = np.arange(IMAGE_HEIGHT, dtype=np.float64)
    stripe = np.exp(-((rows - noise.band_row_center) ** 2) / (2.0 * noise.band_row_sigma**2))
    colour = column_profile(recipe, grid, lamp)[:, None] * sensor_response(lam)
    frame = (_exposure_gain(grid, lamp) * jitter) * stripe[:, None, None] * colour[None, :, :]
    frame = frame + noise.ambient_leak
    if noise.gaussian_sigma > 0:
        frame = frame + noise.gaussian_sigma * stream.normal(frame.size).reshape(frame.shape)
    return frame


def quantize(frame):
    """Clamp to [0, 255] and round half up to uint8."""
    return np.floor(np.clip(frame, 0.0, 255.0) + 0.5).astype(np.uint8)


def render_spectrum_image(recipe, grid=WavelengthGrid(), lamp=LampConfig(),
                          noise=NoiseConfig(), seed=0):
    """Deterministic 8-bit frame for ``recipe``; same arguments give the same bytes."""
    return SpectrumImage(quantize(render_float(recipe, grid, lamp, noise, seed)))


def item_seed(master_seed, recipe_index, image_index):
    return derive(master_seed, recipe_index, image_index)


def item_filename(label, index):
    return f"{label}-{index:05d}.ppm"


def generate_dataset(recipes, per_class, master_seed, out_dir, grid=WavelengthGrid(),
                     lamp=LampConfig(), noise=NoiseConfig(), workers=1):
    """Render ``per_class`` frames per recipe into ``out_dir`` and write the manifest.

    Image ``i`` of recipe ``j`` uses ``item_seed(master_seed, j, i)``, so the
    bytes do not depend on ``workers``.
    """
    from .config import recipe_to_dict

    if int(per_class) != per_class or per_class < 1:
        raise ConfigError(f"per_class must be a positive integer, got {per_class}")
    if not recipes:
        raise ConfigError("at least one recipe is required")
    labels = [r.label for r in recipes]
    dupes = sorted({lab for lab in labels if labels.count(lab) > 1})
    if dupes:
        raise ConfigError(f"duplicate recipe labels: {', '.join(dupes)}")

    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _io_error(exc) from exc

    jobs = [(j, i) for j in range(len(recipes)) for i in range(per_class)]
    items = [
        DatasetItem(item_filename(recipes[j].label, i), recipes[j].label,
                    recipes[j].dilution_percent, item_seed(master_seed, j, i))
        for j, i in jobs
    ]

    def work(k):
        j, _ = jobs[k]
        img = render_spectrum_image(recipes[j], grid, lamp, noise, items[k].seed)
        (out_dir / items[k].file).write_bytes(encode_ppm(img))

    try:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(work, range(len(jobs))))
        else:
            for k in range(len(jobs)):
                work(k)
    except OSError as exc:
        raise _io_error(exc) from exc

    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "grid": grid.to_dict(),
        "lamp": asdict(lamp),
        "noise": asdict(noise),
        "master_seed": int(master_seed),
        "labels": labels,
        "recipes": [recipe_to_dict(r) for r in recipes],
        "items": [
            {"file": it.file, "label": it.label, "dilution_percent": it.dilution_percent,
             "seed": it.seed}
            for it in items
        ],
    }
    write_manifest(out_dir, manifest)
    return LabeledDataset(out_dir, items, labels, manifest)


class DatasetIOError(SpectroError, OSError):
    exit_code = 3


def _io_error(exc):
    return DatasetIOError(f"{getattr(exc, 'filename', '') or ''}: {exc.strerror or exc}")


def write_manifest(out_dir, manifest):
    text = json.dumps(manifest, indent=2, sort_keys=False) + "\n"
    path = Path(out_dir) / MANIFEST_NAME
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise _io_error(exc) from exc


def load_dataset(root):
    """Read ``manifest.json`` under ``root`` into a :class:`LabeledDataset`."""
    root = Path(root)
    path = root / MANIFEST_NAME
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise DatasetIOError(f"{path}: no dataset manifest") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if manifest.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise FormatError(f"{path}: unsupported schema_version {manifest.get('schema_version')!r}")
    try:
        items = [
            DatasetItem(d["file"], d["label"], d.get("dilution_percent"), int(d["seed"]))
            for d in manifest["items"]
        ]
        labels = manifest.get("labels") or sorted({it.label for it in items})
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed item entry ({exc})") from exc
    return LabeledDataset(root, items, labels, manifest)


def grid_from_manifest(manifest):
    return WavelengthGrid(**manifest["grid"])


def default_workers():
    return max(1, min(8, os.cpu_count() or 1))
