"""Experiment configuration files (UTF-8 JSON).

Layout::

    {
      "schema_version": 1,
      "grid":  {"lambda_min": 390, "lambda_max": 700, "columns": 150},   # optional
      "lamp":  {"temperature": 2800, "path_length": 3.0, "exposure": 200},  # optional
      "noise": {"gaussian_sigma": 8, ...},                                # optional
      "substances": {
        "<name>": {"bands": [{"center": 520, "sigma": 25, "strength": 0.8}],
                   "scattering": 0.0,
                   "luminescence": {"center": 610, "width": 6, "intensity": 0.4,
                                    "threshold": 0.0}}
      },
      "recipes": [
        {"label": "authentic", "substance": "<name>", "api_fraction": 1.0,
         "filler": "<name>", "contaminant": {"substance": "<name>", "dose": 0.2},
         "report_dilution": false}
      ],
      "generation": {"master_seed": 1, "per_class": 1000, "workers": 1},
      "training": {"model": "svm", "train_fraction": 0.8, "split_seed": 0,
                   "seed": 0, "epochs": 30, "learning_rate": 0.1,
                   "batch_size": 32, "regularization": 1e-4}
    }

Unknown keys anywhere are rejected; errors name the offending field path and,
for syntax errors, the line and column.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import ConfigError, SpectroError
from .simulator import LampConfig, NoiseConfig
from .spectral import (
    TRANSPARENT,
    AbsorptionBand,
    Luminescence,
    SampleRecipe,
    SubstanceProfile,
    WavelengthGrid,
)

SCHEMA_VERSION = 1
MODEL_KINDS = ("logreg", "svm", "linreg", "cnn")

_TOP_KEYS = {"schema_version", "description", "grid", "lamp", "noise", "substances",
             "recipes", "generation", "training"}
_SUBSTANCE_KEYS = {"bands", "scattering", "luminescence"}
_BAND_KEYS = {"center", "sigma", "strength"}
_LUM_KEYS = {"center", "width", "intensity", "threshold"}
_RECIPE_KEYS = {"label", "substance", "api_fraction", "filler", "contaminant", "report_dilution"}
_CONTAMINANT_KEYS = {"substance", "dose"}
_GENERATION_KEYS = {"master_seed", "per_class", "workers"}
_TRAINING_KEYS = {"model", "train_fraction", "split_seed", "seed", "epochs", "learning_rate",
                  "batch_size", "regularization", "preprocessing", "dtype"}


@dataclass
class TrainingConfig:
    model: Optional[str] = None
    train_fraction: float = 0.8
    split_seed: int = 0
    seed: int = 0
    epochs: Optional[int] = None
    learning_rate: Optional[float] = None
    batch_size: Optional[int] = None
    regularization: Optional[float] = None
    preprocessing: Optional[str] = None
    dtype: Optional[str] = None

    def hyper_overrides(self):
        keys = ("epochs", "learning_rate", "batch_size", "regularization", "preprocessing", "dtype")
        return {k: getattr(self, k) for k in keys if getattr(self, k) is not None}


@dataclass
class ExperimentConfig:
    grid: WavelengthGrid = field(default_factory=WavelengthGrid)
    lamp: LampConfig = field(default_factory=LampConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    substances: dict = field(default_factory=dict)
    recipes: list = field(default_factory=list)
    master_seed: int = 0
    per_class: int = 1000
    workers: int = 1
    training: TrainingConfig = field(default_factory=TrainingConfig)
    source: Optional[Path] = None


def _fail(path, msg):
    raise ConfigError(f"{path}: {msg}")


def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        _fail(path, f"expected an object, got {type(obj).__name__}")
    extra = sorted(set(obj) - allowed)
    if extra:
        _fail(path, f"unknown key(s) {', '.join(map(repr, extra))}")


def _number(obj, key, path, default=None, integer=False):
    if key not in obj:
        if default is None:
            _fail(f"{path}.{key}", "required field missing")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(f"{path}.{key}", f"expected a number, got {v!r}")
    if integer:
        if int(v) != v:
            _fail(f"{path}.{key}", f"expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _build(cls, obj, path):
    try:
        return cls(**obj)
    except ConfigError as exc:
        _fail(path, str(exc))
    except TypeError as exc:
        _fail(path, str(exc))


def _parse_section(cls, obj, path):
    if obj is None:
        return cls()
    allowed = set(cls.__dataclass_fields__)
    _check_keys(obj, allowed, path)
    vals = {k: _number(obj, k, path, integer=(k == "columns")) for k in obj}
    return _build(cls, vals, path)


def _parse_substance(name, obj, path):
    _check_keys(obj, _SUBSTANCE_KEYS, path)
    bands = []
    raw_bands = obj.get("bands", [])
    if not isinstance(raw_bands, list):
        _fail(f"{path}.bands", "expected a list")
    for k, b in enumerate(raw_bands):
        bp = f"{path}.bands[{k}]"
        _check_keys(b, _BAND_KEYS, bp)
        bands.append(_build(AbsorptionBand, {key: _number(b, key, bp) for key in _BAND_KEYS}, bp))
    lum = None
    if obj.get("luminescence") is not None:
        lp = f"{path}.luminescence"
        raw = obj["luminescence"]
        _check_keys(raw, _LUM_KEYS, lp)
        lum = _build(Luminescence, {
            "center": _number(raw, "center", lp),
            "width": _number(raw, "width", lp),
            "intensity": _number(raw, "intensity", lp),
            "threshold": _number(raw, "threshold", lp, default=0.0),
        }, lp)
    scattering = _number(obj, "scattering", path, default=0.0)
    return _build(SubstanceProfile, {"name": name, "bands": bands, "scattering": scattering,
                                     "luminescence": lum}, path)


def _lookup(substances, name, path):
    if not isinstance(name, str):
        _fail(path, f"expected a substance name, got {name!r}")
    if name not in substances:
        _fail(path, f"unknown substance {name!r} (defined: {', '.join(sorted(substances)) or 'none'})")
    return substances[name]


def _parse_recipe(obj, substances, path):
    _check_keys(obj, _RECIPE_KEYS, path)
    if "label" not in obj or not isinstance(obj["label"], str):
        _fail(f"{path}.label", "required string field missing")
    if "substance" not in obj:
        _fail(f"{path}.substance", "required field missing")
    kw = {
        "label": obj["label"],
        "substance": _lookup(substances, obj["substance"], f"{path}.substance"),
        "api_fraction": _number(obj, "api_fraction", path, default=1.0),
    }
    if obj.get("filler") is not None:
        kw["filler"] = _lookup(substances, obj["filler"], f"{path}.filler")
    cont = obj.get("contaminant")
    if cont is not None:
        cp = f"{path}.contaminant"
        _check_keys(cont, _CONTAMINANT_KEYS, cp)
        kw["contaminant"] = _lookup(substances, cont.get("substance"), f"{cp}.substance")
        kw["dose"] = _number(cont, "dose", cp)
    rd = obj.get("report_dilution", False)
    if not isinstance(rd, bool):
        _fail(f"{path}.report_dilution", f"expected true/false, got {rd!r}")
    kw["report_dilution"] = rd
    return _build(SampleRecipe, kw, path)


def _parse_training(obj, path):
    if obj is None:
        return TrainingConfig()
    _check_keys(obj, _TRAINING_KEYS, path)
    t = TrainingConfig()
    if "model" in obj:
        if obj["model"] not in MODEL_KINDS:
            _fail(f"{path}.model", f"unknown model kind {obj['model']!r} (expected one of {', '.join(MODEL_KINDS)})")
        t.model = obj["model"]
    for key in ("preprocessing", "dtype"):
        if key in obj:
            if not isinstance(obj[key], str):
                _fail(f"{path}.{key}", f"expected a string, got {obj[key]!r}")
            setattr(t, key, obj[key])
    for key in ("split_seed", "seed", "epochs", "batch_size"):
        if key in obj:
            setattr(t, key, _number(obj, key, path, integer=True))
    for key in ("train_fraction", "learning_rate", "regularization"):
        if key in obj:
            setattr(t, key, _number(obj, key, path))
    if not 0 < t.train_fraction < 1:
        _fail(f"{path}.train_fraction", f"must lie in (0, 1), got {t.train_fraction}")
    return t


def parse_config(doc, source="<config>"):
    """Validate a decoded JSON document into an :class:`ExperimentConfig`."""
    root = "$"
    _check_keys(doc, _TOP_KEYS, root)
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        _fail(f"{root}.schema_version", f"unsupported version {version!r}")
    cfg = ExperimentConfig(source=Path(source) if source else None)
    cfg.grid = _parse_section(WavelengthGrid, doc.get("grid"), f"{root}.grid")
    cfg.lamp = _parse_section(LampConfig, doc.get("lamp"), f"{root}.lamp")
    cfg.noise = _parse_section(NoiseConfig, doc.get("noise"), f"{root}.noise")

    subs = doc.get("substances", {})
    _check_keys(subs, set(subs) if isinstance(subs, dict) else set(), f"{root}.substances")
    cfg.substances = {name: _parse_substance(name, s, f"{root}.substances.{name}")
                      for name, s in subs.items()}

    recipes = doc.get("recipes", [])
    if not isinstance(recipes, list):
        _fail(f"{root}.recipes", "expected a list")
    cfg.recipes = [_parse_recipe(r, cfg.substances, f"{root}.recipes[{k}]")
                   for k, r in enumerate(recipes)]
    labels = [r.label for r in cfg.recipes]
    for k, lab in enumerate(labels):
        if lab in labels[:k]:
            _fail(f"{root}.recipes[{k}].label", f"duplicate label {lab!r}")

    gen = doc.get("generation")
    if gen is not None:
        gp = f"{root}.generation"
        _check_keys(gen, _GENERATION_KEYS, gp)
        cfg.master_seed = _number(gen, "master_seed", gp, default=0, integer=True)
        cfg.per_class = _number(gen, "per_class", gp, default=1000, integer=True)
        cfg.workers = _number(gen, "workers", gp, default=1, integer=True)
        if cfg.master_seed < 0 or cfg.master_seed >= 2**64:
            _fail(f"{gp}.master_seed", "must be a 64-bit unsigned integer")
        if cfg.workers < 1:
            _fail(f"{gp}.workers", f"must be >= 1, got {cfg.workers}")
    cfg.training = _parse_training(doc.get("training"), f"{root}.training")
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"{path}: config file not found") from None
    except OSError as exc:
        raise ConfigIOError(f"{path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return parse_config(doc, path)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


class ConfigIOError(SpectroError, OSError):
    exit_code = 3


def bundled_config_names():
    return sorted(p.name[:-5] for p in resources.files("spectrocheck.configs").iterdir()
                  if p.name.endswith(".json"))


def load_bundled(name):
    """One of the shipped task configs, e.g. ``"placebo"`` or ``"dilution"``."""
    res = resources.files("spectrocheck.configs").joinpath(f"{name}.json")
    if not res.is_file():
        raise ConfigError(f"no bundled config {name!r} (have: {', '.join(bundled_config_names())})")
    with resources.as_file(res) as p:
        return load_config(p)


def substance_to_dict(s):
    d = {"bands": [asdict(b) for b in s.bands], "scattering": s.scattering}
    d["luminescence"] = asdict(s.luminescence) if s.luminescence is not None else None
    return d


def recipe_to_dict(r):
    d = {
        "label": r.label,
        "substance": {"name": r.substance.name, **substance_to_dict(r.substance)},
        "api_fraction": r.api_fraction,
        "filler": {"name": r.filler.name, **substance_to_dict(r.filler)},
        "contaminant": None,
        "report_dilution": r.report_dilution,
    }
    if r.contaminant is not None:
        d["contaminant"] = {"substance": {"name": r.contaminant.name,
                                          **substance_to_dict(r.contaminant)},
                            "dose": r.dose}
    return d


__all__ = ["ExperimentConfig", "TrainingConfig", "parse_config", "load_config",
           "load_bundled", "bundled_config_names", "recipe_to_dict", "TRANSPARENT",
           "MODEL_KINDS"]
