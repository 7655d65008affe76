"""Command line: ``spectrocheck generate | train | eval | predict``.

Exit status: 0 success, 2 usage or configuration error, 3 I/O error,
4 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import report
from .config import MODEL_KINDS, TrainingConfig, load_bundled, load_config
from .errors import ConfigError, ShapeError, SpectroError
from .models import cnn, linear
from .models.io import load_model, save_model
from .ppm import read_ppm
from .preprocess import feature_matrix, stratified_split
from .simulator import generate_dataset, load_dataset
from .spectral import IMAGE_SHAPE

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DIVERGED = 0, 2, 3, 4


def _out(msg):
    print(msg, flush=True)


def _load_experiment(args):
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.preset:
        return load_bundled(args.preset)
    if args.config:
        return load_config(args.config)
    return None


# ---------------------------------------------------------------------------


def cmd_generate(args):
    cfg = _load_experiment(args)
    if cfg is None:
        raise ConfigError("generate needs --config PATH or --preset NAME")
    seed = args.seed if args.seed is not None else cfg.master_seed
    per_class = args.per_class if args.per_class is not None else cfg.per_class
    workers = args.workers if args.workers is not None else cfg.workers
    if per_class < 1:
        raise ConfigError(f"--per-class must be >= 1, got {per_class}")
    if not cfg.recipes:
        raise ConfigError(f"{cfg.source}: $.recipes: no recipes defined")
    ds = generate_dataset(cfg.recipes, per_class, seed, args.out, cfg.grid, cfg.lamp, cfg.noise,
                          workers=workers)
    _out(f"wrote {len(ds)} images ({len(cfg.recipes)} classes x {per_class}) to {args.out}")
    return EXIT_OK


def _training_settings(args):
    tc = TrainingConfig()
    if args.config:
        tc = load_config(args.config).training
    model = args.model or tc.model
    if model is None:
        raise ConfigError("no model kind given (use --model or training.model in the config)")
    if model not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {model!r}; expected one of {', '.join(MODEL_KINDS)}")
    hyper = tc.hyper_overrides()
    for key in ("epochs", "learning_rate", "batch_size", "regularization", "preprocessing"):
        value = getattr(args, key, None)
        if value is not None:
            hyper[key] = value
    fraction = args.split_fraction if args.split_fraction is not None else tc.train_fraction
    split_seed = args.split_seed if args.split_seed is not None else tc.split_seed
    seed = args.seed if args.seed is not None else tc.seed
    return model, hyper, fraction, split_seed, seed


def _standard_images(ds):
    images = ds.load_images()
    if images.shape[1:] != IMAGE_SHAPE:
        raise ShapeError(f"dataset frames are {images.shape[1:]}, expected {IMAGE_SHAPE}")
    return images


def _build_hyper(model, hyper, seed):
    if model == "cnn":
        hyper.pop("regularization", None)
        return cnn.CnnHyper(seed=seed, **hyper)
    hyper.pop("dtype", None)
    return linear.default_hyper(model, seed=seed, **hyper)


def cmd_train(args):
    model_kind, hyper, fraction, split_seed, seed = _training_settings(args)
    ds = load_dataset(args.data)
    if model_kind == "linreg" and not ds.has_dilution():
        raise ConfigError(f"{args.data}: linreg needs dilution_percent on every item; this manifest has none")
    if len(ds.labels) < 2 and model_kind != "linreg":
        raise ConfigError(f"{args.data}: classification needs at least 2 classes")
    split = stratified_split(ds, fraction, split_seed)
    images = _standard_images(ds)
    tr, te = split.train_indices, split.test_indices
    y = ds.label_indices()
    h = _build_hyper(model_kind, dict(hyper), seed)

    meta = {"train_fraction": fraction, "split_seed": split_seed, "n_train": int(tr.size),
            "n_test": int(te.size), "dataset_master_seed": ds.meta.get("master_seed")}
    if model_kind == "cnn":
        progress = (lambda e: _out(f"epoch {e['epoch']:3d}  loss {e['train_loss']:.4f}  "
                                   f"val acc {e['val_accuracy']:.2f}")) if args.verbose else None
        model, history = cnn.cnn_train(images[tr], y[tr], images[te], y[te], ds.labels, h,
                                       callback=progress)
        epochs = history
        meta["history"] = history
        rep_tr = report.evaluate_classifier(model, images[tr], y[tr])
        rep_te = report.evaluate_classifier(model, images[te], y[te])
    else:
        X = feature_matrix(images)
        if model_kind == "linreg":
            t = ds.dilution_targets()
            model = linear.linreg_fit(X[tr], t[tr], h)
            rep_tr, _ = report.evaluate_regressor(model, X[tr], t[tr])
            rep_te, _ = report.evaluate_regressor(model, X[te], t[te])
        else:
            fit = linear.logreg_train if model_kind == "logreg" else linear.svm_train
            model = fit(X[tr], y[tr], ds.labels, h)
            rep_tr = report.evaluate_classifier(model, X[tr], y[tr])
            rep_te = report.evaluate_classifier(model, X[te], y[te])
        losses = model.history["loss"]
        meta["loss"] = losses
        epochs = [{"epoch": k, "train_loss": v} for k, v in enumerate(losses[1:], start=1)]
    if args.timestamp:
        meta["created_at"] = datetime.now(timezone.utc).isoformat()
    meta["train_metrics"] = _summary(rep_tr)
    meta["test_metrics"] = _summary(rep_te)

    save_model(model, args.out, meta)
    history_path = Path(args.history) if args.history else Path(args.out).with_suffix(".history.json")
    doc = {"model": model_kind, "epochs": epochs}
    if model_kind != "cnn":
        doc["initial_loss"] = model.history["loss"][0]
    try:
        history_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise _IOFailure(f"{history_path}: {exc.strerror or exc}") from exc

    _out(f"model {model_kind}: {model.n_parameters} parameters -> {args.out}")
    _out(f"train: {_format(rep_tr)}")
    _out(f"test:  {_format(rep_te)}")
    return EXIT_OK


class _IOFailure(SpectroError, OSError):
    exit_code = EXIT_IO


def _summary(rep):
    keys = ("n", "accuracy", "zero_one_loss", "mean_hinge_loss", "mcc", "roc_auc",
            "pearson_r", "regression_accuracy", "mae")
    return {k: getattr(rep, k) for k in keys if getattr(rep, k) is not None}


def _format(rep):
    if rep.task == "regression":
        return (f"n={rep.n} pearson_r={rep.pearson_r:.4f} "
                f"regression_accuracy={rep.regression_accuracy:.2f} (100-MAE) clamped={rep.clamped}")
    parts = [f"n={rep.n}", f"accuracy={rep.accuracy:.2f}", f"loss={rep.zero_one_loss:.2f}"]
    if rep.mean_hinge_loss is not None:
        parts.append(f"hinge={rep.mean_hinge_loss:.4f}")
    if rep.mcc is not None:
        parts.append(f"mcc={rep.mcc:.4f}")
    if rep.roc_auc is not None:
        parts.append(f"auc={rep.roc_auc:.4f}")
    return " ".join(parts)


def cmd_eval(args):
    model, header = load_model(args.model)
    ds = load_dataset(args.data)
    if len(ds) == 0:
        raise ConfigError(f"{args.data}: dataset is empty")
    if args.holdout:
        t = header.get("training", {})
        if "split_seed" not in t:
            raise ConfigError(f"{args.model}: no split recorded; cannot use --holdout")
        ds = stratified_split(ds, t["train_fraction"], t["split_seed"]).test
    images = _standard_images(ds)
    if model.kind == "linreg":
        if not ds.has_dilution():
            raise ConfigError(f"{args.data}: regression evaluation needs dilution_percent on every item")
        targets = ds.dilution_targets()
        rep, pred = report.evaluate_regressor(model, feature_matrix(images), targets, name=args.name)
        plots = {"scatter.svg": report.scatter_svg(pred, targets)}
    else:
        if set(ds.labels) != set(model.labels):
            raise ConfigError(f"label sets differ: model {list(model.labels)} vs dataset {list(ds.labels)}")
        index = {lab: k for k, lab in enumerate(model.labels)}
        y = np.array([index[it.label] for it in ds.items])
        X = images if model.kind == "cnn" else feature_matrix(images)
        history = header.get("training", {}).get("history", [])
        rep = report.evaluate_classifier(model, X, y, name=args.name, history=history)
        plots = {"confusion.svg": report.confusion_svg(rep.confusion_matrix, model.labels)}
        if history:
            plots["history.svg"] = report.history_svg(history)
    try:
        Path(args.report).write_text(rep.to_json(), encoding="utf-8")
        csv_path = Path(args.csv) if args.csv else Path(args.report).with_suffix(".csv")
        csv_path.write_text(report.reports_to_csv([rep]), encoding="utf-8")
        if args.plots:
            pdir = Path(args.plots)
            pdir.mkdir(parents=True, exist_ok=True)
            for name, svg in plots.items():
                (pdir / name).write_text(svg, encoding="utf-8")
    except OSError as exc:
        raise _IOFailure(f"{exc.filename}: {exc.strerror or exc}") from exc
    _out(_format(rep))
    return EXIT_OK


def cmd_predict(args):
    model, _ = load_model(args.model)
    img = read_ppm(args.image)
    if img.data.shape != IMAGE_SHAPE:
        raise ShapeError(f"{args.image}: image is {img.width}x{img.height}, expected 150x150")
    if model.kind == "cnn":
        probs = cnn.cnn_forward(model, img)
        k = int(linear.argmax_lowest(probs))
        _out(f"{model.labels[k]} (p={probs[k]:.4f})")
    elif model.kind == "linreg":
        pct = float(linear.linreg_predict(model, feature_matrix(img.data[None])[0]))
        _out(f"dilution {pct:.2f}%")
    else:
        x = feature_matrix(img.data[None])[0]
        k = int(linear.predict_index(model, x))
        if model.kind == "logreg":
            p = linear.logreg_predict_proba(model, x)[k]
            _out(f"{model.labels[k]} (p={p:.4f})")
        else:
            s = linear.svm_decision(model, x)
            _out(f"{model.labels[k]} (score={s[k]:.4f})")
    return EXIT_OK


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def build_parser():
    p = _Parser(prog="spectrocheck", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="render a synthetic dataset")
    g.add_argument("--config", help="experiment JSON file")
    g.add_argument("--preset", help="bundled config name (placebo, apple, cranberry, dilution, ...)")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, help="master seed (overrides generation.master_seed)")
    g.add_argument("--per-class", type=int, help="images per recipe (overrides generation.per_class)")
    g.add_argument("--workers", type=int, help="render threads; output does not depend on it")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="fit a model on a dataset")
    t.add_argument("--data", required=True, help="dataset directory")
    t.add_argument("--model", help=f"one of {', '.join(MODEL_KINDS)}")
    t.add_argument("--config", help="experiment JSON whose training section supplies defaults")
    t.add_argument("--out", required=True, help="model file to write")
    t.add_argument("--history", help="history JSON (default: <out>.history.json)")
    t.add_argument("--split-fraction", type=float, help="train share of each class (default 0.8)")
    t.add_argument("--split-seed", type=int)
    t.add_argument("--seed", type=int, help="training seed (batch order, initialisation)")
    t.add_argument("--epochs", type=int)
    t.add_argument("--learning-rate", type=float)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--regularization", type=float)
    t.add_argument("--preprocessing", choices=("unit", "raw"))
    t.add_argument("--timestamp", action="store_true", help="record the creation time in the model")
    t.add_argument("--verbose", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a model on a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--report", required=True, help="report JSON path")
    e.add_argument("--csv", help="CSV path (default: <report>.csv)")
    e.add_argument("--plots", help="directory for SVG plots")
    e.add_argument("--holdout", action="store_true", help="only the test split recorded in the model")
    e.add_argument("--name", default="", help="experiment name written into the report")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("predict", help="classify one PPM frame")
    r.add_argument("--model", required=True)
    r.add_argument("--image", required=True)
    r.set_defaults(func=cmd_predict)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"spectrocheck: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpectroError as exc:
        print(f"spectrocheck: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"spectrocheck: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
