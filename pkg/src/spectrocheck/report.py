"""Evaluation reports (JSON / CSV) and dependency-free SVG plots."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Optional
from xml.sax.saxutils import escape

import numpy as np

from . import metrics
from .models import cnn, linear

REGRESSION_NOTE = "regression_accuracy = 100 - mean absolute error in percentage points (reconstructed definition)"
LOSS_NOTE = "zero_one_loss = 100 - accuracy; mean_hinge_loss is the per-sample mean of max(0, 1 - y*s)"

CSV_FIELDS = ["name", "model", "task", "n", "accuracy", "zero_one_loss", "mean_hinge_loss",
              "mcc", "roc_auc", "pearson_r", "regression_accuracy", "mae", "clamped"]


@dataclass
class EvaluationReport:
    model: str
    task: str  # "classification" or "regression"
    n: int
    labels: list = field(default_factory=list)
    confusion_matrix: Optional[list] = None
    accuracy: Optional[float] = None
    zero_one_loss: Optional[float] = None
    mean_hinge_loss: Optional[float] = None
    mcc: Optional[float] = None
    roc_auc: Optional[float] = None
    pearson_r: Optional[float] = None
    regression_accuracy: Optional[float] = None
    mae: Optional[float] = None
    clamped: Optional[int] = None
    history: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    name: str = ""

    def to_json(self):
        return json.dumps(asdict(self), indent=2, allow_nan=False) + "\n"

    def csv_row(self):
        d = asdict(self)
        return {k: ("" if d[k] is None else d[k]) for k in CSV_FIELDS}


def reports_to_csv(reports):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


def classifier_scores(model, X):
    """``(margin, per_class_scores)``; margin is the positive-class score for binary models."""
    if model.kind == "cnn":
        logits = cnn.logit_scores(model, X)
        if logits.ndim == 1:
            return logits, np.stack([np.zeros_like(logits), logits], axis=1)
        return None, logits
    scores = linear.decision_scores(model, X)
    margin = linear.margin_scores(model, X) if model.weights.shape[0] == 1 else None
    return margin, scores


def evaluate_classifier(model, X, y, name="", history=None):
    """Report for a classifier on images (CNN) or feature rows (linear models)."""
    y = np.asarray(y, dtype=np.int64)
    k = len(model.labels)
    margin, scores = classifier_scores(model, X)
    pred = linear.argmax_lowest(scores)
    cm = metrics.confusion_matrix(y, pred, k)
    rep = EvaluationReport(model.kind, "classification", int(y.size), list(model.labels),
                           cm.tolist(), notes=[LOSS_NOTE], name=name, history=list(history or []))
    if y.size:
        rep.accuracy = metrics.accuracy(cm)
        rep.zero_one_loss = metrics.zero_one_loss(cm)
    if margin is not None:
        rep.mean_hinge_loss = metrics.mean_hinge_loss(margin, np.where(y == 1, 1.0, -1.0))
        rep.mcc = metrics.mcc(cm)
        if np.unique(y).size == 2:
            rep.roc_auc = metrics.roc_auc(margin, y)
    elif y.size:
        rep.mean_hinge_loss = metrics.one_vs_rest_hinge(scores, y)
    return rep


def evaluate_regressor(model, X, targets, name=""):
    targets = np.asarray(targets, dtype=np.float64)
    raw = linear.linreg_raw(model, X)
    raw = np.atleast_1d(raw)
    pred = linear.clamp_percent(raw)
    rep = EvaluationReport(model.kind, "regression", int(targets.size), notes=[REGRESSION_NOTE], name=name)
    rep.clamped = int(np.sum(raw != pred))
    rep.mae = float(np.mean(np.abs(pred - targets)))
    rep.regression_accuracy = metrics.regression_accuracy(pred, targets)
    rep.pearson_r = metrics.pearson_r(pred, targets)
    return rep, pred


# ---------------------------------------------------------------------------
# SVG


def _svg(width, height, body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">\n'
            + "\n".join(body) + "\n</svg>\n")


def confusion_svg(cm, labels, title="Confusion matrix"):
    cm = np.asarray(cm)
    k = cm.shape[0]
    cell, left, top = 60, 110, 50
    w, h = left + k * cell + 20, top + k * cell + 60
    peak = max(int(cm.max()), 1)
    body = [f'<text x="{w / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>']
    for i in range(k):
        for j in range(k):
            shade = int(255 - 200 * cm[i, j] / peak)
            x, y = left + j * cell, top + i * cell
            ink = "#fff" if shade < 128 else "#000"
            body.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                        f'fill="rgb({shade},{shade},255)" stroke="#333"/>')
            body.append(f'<text x="{x + cell / 2}" y="{y + cell / 2 + 4}" text-anchor="middle" '
                        f'fill="{ink}">{int(cm[i, j])}</text>')
        body.append(f'<text x="{left - 6}" y="{top + i * cell + cell / 2 + 4}" '
                    f'text-anchor="end">{escape(str(labels[i]))}</text>')
        body.append(f'<text x="{left + i * cell + cell / 2}" y="{top + k * cell + 16}" '
                    f'text-anchor="middle">{escape(str(labels[i]))}</text>')
    body.append(f'<text x="{left + k * cell / 2}" y="{top + k * cell + 40}" text-anchor="middle">predicted</text>')
    body.append(f'<text x="14" y="{top + k * cell / 2}" transform="rotate(-90 14 {top + k * cell / 2})" '
                f'text-anchor="middle">true</text>')
    return _svg(w, h, body)


_COLOURS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]


def _axes(w, h, pad, xmax, ymin, ymax, xlabel, ylabel):
    x0, y0, x1, y1 = pad, h - pad, w - pad / 2, pad / 2
    body = [f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="#000"/>',
            f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="#000"/>',
            f'<text x="{(x0 + x1) / 2}" y="{h - 8}" text-anchor="middle">{escape(xlabel)}</text>',
            f'<text x="12" y="{(y0 + y1) / 2}" transform="rotate(-90 12 {(y0 + y1) / 2})" '
            f'text-anchor="middle">{escape(ylabel)}</text>',
            f'<text x="{x0 - 4}" y="{y0}" text-anchor="end">{ymin:g}</text>',
            f'<text x="{x0 - 4}" y="{y1 + 8}" text-anchor="end">{ymax:g}</text>',
            f'<text x="{x1}" y="{y0 + 14}" text-anchor="end">{xmax:g}</text>']

    def sx(v):
        return x0 + (x1 - x0) * v / (xmax or 1)

    def sy(v):
        return y0 - (y0 - y1) * (v - ymin) / ((ymax - ymin) or 1)

    return body, sx, sy


def history_svg(history, keys=("val_accuracy", "val_roc_auc", "train_accuracy"),
                title="Training history"):
    """Polyline per metric; accuracies are plotted in [0, 1] alongside AUC."""
    w, h, pad = 520, 320, 50
    epochs = [e["epoch"] for e in history]
    body, sx, sy = _axes(w, h, pad, max(epochs or [1]), 0.0, 1.0, "epoch", "score")
    body.insert(0, f'<text x="{w / 2}" y="16" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for n, key in enumerate(keys):
        pts = []
        for e in history:
            v = e.get(key)
            if v is None:
                continue
            v = v / 100.0 if "accuracy" in key else v
            pts.append(f"{sx(e['epoch']):.1f},{sy(v):.1f}")
        if not pts:
            continue
        colour = _COLOURS[n % len(_COLOURS)]
        body.append(f'<polyline fill="none" stroke="{colour}" stroke-width="2" points="{" ".join(pts)}"/>')
        body.append(f'<text x="{w - pad}" y="{pad + 16 * n}" fill="{colour}" text-anchor="end">{escape(key)}</text>')
    return _svg(w, h, body)


def scatter_svg(pred, target, title="Predicted vs true dilution (%)"):
    w, h, pad = 420, 420, 50
    body, sx, sy = _axes(w, h, pad, 100.0, 0.0, 100.0, "true dilution %", "predicted dilution %")
    body.insert(0, f'<text x="{w / 2}" y="16" text-anchor="middle" font-size="14">{escape(title)}</text>')
    body.append(f'<line x1="{sx(0):.1f}" y1="{sy(0):.1f}" x2="{sx(100):.1f}" y2="{sy(100):.1f}" '
                f'stroke="#999" stroke-dasharray="4 3"/>')
    for p, t in zip(np.asarray(pred), np.asarray(target)):
        body.append(f'<circle cx="{sx(t):.1f}" cy="{sy(p):.1f}" r="2" fill="#1f77b4" fill-opacity="0.5"/>')
    return _svg(w, h, body)
