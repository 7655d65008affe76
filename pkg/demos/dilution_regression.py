"""Estimate how much of a tablet's active ingredient was replaced by filler.

Five dilution levels (0, 25, 50, 75, 100 percent filler) are rendered and a
ridge regression on raw pixels predicts the percent. Predictions are clamped
to [0, 100] before scoring.

    python demos/dilution_regression.py [per_class]
"""
import sys
import tempfile

import numpy as np

from spectrocheck.config import load_bundled
from spectrocheck.models import linear
from spectrocheck.preprocess import feature_matrix, stratified_split
from spectrocheck.report import evaluate_regressor
from spectrocheck.simulator import generate_dataset

per_class = int(sys.argv[1]) if len(sys.argv) > 1 else 300
cfg = load_bundled("dilution")

with tempfile.TemporaryDirectory() as tmp:
    ds = generate_dataset(cfg.recipes, per_class, cfg.master_seed, tmp, cfg.grid, cfg.lamp, cfg.noise)
    split = stratified_split(ds, 0.8, seed=0)
    X_train = feature_matrix(split.train.load_images())
    X_test = feature_matrix(split.test.load_images())

model = linear.linreg_fit(X_train, split.train.dilution_targets())
losses = model.history["loss"]
print(f"MSE {losses[0]:.1f} at start -> {losses[-1]:.2f} after {len(losses) - 1} epochs")

truth = split.test.dilution_targets()
rep, pred = evaluate_regressor(model, X_test, truth)
print(f"pearson r {rep.pearson_r:.4f}  mae {rep.mae:.2f} pp  regression accuracy {rep.regression_accuracy:.2f}%")
for level in np.unique(truth):
    p = pred[truth == level]
    print(f"  true {level:5.1f}%  predicted {p.mean():6.2f} +/- {p.std():.2f}")
