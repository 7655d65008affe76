"""A scaled-down convolutional network on cropped placebo frames.

The full network sees 150x150 frames; here a 40x40 window around the stripe
keeps an epoch to a fraction of a second while exercising the same layers.
A gradient check runs first.

    python demos/small_cnn.py
"""
import tempfile

import numpy as np

from spectrocheck.config import load_bundled
from spectrocheck.models.cnn import CnnArchitecture, CnnHyper, cnn_train, gradient_check
from spectrocheck.preprocess import stratified_split
from spectrocheck.simulator import generate_dataset

cfg = load_bundled("placebo")
with tempfile.TemporaryDirectory() as tmp:
    ds = generate_dataset(cfg.recipes, 60, cfg.master_seed, tmp, cfg.grid, cfg.lamp, cfg.noise)
    split = stratified_split(ds, 0.8, seed=0)
    # rows 55..94 hold the stripe; columns 40..79 cover 470-555 nm
    window = np.s_[:, 55:95, 40:80, :]
    train = split.train.load_images()[window]
    test = split.test.load_images()[window]

arch = CnnArchitecture(train.shape[1:], conv_channels=(4, 8), dense_units=16, n_classes=2)
print("shape chain:", " -> ".join(f"{kind}{shape}" for kind, shape in arch.shape_chain()))

err = gradient_check(arch, train[0] / 255.0, int(split.train.label_indices()[0]))
print(f"gradient check: max relative error {err:.2e}")

model, history = cnn_train(train, split.train.label_indices(), test, split.test.label_indices(),
                           ds.labels, CnnHyper(learning_rate=0.05, epochs=25, batch_size=16), arch)
for h in history:
    print(f"epoch {h['epoch']:2d}  loss {h['train_loss']:.4f}  train {h['train_accuracy']:5.1f}%  "
          f"val {h['val_accuracy']:5.1f}%  auc {h['val_roc_auc']:.3f}")
print(f"{model.n_parameters} parameters")
