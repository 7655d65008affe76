"""Wavelength calibration and a single rendered frame.

Maps wavelengths onto sensor columns, renders one authentic and one placebo
tablet spectrum, writes both as PPM files and prints where the absorption
dip sits.

    python demos/calibration_and_rendering.py [out_dir]
"""
import sys
from pathlib import Path

import numpy as np

from spectrocheck import (
    NoiseConfig,
    SampleRecipe,
    SubstanceProfile,
    WavelengthGrid,
    column_to_wavelength,
    render_spectrum_image,
    spectral_resolution,
    wavelength_to_column,
)
from spectrocheck.config import load_bundled
from spectrocheck.ppm import write_ppm
from spectrocheck.simulator import column_profile

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)

grid = WavelengthGrid()
print(f"{grid.lambda_min:.0f}-{grid.lambda_max:.0f} nm over {grid.columns} columns, "
      f"{spectral_resolution(grid):.4f} nm/pixel")
for lam in (390, 450, 545, 610, 700):
    col = wavelength_to_column(lam, grid)
    print(f"  {lam} nm -> column {col:3d} -> {column_to_wavelength(col, grid):.2f} nm")

cfg = load_bundled("placebo")
blank = column_profile(SampleRecipe("blank", SubstanceProfile("empty")))
for recipe in cfg.recipes:
    img = render_spectrum_image(recipe, noise=NoiseConfig(), seed=7)
    write_ppm(out / f"{recipe.label}.ppm", img)
    ratio = column_profile(recipe) / blank
    dip = int(np.argmin(ratio))
    print(f"{recipe.label:10s} mean {img.data.mean():6.1f}  deepest dip at column {dip} "
          f"({column_to_wavelength(dip, grid):.0f} nm, {100 * (1 - ratio[dip]):.0f}% absorbed)")
print(f"frames written to {out}/")
