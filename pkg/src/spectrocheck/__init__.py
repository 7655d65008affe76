"""Synthetic visible-spectrum images and from-scratch classifiers for
counterfeit-medicine and contaminated-juice screening."""

from .spectral import (
    AbsorptionBand,
    LabeledDataset,
    Luminescence,
    SampleRecipe,
    SpectrumImage,
    SubstanceProfile,
    WavelengthGrid,
    column_to_wavelength,
    spectral_resolution,
    wavelength_to_column,
)
from .simulator import LampConfig, NoiseConfig, generate_dataset, load_dataset, render_spectrum_image

__version__ = "0.1.0"

__all__ = [
    "AbsorptionBand", "LabeledDataset", "LampConfig", "Luminescence", "NoiseConfig",
    "SampleRecipe", "SpectrumImage", "SubstanceProfile", "WavelengthGrid",
    "column_to_wavelength", "generate_dataset", "load_dataset", "render_spectrum_image",
    "spectral_resolution", "wavelength_to_column",
]
