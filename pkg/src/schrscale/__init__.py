"""Spectral workbench for weak, strong and extended Schrodinger dynamics."""

__version__ = "0.1.0"

from .spectral_model import SpectrumModel, energy, eigenfunction, orthonormality_defect
from .state_space import (
    CoefficientSpec,
    NormResult,
    PowerLawTail,
    StateVector,
    classify,
    inverse_energy_mean,
    mean_energy,
    normalize,
    parse_state_spec,
    scale_norm,
    spectral_window,
)
from .evolution import MultiplierSpec, apply_extension, evolve, extension_bound_check, synthesize

__all__ = [
    "SpectrumModel",
    "energy",
    "eigenfunction",
    "orthonormality_defect",
    "CoefficientSpec",
    "NormResult",
    "PowerLawTail",
    "StateVector",
    "classify",
    "inverse_energy_mean",
    "mean_energy",
    "normalize",
    "parse_state_spec",
    "scale_norm",
    "spectral_window",
    "MultiplierSpec",
    "apply_extension",
    "evolve",
    "extension_bound_check",
    "synthesize",
]
