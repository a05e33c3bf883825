"""
Spectral building blocks.

- Grid: periodic box, FFTs, quadrature, spectral derivatives, Helmholtz projector
- Kernels: sampled kernels, scalar and tensor Fourier multipliers, dual multiplier
- Field dumps
"""

from .grid import DTYPE, Grid, ScalarField, VectorField
from .io import load_field, save_field
from .kernels import (
    FourierMultiplier,
    KernelSpec,
    SampledKernel,
    ScalarMultiplier,
    TensorMultiplier,
    convolve,
    dual_convolve_composed,
    dual_multiplier,
    edge_decay,
    kernel_plateau_radius,
    kernel_summary,
    max_symbol,
    sample_kernel,
)

__all__ = [
    # Grid
    "DTYPE",
    "Grid",
    "ScalarField",
    "VectorField",
    # Kernels
    "KernelSpec",
    "FourierMultiplier",
    "ScalarMultiplier",
    "SampledKernel",
    "TensorMultiplier",
    "sample_kernel",
    "convolve",
    "kernel_plateau_radius",
    "dual_multiplier",
    "dual_convolve_composed",
    "max_symbol",
    "edge_decay",
    "kernel_summary",
    # Dumps
    "save_field",
    "load_field",
]
