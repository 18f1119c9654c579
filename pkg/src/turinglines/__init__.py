"""Two-line Kac-Ising toolkit: stability analysis, hydrodynamics, simulation.

The package is organized around the pipeline

    params/kernels  ->  stability  ->  pde / microsim  ->  fluctuations  ->  cli

with pure numerical code in the first four layers and ensemble statistics on
top.  Everything is seeded and reproducible.
"""

from .params import LatticeSpec, ModelParams, ParameterError
from .kernels import KernelTable, discrete_convolution, discrete_fourier_mode, kernel_fourier, periodized_gaussian
from .stability import (
    DomainError,
    ModeMatrix,
    ModeSpectrum,
    TuringReport,
    classify_turing,
    construct_unimodular,
    exp_bound_check,
    growth_rate,
    lambda_star,
    mode_matrix,
    mode_spectrum,
    necessity_check,
)

__version__ = "0.1.0"

__all__ = [
    "LatticeSpec",
    "ModelParams",
    "ParameterError",
    "KernelTable",
    "discrete_convolution",
    "discrete_fourier_mode",
    "kernel_fourier",
    "periodized_gaussian",
    "DomainError",
    "ModeMatrix",
    "ModeSpectrum",
    "TuringReport",
    "classify_turing",
    "construct_unimodular",
    "exp_bound_check",
    "growth_rate",
    "lambda_star",
    "mode_matrix",
    "mode_spectrum",
    "necessity_check",
    "__version__",
]
