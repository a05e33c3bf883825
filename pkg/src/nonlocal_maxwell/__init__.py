"""Spectral variational solvers for nonlocal nonlinear curl-curl ground states."""

__version__ = "0.1.0"

from .duality import SymbolSpec, run_duality_check
from .errors import InfimumNotAttainedError, InvalidConfigError, NonConvergenceError, SolverError
from .models import dual_ground_state, ground_state_q, kerr_minimizer, kerr_shrinking_family
from .qmax import MaximizeOptions, maximize_scalar_Q, maximize_vector_Q
from .spectral import Grid, KernelSpec, sample_kernel

__all__ = [
    "Grid",
    "KernelSpec",
    "sample_kernel",
    "MaximizeOptions",
    "maximize_scalar_Q",
    "maximize_vector_Q",
    "kerr_minimizer",
    "kerr_shrinking_family",
    "ground_state_q",
    "dual_ground_state",
    "SymbolSpec",
    "run_duality_check",
    "InvalidConfigError",
    "SolverError",
    "NonConvergenceError",
    "InfimumNotAttainedError",
    "__version__",
]
