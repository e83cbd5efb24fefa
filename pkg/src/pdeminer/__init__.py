"""
pdeminer - PDE discovery from noisy scattered data

Two rational neural networks are trained together: U approximates the
solution, N the hidden right-hand side of D_t u = N(u, D_x u, ...). A
polynomial library evaluated from U's derivatives is then regressed against
N with parameter-free recursive feature elimination.
"""

__version__ = "0.1.0"

from pdeminer.errors import (  # noqa: E402
    ConfigError, DanglingNodeError, DatasetFormatError, DatasetSizeError, DegenerateLibraryError, PDEMinerError,
    PoleError, RationalFitError, SolverInstabilityError, TrainingAbortedError,
)

__all__ = [
    "__version__",
    "ConfigError",
    "DanglingNodeError",
    "DatasetFormatError",
    "DatasetSizeError",
    "DegenerateLibraryError",
    "PDEMinerError",
    "PoleError",
    "RationalFitError",
    "SolverInstabilityError",
    "TrainingAbortedError",
]
