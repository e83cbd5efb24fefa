"""
Exception hierarchy for pdeminer

Library code raises these; only the CLI turns them into exit codes.
"""

from typing import Optional, Sequence, Tuple


class PDEMinerError(Exception):
    """Base class for every pdeminer failure"""


class PoleError(PDEMinerError):
    """
    A denominator fell below the pole floor

    `index` is the position along the leading (batch) axis of the offending
    evaluation. The training objective rewrites it to a position in the full
    sample or collocation set and fills in `kind` and `point` = (t, x).
    """

    def __init__(self, message: str, index: Optional[int] = None, kind: Optional[str] = None,
                 point: Optional[Tuple[float, float]] = None):
        super().__init__(message)
        self.index = index
        self.kind = kind
        self.point = point


class DanglingNodeError(PDEMinerError):
    """Backward pass requested for a node that is not on the tape"""


class RationalFitError(PDEMinerError):
    """The minimax rational fit to ReLU did not converge"""


class TrainingAbortedError(PDEMinerError):
    """Training stopped because an activation hit a pole"""

    def __init__(self, message: str, epoch: int, phase: str, index: Optional[int] = None,
                 kind: Optional[str] = None, point: Optional[Tuple[float, float]] = None):
        super().__init__(message)
        self.epoch = epoch
        self.phase = phase
        self.index = index
        self.kind = kind
        self.point = point


class DegenerateLibraryError(PDEMinerError):
    """One or more library columns have (numerically) zero norm"""

    def __init__(self, message: str, terms: Sequence[str] = ()):
        super().__init__(message)
        self.terms = list(terms)


class SolverInstabilityError(PDEMinerError):
    """The pseudospectral solution blew up"""


class DatasetFormatError(PDEMinerError):
    """Bad magic, version, sidecar or CSV layout"""


class DatasetSizeError(PDEMinerError):
    """File size or sample count does not match what was requested"""


class ConfigError(PDEMinerError):
    """Invalid or unresolvable experiment configuration"""
