"""
Parameter-Free Sparse Regression

Recursive feature elimination over the column-normalized library system:
solve least squares on the current support, drop the feature with the
smallest normalized coefficient, repeat until one feature is left. The
resulting candidates are ranked by how much the residual jumps when the
next feature is removed.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as spla
from pydantic import BaseModel, Field

from pdeminer.core.pde_library import LibrarySystem

logger = logging.getLogger(__name__)

RATIO_EPSILON = 1e-12
TOP_CANDIDATES = 5


def least_squares(A: np.ndarray, b: np.ndarray, support: Sequence[int]) -> Tuple[np.ndarray, float]:
    """
    Minimum-norm least squares restricted to `support`

    Returns:
        (full-length coefficient vector, zero off support; residual ||A x - b||^2)
    """
    support = list(support)
    if not support:
        raise ValueError("least_squares needs a non-empty support; the empty candidate is the zero vector")
    x = np.zeros(A.shape[1])
    x[support] = spla.lstsq(A[:, support], b, lapack_driver="gelsy")[0]
    r = A @ x - b
    return x, float(r @ r)


@dataclass
class Candidate:
    support: Tuple[int, ...]
    coeffs: np.ndarray
    normalized_coeffs: np.ndarray
    residual: float


@dataclass
class CandidatePath:
    """Candidates with supports of size |terms| down to 1; R(0) = ||b||^2 is implicit"""
    candidates: List[Candidate]
    names: List[str]
    b_norm_sq: float

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self) -> Iterator[Candidate]:
        return iter(self.candidates)

    @property
    def residuals(self) -> np.ndarray:
        return np.array([c.residual for c in self.candidates])


def least_important_feature(support: Sequence[int], normalized_coeffs: np.ndarray) -> int:
    # ties go to the higher term index
    magnitudes = np.abs(normalized_coeffs[list(support)])
    smallest = magnitudes.min()
    return max(k for k, m in zip(support, magnitudes) if m == smallest)


def rfe_path(system: LibrarySystem) -> CandidatePath:
    A, b = system.normalized, system.b
    support = list(range(A.shape[1]))
    candidates = []
    while support:
        normalized, residual = least_squares(A, b, support)
        candidates.append(Candidate(tuple(support), system.denormalize(normalized), normalized, residual))
        support.remove(least_important_feature(support, normalized))

    logger.debug(f"RFE path with {len(candidates)} candidates, residuals {candidates[0].residual:.3e} .. "
                 f"{candidates[-1].residual:.3e}")
    return CandidatePath(candidates, system.names, float(b @ b))


def residual_increase_check(system: LibrarySystem, candidate: Candidate) -> Dict[int, float]:
    """R(c' - c'_k e_k) - R(c') for every k in the support, other coefficients held fixed"""
    A, b = system.normalized, system.b
    base = A @ candidate.normalized_coeffs - b
    increases = {}
    for k in candidate.support:
        removed = candidate.normalized_coeffs.copy()
        removed[k] = 0.0
        r = A @ removed - b
        increases[k] = float(r @ r - base @ base)
    return increases


# ========================================
# REPORT
# ========================================

class ReportEntry(BaseModel):
    rank: int = Field(description="1 is the most plausible candidate")
    support: List[int] = Field(description="Library indices of the active terms")
    terms: List[str] = Field(description="Term names in library order")
    coefficients: List[float] = Field(description="Coefficients in physical (denormalized) scale")
    residual: float = Field(ge=0, description="||L c - b||^2")
    ratio_percent: float = Field(description="100 * R(next sparser) / R(this)")
    support_size: int = Field(ge=1, description="Number of active terms")

    def equation(self) -> str:
        return format_pde(self.terms, self.coefficients)


class PDEReport(BaseModel):
    """Top candidates, sorted by residual ratio, plus run metadata"""

    entries: List[ReportEntry] = Field(description="Top candidates, best first")
    metadata: Dict[str, Any] = Field(default_factory=dict, description="M, K, N_Extract, N_Data, noise, seeds")
    true_pde: Dict[str, float] = Field(default_factory=dict, description="Generating PDE when known")
    relative_errors: Optional[Dict[str, float]] = Field(
        default=None, description="|c_found - c_true| / |c_true| per term when the top support matches")

    @property
    def top(self) -> ReportEntry:
        return self.entries[0]

    def attach_true_pde(self, true_pde: Dict[str, float]) -> "PDEReport":
        """Record the generating PDE and, if the top support matches it, per-term relative errors"""
        self.true_pde = dict(true_pde)
        found = dict(zip(self.top.terms, self.top.coefficients))
        if true_pde and set(found) == set(true_pde):
            self.relative_errors = {name: abs(found[name] - c) / abs(c) for name, c in true_pde.items()}
        return self

    def to_text(self) -> str:
        lines = []
        for entry in self.entries:
            lines.append(f"#{entry.rank}  ratio {entry.ratio_percent:.2f}%  residual {entry.residual:.6e}  "
                         f"terms {entry.support_size}")
            lines.append(f"    {entry.equation()}")
        if self.relative_errors is not None:
            lines.append("Relative coefficient error against the generating PDE:")
            lines += [f"    {name}: {err:.2%}" for name, err in self.relative_errors.items()]
        return "\n".join(lines) + "\n"


def format_pde(terms: Sequence[str], coefficients: Sequence[float]) -> str:
    """'D_t U = (0.094168)(D_x^2 U) - (1.065668)(U) (D_x U)'"""
    pieces = []
    for i, (name, c) in enumerate(zip(terms, coefficients)):
        body = f"({abs(c):.6f})" + ("" if name == "1" else name)
        sign = ("-" if c < 0 else "") if i == 0 else (" - " if c < 0 else " + ")
        pieces.append(sign + body)
    return "D_t U = " + ("".join(pieces) if pieces else "0")


def rank_candidates(path: CandidatePath, metadata: Optional[Dict[str, Any]] = None) -> PDEReport:
    """
    Sort candidates by R(c^{k+1}) / R(c^k), descending

    The sparsest candidate is compared against the zero vector, R(0) = ||b||^2.
    """
    if len(path) == 0:
        raise ValueError("Cannot rank an empty candidate path")
    floor = max(RATIO_EPSILON * path.b_norm_sq, np.finfo(float).tiny)
    residuals = list(path.residuals) + [path.b_norm_sq]
    ratios = [residuals[k + 1] / max(residuals[k], floor) for k in range(len(path))]

    order = sorted(range(len(path)), key=lambda k: -ratios[k])
    entries = []
    for rank, k in enumerate(order[:TOP_CANDIDATES], start=1):
        c = path.candidates[k]
        entries.append(ReportEntry(
            rank=rank, support=list(c.support), terms=[path.names[j] for j in c.support],
            coefficients=[float(c.coeffs[j]) for j in c.support], residual=c.residual,
            ratio_percent=100.0 * ratios[k], support_size=len(c.support),
        ))
    return PDEReport(entries=entries, metadata=dict(metadata or {}))


def discover_pde(system: LibrarySystem, metadata: Optional[Dict[str, Any]] = None) -> PDEReport:
    """RFE then ranking; no thresholds or penalties to tune"""
    report = rank_candidates(rfe_path(system), metadata)
    logger.info(f"Top candidate ({report.top.ratio_percent:.2f}%): {report.top.equation()}")
    return report
