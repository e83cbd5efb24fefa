"""
Polynomial Term Library

Enumerates monomials in (U, D_x U, ..., D_x^M U) up to total degree K and
assembles the linear system b(N) ~ L(U) c at extraction points, where the
columns of L are the library terms evaluated from U's jets and b is the
learned hidden PDE N.
"""

import logging
from dataclasses import dataclass
from itertools import combinations_with_replacement
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from pdeminer.core.diff_engine import Jet, jet_seed, value_of
from pdeminer.core.rational_net import RationalNetwork, network_eval, network_forward
from pdeminer.dataset_manager import Domain
from pdeminer.errors import DegenerateLibraryError

logger = logging.getLogger(__name__)

ZERO_COLUMN_TOLERANCE = 1e-14


@dataclass(frozen=True)
class TermSpec:
    """Exponents of (U, D_x U, ..., D_x^M U); all zeros is the constant term"""
    exponents: Tuple[int, ...]

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    @property
    def order(self) -> int:
        return len(self.exponents) - 1


def enumerate_terms(order: int, degree: int) -> List[TermSpec]:
    """
    All monomials of total degree <= K in M + 1 factors

    Graded by degree; inside a degree block exponent vectors run in
    descending lexicographic order, so powers of U come first.
    C(M + 1 + K, K) terms.
    """
    if order < 0 or degree < 1:
        raise ValueError(f"Need M >= 0 and K >= 1, got M={order}, K={degree}")
    n_factors = order + 1
    terms = []
    for d in range(degree + 1):
        block = set()
        for combo in combinations_with_replacement(range(n_factors), d):
            block.add(tuple(combo.count(i) for i in range(n_factors)))
        terms += [TermSpec(e) for e in sorted(block, reverse=True)]
    return terms


def _factor_name(m: int) -> str:
    return "(U)" if m == 0 else "(D_x U)" if m == 1 else f"(D_x^{m} U)"


def term_name(term: TermSpec) -> str:
    """'(U)^2 (D_x U)' style; the constant term is '1'"""
    parts = [_factor_name(m) + (f"^{e}" if e > 1 else "") for m, e in enumerate(term.exponents) if e]
    return " ".join(parts) if parts else "1"


def term_eval(term: TermSpec, jet: Jet) -> np.ndarray:
    """Product of jet components raised to the term's exponents"""
    if jet.order < term.order:
        raise ValueError(f"Term needs derivatives up to order {term.order}, jet has {jet.order}")
    factors = [value_of(jet.val), *(value_of(d) for d in jet.dx)]
    result = np.ones(np.shape(factors[0]))
    for m, e in enumerate(term.exponents):
        if e:
            result = result * factors[m] ** e
    return result


def sample_extraction(domain: Domain, n_extract: int, rng: np.random.Generator) -> np.ndarray:
    """n_extract uniform points in the domain; columns (t, x). Pass the 'extraction' stream."""
    if n_extract < 1:
        raise ValueError(f"Need at least one extraction point, got {n_extract}")
    t = rng.uniform(domain.t_min, domain.t_max, size=n_extract)
    x = rng.uniform(domain.x_min, domain.x_max, size=n_extract)
    return np.column_stack([t, x])


@dataclass
class LibrarySystem:
    terms: List[TermSpec]
    L: np.ndarray
    b: np.ndarray
    column_norms: np.ndarray

    @property
    def names(self) -> List[str]:
        return [term_name(t) for t in self.terms]

    @property
    def normalized(self) -> np.ndarray:
        """L' with unit-norm columns"""
        return self.L / self.column_norms

    def denormalize(self, normalized_coeffs: np.ndarray) -> np.ndarray:
        return normalized_coeffs / self.column_norms

    def to_csv(self, path: Union[str, Path]) -> Path:
        frame = pd.DataFrame(self.L, columns=self.names)
        frame["b"] = self.b
        frame.to_csv(path, index=False, float_format="%.17g")
        return Path(path)


def build_system(U: RationalNetwork, N: RationalNetwork, points: np.ndarray, terms: Sequence[TermSpec],
                 chunk: int = 4096) -> LibrarySystem:
    """Evaluate every term from U's jets and b = N(U, D_x U, ...) at the extraction points"""
    if len(points) == 0:
        raise ValueError("build_system needs at least one extraction point")
    order = N.n_inputs - 1
    if any(term.order != order for term in terms):
        raise ValueError(f"Terms must have {order + 1} exponents to match N")

    L = np.empty((len(points), len(terms)))
    b = np.empty(len(points))
    for start in range(0, len(points), chunk):
        rows = slice(start, start + chunk)
        t, x = points[rows, 0], points[rows, 1]
        u = network_forward(U, [jet_seed(x, "x", order), jet_seed(t, "t", order)])
        L[rows] = np.column_stack([term_eval(term, u) for term in terms])
        b[rows] = network_eval(N, [value_of(u.val), *(value_of(d) for d in u.dx)])

    column_norms = np.linalg.norm(L, axis=0)
    if np.any(zero := column_norms < ZERO_COLUMN_TOLERANCE):
        names = [term_name(t) for t, z in zip(terms, zero) if z]
        raise DegenerateLibraryError(f"Library columns with zero norm: {', '.join(names)}", terms=names)

    logger.info(f"Library system assembled: {L.shape[0]} points x {L.shape[1]} terms")
    return LibrarySystem(list(terms), L, b, column_norms)
