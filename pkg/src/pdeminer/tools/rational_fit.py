"""
Minimax type-(3,2) rational fit to ReLU

Recomputes the default rational activation coefficients instead of carrying
unverifiable constants. The fit is the classic linear feasibility bisection:
for an error level delta, |P(x) - relu(x) Q(x)| <= delta Q(x) on a dense grid
is a set of linear constraints in the coefficients, so bisecting on delta
with an LP feasibility check converges to the discrete minimax solution.
"""

import logging
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.optimize import linprog

from pdeminer.errors import RationalFitError

logger = logging.getLogger(__name__)

FIT_INTERVAL = (-1.0, 1.0)
POLE_FREE_INTERVAL = (-10.0, 10.0)
MIN_DENOMINATOR = 0.5


def _feasible(delta: float, grid: np.ndarray, target: np.ndarray, guard: np.ndarray):
    """LP feasibility for error level delta; unknowns (a0, a1, a2, a3, b1, b2), b0 = 1"""
    powers = np.vander(grid, 4, increasing=True)
    den_terms = np.column_stack([grid, grid ** 2])

    # P - (f + delta) Q <= 0  and  -P + (f - delta) Q <= 0
    upper = np.hstack([powers, -(target + delta)[:, None] * den_terms])
    lower = np.hstack([-powers, (target - delta)[:, None] * den_terms])
    # Q(x) >= MIN_DENOMINATOR on the pole-free interval
    positivity = np.hstack([np.zeros((guard.size, 4)), -np.column_stack([guard, guard ** 2])])

    A_ub = np.vstack([upper, lower, positivity])
    b_ub = np.concatenate([target + delta, -(target - delta), np.full(guard.size, 1.0 - MIN_DENOMINATOR)])
    result = linprog(np.zeros(6), A_ub=A_ub, b_ub=b_ub, bounds=[(-50.0, 50.0)] * 6, method="highs")
    return result.x if result.status == 0 else None


@lru_cache(maxsize=None)
def init_rational_relu_fit(n_grid: int = 1001, iterations: int = 40) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    """
    Best type-(3,2) rational approximation to ReLU on [-1, 1]

    Returns:
        (numerator a0..a3, denominator b0..b2), lowest power first
    """
    grid = np.linspace(*FIT_INTERVAL, n_grid)
    target = np.maximum(grid, 0.0)
    guard = np.linspace(*POLE_FREE_INTERVAL, 401)

    lo, hi = 0.0, 1.0
    if (best := _feasible(hi, grid, target, guard)) is None:
        raise RationalFitError("ReLU fit infeasible even at unit error")

    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if (solution := _feasible(mid, grid, target, guard)) is None:
            lo = mid
        else:
            hi, best = mid, solution

    numerator = tuple(float(c) for c in best[:4])
    denominator = (1.0, float(best[4]), float(best[5]))
    if not rational_is_pole_free(denominator, POLE_FREE_INTERVAL):
        raise RationalFitError(f"Fitted denominator {denominator} has a real root in {POLE_FREE_INTERVAL}")

    logger.info(f"ReLU rational fit converged, discrete max error {hi:.5f}")
    return numerator, denominator


def rational_is_pole_free(denominator, interval=POLE_FREE_INTERVAL) -> bool:
    """True when b0 + b1 x + b2 x^2 has no real root inside `interval`"""
    roots = np.roots(np.asarray(denominator, dtype=float)[::-1])
    real = roots[np.abs(roots.imag) < 1e-12].real
    return not np.any((real >= interval[0]) & (real <= interval[1]))


def rational_max_error(numerator, denominator, n_grid: int = 20001) -> float:
    """Max |P/Q - ReLU| on a dense grid of [-1, 1]"""
    grid = np.linspace(*FIT_INTERVAL, n_grid)
    values = np.polyval(np.asarray(numerator)[::-1], grid) / np.polyval(np.asarray(denominator)[::-1], grid)
    return float(np.max(np.abs(values - np.maximum(grid, 0.0))))
