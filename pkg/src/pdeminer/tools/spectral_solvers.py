"""
Fourier pseudospectral solvers on periodic intervals

Heat is advanced exactly mode by mode. Burgers and KdV use an
integrating-factor RK4 (the linear part is absorbed into exp(L dt)), with
2/3-rule dealiasing of the quadratic term and substeps sized from the
current solution amplitude. Solutions are returned as Fourier coefficients
so callers can evaluate them at any x.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict

import numpy as np

from pdeminer.errors import SolverInstabilityError

logger = logging.getLogger(__name__)

CFL = 0.1
BLOWUP_LIMIT = 1e6


@dataclass(frozen=True)
class PeriodicGrid:
    x_min: float
    x_max: float
    n_modes: int

    def __post_init__(self):
        if self.n_modes < 8 or self.n_modes % 2:
            raise ValueError(f"n_modes must be an even integer >= 8, got {self.n_modes}")
        if not self.x_max > self.x_min:
            raise ValueError(f"Empty interval [{self.x_min}, {self.x_max}]")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def spacing(self) -> float:
        return self.length / self.n_modes

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.x_min + self.spacing * np.arange(self.n_modes)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi / self.length * np.arange(self.n_modes // 2 + 1)

    @cached_property
    def dealias(self) -> np.ndarray:
        return np.arange(self.n_modes // 2 + 1) < self.n_modes / 3.0


def fourier_coefficients(grid: PeriodicGrid, u0: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    return np.fft.rfft(u0(grid.nodes))


def fourier_interpolate(grid: PeriodicGrid, coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """
    Trigonometric interpolant evaluated at arbitrary x

    `coeffs` may be a single rfft row or a stack of rows (..., n_modes//2 + 1).
    """
    weights = np.full(grid.n_modes // 2 + 1, 2.0)
    weights[0] = weights[-1] = 1.0
    phases = np.exp(1j * np.outer(np.asarray(x, dtype=float) - grid.x_min, grid.wavenumbers))
    return np.real((np.asarray(coeffs) * weights) @ phases.T) / grid.n_modes


# ========================================
# HEAT: exact per-mode decay
# ========================================

def solve_heat(grid: PeriodicGrid, u0_hat: np.ndarray, alpha: float, t_out: np.ndarray) -> np.ndarray:
    """D_t u = alpha D_x^2 u; each mode decays as exp(-alpha k^2 t)"""
    decay = np.exp(-alpha * np.outer(t_out, grid.wavenumbers ** 2))
    return decay * u0_hat


# ========================================
# IF-RK4 for D_t u = L u - u u_x
# ========================================

def _advection(grid: PeriodicGrid) -> Callable[[np.ndarray], np.ndarray]:
    """Fourier transform of -u u_x = -(u^2)_x / 2, dealiased"""
    ik = 1j * grid.wavenumbers
    mask = grid.dealias

    def nonlinear(u_hat: np.ndarray) -> np.ndarray:
        u = np.fft.irfft(u_hat * mask, n=grid.n_modes)
        return -0.5 * ik * np.fft.rfft(u * u) * mask

    return nonlinear


def integrate_if_rk4(grid: PeriodicGrid, u0_hat: np.ndarray, linear: np.ndarray,
                     nonlinear: Callable[[np.ndarray], np.ndarray], t_out: np.ndarray, label: str) -> np.ndarray:
    """Coefficient rows at every t_out; t_out[0] is the time of u0_hat"""
    rows = np.empty((len(t_out), u0_hat.size), dtype=complex)
    rows[0] = u_hat = u0_hat.copy()
    factors: Dict[float, tuple] = {}
    steps = 0

    for i in range(1, len(t_out)):
        amplitude = max(np.max(np.abs(np.fft.irfft(u_hat, n=grid.n_modes))), 1.0)
        interval = t_out[i] - t_out[i - 1]
        n_sub = int(np.ceil(interval / (CFL * grid.spacing / amplitude)))
        dt = interval / n_sub
        if dt not in factors:
            factors[dt] = (np.exp(linear * dt), np.exp(linear * dt / 2))
        E, E2 = factors[dt]

        for _ in range(n_sub):
            a = nonlinear(u_hat)
            b = nonlinear(E2 * (u_hat + 0.5 * dt * a))
            c = nonlinear(E2 * u_hat + 0.5 * dt * b)
            d = nonlinear(E * u_hat + dt * E2 * c)
            u_hat = E * u_hat + dt / 6.0 * (E * a + 2.0 * E2 * (b + c) + d)
        steps += n_sub

        peak = np.max(np.abs(np.fft.irfft(u_hat, n=grid.n_modes)))
        if not np.isfinite(peak) or peak > BLOWUP_LIMIT:
            raise SolverInstabilityError(f"{label} solution blew up at t={t_out[i]:g} (max |u| = {peak:g})")
        rows[i] = u_hat

    logger.debug(f"{label}: {steps} IF-RK4 steps over {len(t_out) - 1} output intervals")
    return rows


def solve_burgers(grid: PeriodicGrid, u0_hat: np.ndarray, nu: float, t_out: np.ndarray) -> np.ndarray:
    """D_t u = -u u_x + nu u_xx"""
    return integrate_if_rk4(grid, u0_hat, -nu * grid.wavenumbers ** 2, _advection(grid), t_out, "burgers")


def solve_kdv(grid: PeriodicGrid, u0_hat: np.ndarray, t_out: np.ndarray) -> np.ndarray:
    """D_t u = -u u_x - u_xxx; the dispersive term is i k^3 in Fourier space"""
    return integrate_if_rk4(grid, u0_hat, 1j * grid.wavenumbers ** 3, _advection(grid), t_out, "kdv")
