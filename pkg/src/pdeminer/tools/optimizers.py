"""
Full-batch optimizers over one flat parameter vector

Adam with bias correction, and L-BFGS (two-loop recursion) with a
backtracking step that only accepts a strict loss decrease.
"""

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Deque, Optional, Sequence, Tuple

import numpy as np

from pdeminer.errors import PoleError

logger = logging.getLogger(__name__)

MAX_HALVINGS = 20
CURVATURE_FLOOR = 1e-12

Evaluator = Callable[[np.ndarray], Tuple[float, np.ndarray]]


# ========================================
# ADAM
# ========================================

@dataclass(frozen=True)
class AdamState:
    m: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, lr: float) -> Tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; returns new params and state, inputs untouched"""
    if np.shape(params) != np.shape(grads):
        raise ValueError(f"Parameter shape {np.shape(params)} != gradient shape {np.shape(grads)}")
    m = np.zeros_like(params) if state.m is None else state.m
    v = np.zeros_like(params) if state.v is None else state.v
    t = state.t + 1

    m = state.beta1 * m + (1.0 - state.beta1) * grads
    v = state.beta2 * v + (1.0 - state.beta2) * (grads * grads)
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t

    step = lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
    return params - step, replace(state, m=m, v=v, t=t)


# ========================================
# L-BFGS
# ========================================

@dataclass
class LBFGSState:
    history: int = 10
    s: Deque[np.ndarray] = field(default_factory=deque)
    y: Deque[np.ndarray] = field(default_factory=deque)
    loss: Optional[float] = None
    grad: Optional[np.ndarray] = None
    consecutive_failures: int = 0


@dataclass
class LBFGSInfo:
    loss: float
    new_loss: float
    halvings: int
    line_search_failed: bool


def two_loop_direction(grad: np.ndarray, s_hist: Sequence[np.ndarray], y_hist: Sequence[np.ndarray]) -> np.ndarray:
    """-H grad with H the implicit inverse-Hessian of the stored pairs; -grad when history is empty"""
    q = np.array(grad, dtype=float)
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        alpha = (s @ q) / (y @ s)
        q -= alpha * y
        alphas.append(alpha)

    if s_hist:
        q *= (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])

    for (s, y), alpha in zip(zip(s_hist, y_hist), reversed(alphas)):
        beta = (y @ q) / (y @ s)
        q += s * (alpha - beta)
    return -q


def _trial(evaluate: Evaluator, point: np.ndarray) -> Tuple[float, Optional[np.ndarray]]:
    try:
        loss, grad = evaluate(point)
    except PoleError as e:
        logger.debug(f"Line-search trial hit a pole: {e}")
        return np.inf, None
    return float(loss), grad


def lbfgs_step(params: np.ndarray, evaluate: Evaluator, state: LBFGSState, lr: float = 0.1,
               history: Optional[int] = None) -> Tuple[np.ndarray, LBFGSState, LBFGSInfo]:
    """
    One L-BFGS iteration

    The step lr * direction is halved up to MAX_HALVINGS times until the loss
    strictly decreases. If it never does, the step is skipped and the event
    is reported through `info.line_search_failed`.
    """
    if history is not None:
        state.history = history
    if state.loss is None or state.grad is None:
        state.loss, state.grad = evaluate(params)
        state.loss = float(state.loss)
    loss, grad = state.loss, state.grad

    direction = two_loop_direction(grad, list(state.s), list(state.y))
    if not direction @ grad < 0:
        logger.debug("L-BFGS direction is not a descent direction, falling back to steepest descent")
        direction = -grad

    step = lr
    for halvings in range(MAX_HALVINGS + 1):
        candidate = params + step * direction
        new_loss, new_grad = _trial(evaluate, candidate)
        if np.isfinite(new_loss) and new_loss < loss:
            break
        step *= 0.5
    else:
        state.consecutive_failures += 1
        logger.warning(f"L-BFGS line search found no decrease after {MAX_HALVINGS} halvings")
        return params, state, LBFGSInfo(loss=loss, new_loss=loss, halvings=MAX_HALVINGS, line_search_failed=True)

    s, y = candidate - params, new_grad - grad
    if s @ y > CURVATURE_FLOOR * (s @ s):
        state.s.append(s)
        state.y.append(y)
        while len(state.s) > state.history:
            state.s.popleft()
            state.y.popleft()

    state.loss, state.grad, state.consecutive_failures = new_loss, new_grad, 0
    return candidate, state, LBFGSInfo(loss=loss, new_loss=new_loss, halvings=halvings, line_search_failed=False)
