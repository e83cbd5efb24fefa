"""
Invariant suites behind `pdeminer verify`

Each suite draws its own random problems, checks a property against an
independent oracle (finite differences, brute-force enumeration, direct
residual recomputation, exhaustive subset search) and reports pass/fail.
"""

import logging
import time
from dataclasses import dataclass
from itertools import combinations, combinations_with_replacement
from math import comb
from typing import Callable, List, Tuple

import numpy as np

from pdeminer.core.diff_engine import AdjointTape, jet_seed
from pdeminer.core.pde_library import LibrarySystem, TermSpec, enumerate_terms
from pdeminer.core.rational_net import (
    RationalNetwork, assign_parameters, create_network, flatten_gradients, flatten_parameters, network_eval,
    network_forward, parameter_count,
)
from pdeminer.core.sparse_regression import (
    discover_pde, least_important_feature, least_squares, residual_increase_check, rfe_path,
)
from pdeminer.core.trainer import total_loss
from pdeminer.dataset_manager import SampleSet, gen_heat, inject_noise
from pdeminer.utils.seeding import rng_stream

logger = logging.getLogger(__name__)

JET_RTOL, JET_ATOL, JET_STEP = 1e-4, 1e-5, 1e-5
GRAD_RTOL, GRAD_ATOL, GRAD_STEP = 1e-4, 1e-7, 1e-5
TIE_GAP = 1e-6


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


# ========================================
# HELPERS (shared with the test-suite)
# ========================================

def perturbed_network(rng: np.random.Generator, widths, name: str = "U", spread: float = 0.02) -> RationalNetwork:
    """Rational network with activation coefficients nudged away from the ReLU fit"""
    net = create_network(widths, kind="rational", name=name, seed=int(rng.integers(2 ** 31)))
    for act in net.activations:
        act.num = act.num + rng.uniform(-spread, spread, 4)
        act.den = act.den + np.concatenate([[0.0], rng.uniform(-spread, spread, 2)])
    return net


def jet_finite_difference_ok(net: RationalNetwork, x: np.ndarray, t: np.ndarray, order: int = 3) -> bool:
    """Each D_x^k from the jet against a central difference of D_x^(k-1); D_t against the value path"""
    h = JET_STEP
    jet = network_forward(net, [jet_seed(x, "x", order), jet_seed(t, "t", order)])
    plus = network_forward(net, [jet_seed(x + h, "x", order), jet_seed(t, "t", order)])
    minus = network_forward(net, [jet_seed(x - h, "x", order), jet_seed(t, "t", order)])
    exact = [jet.val, *jet.dx]
    upper, lower = [plus.val, *plus.dx], [minus.val, *minus.dx]
    for k in range(1, order + 1):
        fd = (upper[k - 1] - lower[k - 1]) / (2 * h)
        if not np.allclose(exact[k], fd, rtol=JET_RTOL, atol=JET_ATOL):
            return False
    fd_t = (network_eval(net, [x, t + h]) - network_eval(net, [x, t - h])) / (2 * h)
    return bool(np.allclose(jet.dt, fd_t, rtol=JET_RTOL, atol=JET_ATOL))


def loss_gradient_ok(U: RationalNetwork, N: RationalNetwork, samples: SampleSet, points: np.ndarray) -> bool:
    """Tape gradient of data + collocation loss against central differences, every parameter"""
    nets = [U, N]
    tape = AdjointTape()
    loss = total_loss(U.on_tape(tape), N.on_tape(tape), samples, points)
    grad = flatten_gradients(nets, tape.backward(loss))

    base = flatten_parameters(nets)
    fd = np.empty_like(base)
    for i in range(base.size):
        shifted = base.copy()
        shifted[i] += GRAD_STEP
        assign_parameters(nets, shifted)
        up = float(total_loss(U, N, samples, points))
        shifted[i] -= 2 * GRAD_STEP
        assign_parameters(nets, shifted)
        down = float(total_loss(U, N, samples, points))
        fd[i] = (up - down) / (2 * GRAD_STEP)
    assign_parameters(nets, base)
    return bool(np.allclose(grad, fd, rtol=GRAD_RTOL, atol=GRAD_ATOL))


def synthetic_system(A: np.ndarray, b: np.ndarray) -> LibrarySystem:
    """LibrarySystem around a bare matrix; term names are placeholders"""
    n = A.shape[1]
    terms = [TermSpec(tuple(int(i == j) for i in range(n))) for j in range(n)]
    return LibrarySystem(terms, A, b, np.linalg.norm(A, axis=0))


def unit_columns(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    A = rng.standard_normal((m, n))
    return A / np.linalg.norm(A, axis=0)


def planted_system(rng: np.random.Generator, m: int = 60, n: int = 10, noise: float = 0.01):
    """Unit-column system with a 2- or 3-sparse truth, |c| in [1, 2], random signs"""
    A = unit_columns(rng, m, n)
    support = tuple(sorted(rng.choice(n, size=int(rng.integers(2, 4)), replace=False)))
    c = np.zeros(n)
    c[list(support)] = rng.uniform(1.0, 2.0, len(support)) * rng.choice([-1.0, 1.0], len(support))
    clean = A @ c
    b = clean + noise * np.std(clean) * rng.standard_normal(m)
    return synthetic_system(A, b), support


def best_subset(A: np.ndarray, b: np.ndarray, size: int) -> Tuple[int, ...]:
    """Exhaustive search for the support of a given size with the smallest residual"""
    return min(combinations(range(A.shape[1]), size), key=lambda s: least_squares(A, b, s)[1])


# ========================================
# SUITES
# ========================================

def suite_differentiation(rng: np.random.Generator, n_nets: int) -> Tuple[bool, str]:
    failures = 0
    for i in range(n_nets):
        width = int(rng.integers(3, 11)) if i % 10 else 50
        depth = int(rng.integers(1, 4)) if i % 10 else 5
        net = perturbed_network(rng, (2, *[width] * depth, 1))
        x, t = rng.uniform(-1, 1, 20), rng.uniform(-1, 1, 20)
        failures += not jet_finite_difference_ok(net, x, t)

    order = 2
    U = perturbed_network(rng, (2, 4, 4, 1), "U")
    N = perturbed_network(rng, (order + 1, 4, 1), "N")
    samples = SampleSet(rng.uniform(-1, 1, 10), rng.uniform(-1, 1, 10), rng.standard_normal(10))
    points = rng.uniform(-1, 1, (10, 2))
    grads_ok = loss_gradient_ok(U, N, samples, points)
    verdict = "ok" if grads_ok else "MISMATCH"
    return failures == 0 and grads_ok, f"{n_nets - failures}/{n_nets} jet checks, loss gradient {verdict}"


def suite_parameter_counts(rng: np.random.Generator, _: int) -> Tuple[bool, str]:
    widths = (2, 50, 50, 50, 50, 50, 1)
    fixed, rational = parameter_count(widths, "tanh"), parameter_count(widths, "rational")
    ok = fixed == 10401 and rational == 10436 and parameter_count((1, 1), "tanh") == 2
    return ok, f"fixed {fixed}, rational {rational}"


def suite_library_counts(rng: np.random.Generator, _: int) -> Tuple[bool, str]:
    mismatches = []
    for order in range(0, 5):
        for degree in range(1, 7):
            brute = {tuple(c.count(i) for i in range(order + 1))
                     for d in range(degree + 1) for c in combinations_with_replacement(range(order + 1), d)}
            terms = enumerate_terms(order, degree)
            if len(terms) != len(brute) or len(terms) != comb(order + 1 + degree, degree):
                mismatches.append((order, degree))
    ok = not mismatches and len(enumerate_terms(3, 5)) == 126
    return ok, f"M<=4, K<=6 checked, mismatches {mismatches or 'none'}"


def suite_rfe_theorem(rng: np.random.Generator, n_systems: int) -> Tuple[bool, str]:
    checked, bad = 0, []
    for i in range(n_systems):
        m, n = int(rng.integers(20, 101)), int(rng.integers(2, 13))
        A = unit_columns(rng, m, n)
        c = rng.uniform(0.5, 2.0, n) * rng.choice([-1.0, 1.0], n)
        system = synthetic_system(A, A @ c + 0.1 * rng.standard_normal(m))
        path = rfe_path(system)
        if np.any(np.diff(path.residuals) < -1e-12 * path.b_norm_sq):
            bad.append((i, "monotonicity"))
        for cand in path:
            mags = np.sort(np.abs(cand.normalized_coeffs[list(cand.support)]))
            if len(mags) > 1 and (mags[1] - mags[0]) <= TIE_GAP * mags[1]:
                continue
            increases = residual_increase_check(system, cand)
            k = least_important_feature(cand.support, cand.normalized_coeffs)
            checked += 1
            if min(increases, key=increases.get) != k:
                bad.append((i, "argmin"))
            expected = cand.normalized_coeffs[k] ** 2
            if abs(increases[k] - expected) > 1e-9 * expected + 1e-13 * path.b_norm_sq:
                bad.append((i, "increase"))
    return not bad, f"{checked} eliminations on {n_systems} systems, failures {bad[:5] or 'none'}"


def suite_planted_recovery(rng: np.random.Generator, n_systems: int) -> Tuple[bool, str]:
    """A hit needs the top-ranked support to equal both the planted support and the exhaustive best subset"""
    hits = oracle_agrees = 0
    for _ in range(n_systems):
        system, support = planted_system(rng)
        oracle = best_subset(system.normalized, system.b, len(support))
        top = tuple(discover_pde(system).top.support)
        oracle_agrees += oracle == support
        hits += top == support == oracle
    needed = int(np.ceil(0.95 * n_systems))
    detail = (f"{hits}/{n_systems} recovered and confirmed by exhaustive search (need {needed}), "
              f"exhaustive search finds the planted support in {oracle_agrees}")
    return hits >= needed, detail


def suite_noise_calibration(rng: np.random.Generator, _: int) -> Tuple[bool, str]:
    clean = gen_heat()
    details, ok = [], True
    for p in (0.1, 0.5, 1.0):
        noisy = inject_noise(clean, p, seed=int(rng.integers(2 ** 31)))
        measured = np.std(noisy.values - clean.values) / np.std(clean.values)
        ok &= abs(measured - p) <= 0.02 * p
        details.append(f"p={p}: {measured:.4f}")
    return bool(ok), ", ".join(details)


SUITES: List[Tuple[str, Callable[[np.random.Generator, int], Tuple[bool, str]], int, int]] = [
    # name, suite, full size, quick size
    ("differentiation", suite_differentiation, 100, 10),
    ("parameter counts", suite_parameter_counts, 1, 1),
    ("library counts", suite_library_counts, 1, 1),
    ("rfe theorem", suite_rfe_theorem, 200, 40),
    ("planted recovery", suite_planted_recovery, 100, 20),
    ("noise calibration", suite_noise_calibration, 1, 1),
]


def run_verification(quick: bool = False, seed: int = 0) -> List[SuiteResult]:
    results = []
    for name, suite, full, small in SUITES:
        started = time.perf_counter()
        try:
            passed, detail = suite(rng_stream(seed, f"verify.{name}"), small if quick else full)
        except Exception as e:
            logger.error(f"Suite '{name}' raised {type(e).__name__}: {e}")
            passed, detail = False, f"{type(e).__name__}: {e}"
        results.append(SuiteResult(name, passed, detail, time.perf_counter() - started))
        logger.info(f"Suite '{name}': {'passed' if passed else 'FAILED'} ({detail})")
    return results
