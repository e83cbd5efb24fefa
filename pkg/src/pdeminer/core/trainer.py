"""
Two-Network Trainer

Fits the solution network U to scattered samples while forcing
D_t U = N(U, D_x U, ..., D_x^M U) at random collocation points. Both networks
share one flat parameter vector, optimized with Adam and then L-BFGS.
"""

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from pdeminer.core.diff_engine import (
    MAX_ORDER, AdjointTape, add, jet_seed, mean, mul, square, sub, total, value_of,
)
from pdeminer.core.rational_net import (
    RationalNetwork, assign_parameters, flatten_gradients, flatten_parameters, network_eval, network_forward,
)
from pdeminer.dataset_manager import Domain, SampleSet
from pdeminer.errors import PoleError, TrainingAbortedError
from pdeminer.tools.optimizers import AdamState, LBFGSState, adam_step, lbfgs_step
from pdeminer.utils.config import RuntimeSettings, TrainConfig
from pdeminer.utils.seeding import rng_stream

logger = logging.getLogger(__name__)

STALL_TOLERANCE = 1e-8
STALL_PATIENCE = 5
MAX_LINE_SEARCH_FAILURES = 2


# ========================================
# POINTS AND LOSSES
# ========================================

def sample_collocation(domain: Domain, n: int, rng: np.random.Generator) -> np.ndarray:
    """n uniform points in the domain rectangle; columns (t, x)"""
    if n < 1:
        raise ValueError(f"Need at least one collocation point, got {n}")
    t = rng.uniform(domain.t_min, domain.t_max, size=n)
    x = rng.uniform(domain.x_min, domain.x_max, size=n)
    return np.column_stack([t, x])


def _order_of(N: RationalNetwork) -> int:
    order = N.n_inputs - 1
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"N input width {N.n_inputs} implies derivative order {order}, outside [1, {MAX_ORDER}]")
    return order


def pde_residual(U: RationalNetwork, N: RationalNetwork, t: np.ndarray, x: np.ndarray):
    """D_t U - N(U, D_x U, ..., D_x^M U) at each (t, x); signed, absolute value is the residual R"""
    order = _order_of(N)
    u = network_forward(U, [jet_seed(x, "x", order), jet_seed(t, "t", order)])
    return sub(u.dt, network_eval(N, [u.val, *u.dx]))


def data_loss(U: RationalNetwork, samples: SampleSet):
    """Mean squared mismatch between U and the noisy samples"""
    if len(samples) == 0:
        raise ValueError("data_loss needs at least one sample")
    return mean(square(sub(network_eval(U, [samples.x, samples.t]), samples.u)))


def collocation_loss(U: RationalNetwork, N: RationalNetwork, points: np.ndarray):
    """Mean squared PDE residual over collocation points (columns t, x)"""
    if len(points) == 0:
        raise ValueError("collocation_loss needs at least one point")
    return mean(square(pde_residual(U, N, points[:, 0], points[:, 1])))


def total_loss(U: RationalNetwork, N: RationalNetwork, samples: SampleSet, points: np.ndarray):
    return add(data_loss(U, samples), collocation_loss(U, N, points))


# ========================================
# SHARDED OBJECTIVE
# ========================================

@dataclass(frozen=True)
class _Shard:
    kind: str
    start: int
    stop: int


class TwoNetworkObjective:
    """
    Loss and gradient of data_loss + collocation_loss as a function of the
    joint parameter vector

    Points are split into shards, each evaluated on its own tape; shard
    values and gradients are summed in shard order so results do not depend
    on the worker count.
    """

    def __init__(self, U: RationalNetwork, N: RationalNetwork, samples: SampleSet,
                 settings: Optional[RuntimeSettings] = None):
        self.U, self.N, self.samples = U, N, samples
        self.settings = settings or RuntimeSettings()
        self.nets = [U, N]
        self._points = np.empty((0, 2))
        self._components: Dict[bytes, Tuple[float, float]] = {}

    @property
    def points(self) -> np.ndarray:
        return self._points

    @points.setter
    def points(self, points: np.ndarray) -> None:
        self._points = np.asarray(points, dtype=float)
        self._components.clear()

    def _shards(self) -> List[_Shard]:
        size = self.settings.shard_size
        return [_Shard(kind, start, min(start + size, n))
                for kind, n in (("data", len(self.samples)), ("coll", len(self._points)))
                for start in range(0, n, size)]

    def _evaluate_shard(self, shard: _Shard) -> Tuple[str, float, Dict[str, np.ndarray]]:
        try:
            return self._shard_loss(shard)
        except PoleError as e:
            index = None if e.index is None else shard.start + e.index
            if index is None or index >= shard.stop:
                raise
            if shard.kind == "data":
                point = (float(self.samples.t[index]), float(self.samples.x[index]))
            else:
                point = (float(self._points[index, 0]), float(self._points[index, 1]))
            raise PoleError(f"{e} ({shard.kind} point {index} at t={point[0]:.6g}, x={point[1]:.6g})",
                            index=index, kind=shard.kind, point=point) from e

    def _shard_loss(self, shard: _Shard) -> Tuple[str, float, Dict[str, np.ndarray]]:
        tape = AdjointTape()
        U, N = self.U.on_tape(tape), self.N.on_tape(tape)
        if shard.kind == "data":
            part = self.samples.slice(shard.start, shard.stop)
            pred = network_eval(U, [part.x, part.t])
            value = mul(total(square(sub(pred, part.u))), 1.0 / len(self.samples))
        else:
            pts = self._points[shard.start: shard.stop]
            value = mul(total(square(pde_residual(U, N, pts[:, 0], pts[:, 1]))), 1.0 / len(self._points))
        return shard.kind, float(value_of(value)), tape.backward(value)

    def evaluate(self, vector: np.ndarray) -> Tuple[float, np.ndarray]:
        if len(self._points) == 0:
            raise ValueError("Collocation points must be set before evaluation")
        assign_parameters(self.nets, vector)
        shards = self._shards()
        started = time.perf_counter()
        if self.settings.threads > 1 and len(shards) > 1:
            with ThreadPoolExecutor(max_workers=self.settings.threads) as pool:
                results = list(pool.map(self._evaluate_shard, shards))
        else:
            results = [self._evaluate_shard(shard) for shard in shards]

        losses = {"data": 0.0, "coll": 0.0}
        grad = np.zeros_like(vector, dtype=float)
        for kind, value, grads in results:
            losses[kind] += value
            grad += flatten_gradients(self.nets, grads)

        if len(self._components) > 64:
            self._components.clear()
        self._components[np.asarray(vector).tobytes()] = (losses["data"], losses["coll"])
        logger.debug(f"Evaluated {len(shards)} shards in {time.perf_counter() - started:.3f}s")
        return losses["data"] + losses["coll"], grad

    def components_at(self, vector: np.ndarray) -> Tuple[float, float]:
        """(data_loss, coll_loss) at `vector`, from cache when it was evaluated already"""
        key = np.asarray(vector).tobytes()
        if key not in self._components:
            self.evaluate(vector)
        return self._components[key]


# ========================================
# HISTORY
# ========================================

@dataclass
class EpochRecord:
    epoch: int
    phase: str
    data_loss: float
    coll_loss: float
    wall_time: float
    reselected: bool
    line_search_failed: bool = False

    @property
    def total_loss(self) -> float:
        return self.data_loss + self.coll_loss


@dataclass
class TrainHistory:
    records: List[EpochRecord] = field(default_factory=list)
    stop_reason: Optional[str] = None

    def __len__(self) -> int:
        return len(self.records)

    def total_losses(self) -> np.ndarray:
        return np.array([r.total_loss for r in self.records])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.records])


class _TrainingLog:
    """Newline-delimited JSON sink for epoch records"""

    def __init__(self, path: Optional[Union[str, Path]]):
        self.handle = open(path, "w", encoding="utf-8") if path else None

    def write(self, record: EpochRecord) -> None:
        if self.handle:
            self.handle.write(json.dumps(asdict(record)) + "\n")

    def close(self) -> None:
        if self.handle:
            self.handle.close()


# ========================================
# TRAINING LOOP
# ========================================

def train(U: RationalNetwork, N: RationalNetwork, samples: SampleSet, config: TrainConfig,
          domain: Optional[Domain] = None, settings: Optional[RuntimeSettings] = None,
          log_path: Optional[Union[str, Path]] = None) -> Tuple[RationalNetwork, RationalNetwork, TrainHistory]:
    """
    Adam phase then L-BFGS phase, full batch

    Collocation points are redrawn at every epoch e with e % n_select == 0.
    Loss values in the history are those at the start of each epoch.
    """
    if N.n_inputs != config.derivative_order + 1:
        raise ValueError(f"N has {N.n_inputs} inputs but derivative_order is {config.derivative_order}")
    domain = domain or samples.domain
    rng = rng_stream(config.rng_seed, "collocation")
    objective = TwoNetworkObjective(U, N, samples, settings)
    params = flatten_parameters([U, N])
    history = TrainHistory()
    sink = _TrainingLog(log_path)
    epoch, phase = 0, "adam"

    def reselect(e: int) -> bool:
        if e % config.n_select:
            return False
        objective.points = sample_collocation(domain, config.n_coll, rng)
        return True

    def log_progress(record: EpochRecord) -> None:
        history.records.append(record)
        sink.write(record)
        logger.debug(f"[{record.phase}] epoch {record.epoch}: data {record.data_loss:.6e} coll {record.coll_loss:.6e}")
        if record.epoch % config.log_every == 0:
            logger.info(f"[{record.phase}] epoch {record.epoch}: total loss {record.total_loss:.6e}")

    try:
        logger.info(f"Adam phase: {config.adam_epochs} epochs, lr {config.adam_lr}")
        adam = AdamState()
        for epoch in range(config.adam_epochs):
            started = time.perf_counter()
            reselected = reselect(epoch)
            _, grad = objective.evaluate(params)
            data, coll = objective.components_at(params)
            params, adam = adam_step(params, grad, adam, config.adam_lr)
            log_progress(EpochRecord(epoch, phase, data, coll, time.perf_counter() - started, reselected))

        phase = "lbfgs"
        logger.info(f"L-BFGS phase: up to {config.lbfgs_epochs} epochs, lr {config.lbfgs_lr}")
        lbfgs = LBFGSState(history=config.lbfgs_history)
        stalled = 0
        for k in range(config.lbfgs_epochs):
            epoch = config.adam_epochs + k
            started = time.perf_counter()
            if reselected := reselect(epoch):
                lbfgs.loss = lbfgs.grad = None
            start_params = params
            params, lbfgs, info = lbfgs_step(params, objective.evaluate, lbfgs, config.lbfgs_lr)
            data, coll = objective.components_at(start_params)
            log_progress(EpochRecord(epoch, phase, data, coll, time.perf_counter() - started, reselected,
                                     info.line_search_failed))

            if lbfgs.consecutive_failures >= MAX_LINE_SEARCH_FAILURES:
                history.stop_reason = "line_search_failed"
                break
            decrease = (info.loss - info.new_loss) / max(abs(info.loss), np.finfo(float).tiny)
            stalled = stalled + 1 if decrease < STALL_TOLERANCE else 0
            if stalled >= STALL_PATIENCE:
                history.stop_reason = "stalled"
                break
        if history.stop_reason:
            logger.warning(f"L-BFGS stopped early at epoch {epoch}: {history.stop_reason}")
    except PoleError as e:
        raise TrainingAbortedError(f"Training aborted in {phase} phase at epoch {epoch}: {e}",
                                   epoch=epoch, phase=phase, index=e.index, kind=e.kind, point=e.point) from e
    finally:
        sink.close()

    assign_parameters([U, N], params)
    final = history.records[-1].total_loss if history.records else float("nan")
    logger.info(f"Training finished after {len(history)} epochs, last recorded loss {final:.6e}")
    return U, N, history
