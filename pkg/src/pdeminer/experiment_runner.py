"""
Experiment Runner for pdeminer

End-to-end discovery: obtain a grid, corrupt it, subsample it, train U and N,
assemble the library system at extraction points and rank the sparse
candidates. Every artifact needed to reproduce the run lands in the run
directory.
"""

import json
import logging
import platform
import shutil
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
import pydantic
import scipy

from pdeminer import __version__
from pdeminer.core.pde_library import build_system, enumerate_terms, sample_extraction
from pdeminer.core.rational_net import RationalNetwork, create_network, save_checkpoint
from pdeminer.core.sparse_regression import PDEReport, discover_pde
from pdeminer.core.trainer import TrainHistory, train
from pdeminer.dataset_manager import GridDataset, generate, inject_noise, read_dataset, subsample, write_dataset
from pdeminer.errors import ConfigError
from pdeminer.utils.config import ExperimentConfig, RuntimeSettings
from pdeminer.utils.logging_config import attach_file_handler
from pdeminer.utils.seeding import STREAM_NAMES, rng_stream, stream_key

logger = logging.getLogger(__name__)

ESCALATION_MIN_INCREASE = 0.20
MAX_DERIVATIVE_ORDER = 4
ATTEMPT_ARTIFACTS = ("U.json", "N.json", "training_log.jsonl", "report.json", "report.txt", "system.csv")


@dataclass
class AttemptResult:
    order: int
    directory: Path
    report: PDEReport
    history: TrainHistory
    U: RationalNetwork
    N: RationalNetwork


@dataclass
class RunResult:
    run_dir: Path
    accepted: AttemptResult
    attempts: List[AttemptResult] = field(default_factory=list)

    @property
    def report(self) -> PDEReport:
        return self.accepted.report


class ExperimentRunner:
    """
    Drives one discovery run

    With `escalate_order` set, a run whose best candidate barely beats the
    next sparser one is retried with one more x-derivative, up to order 4.
    Each attempt keeps its own directory; the accepted one is copied to the
    run root.
    """

    def __init__(self, config: ExperimentConfig, settings: Optional[RuntimeSettings] = None):
        self.config = config
        self.settings = settings or RuntimeSettings.from_env()
        self.run_dir = Path(config.output_dir)

    # ========================================
    # DATA
    # ========================================

    def load_dataset(self) -> GridDataset:
        source = self.config.dataset
        if source.path is not None:
            if not Path(source.path).is_file():
                raise ConfigError(f"Dataset path does not exist: {source.path}")
            return read_dataset(source.path)
        return generate(source.equation, alpha=source.alpha, nu=source.nu, ic=source.ic,
                        n_x=source.n_x, n_t=source.n_t, n_modes=source.n_modes)

    def _write_manifest(self) -> None:
        manifest = {
            "pdeminer": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
            "pydantic": pydantic.VERSION,
            "platform": platform.platform(),
            "seed": self.config.seed,
            "streams": {name: stream_key(name) for name in STREAM_NAMES},
            "threads": self.settings.threads,
            "shard_size": self.settings.shard_size,
            "started": datetime.now().isoformat(timespec="seconds"),
        }
        (self.run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")

    def _report_metadata(self, order: int, noisy: GridDataset) -> Dict[str, Any]:
        return {
            "M": order,
            "K": self.config.library_degree,
            "n_extract": self.config.n_extract,
            "n_data": self.config.n_data,
            "n_coll": self.config.train.n_coll,
            "noise": self.config.noise,
            "seed": self.config.seed,
            "activation": self.config.networks.activation,
            "equation": noisy.metadata.equation,
            "ic": noisy.metadata.ic,
        }

    # ========================================
    # ATTEMPTS
    # ========================================

    def run_attempt(self, order: int, noisy: GridDataset, samples, directory: Path) -> AttemptResult:
        cfg = self.config
        directory.mkdir(parents=True, exist_ok=True)
        logger.info(f"Discovery attempt with M={order}, K={cfg.library_degree} in {directory}")

        U = create_network(cfg.networks.u_widths, kind=cfg.networks.activation, name="U", seed=cfg.seed)
        N = create_network(cfg.networks.n_widths(order), kind=cfg.networks.activation, name="N", seed=cfg.seed)
        train_config = cfg.train.model_copy(update={"derivative_order": order})
        U, N, history = train(U, N, samples, train_config, domain=noisy.domain, settings=self.settings,
                              log_path=directory / "training_log.jsonl")
        save_checkpoint(U, directory / "U.json")
        save_checkpoint(N, directory / "N.json")

        points = sample_extraction(noisy.domain, cfg.n_extract, rng_stream(cfg.seed, "extraction"))
        system = build_system(U, N, points, enumerate_terms(order, cfg.library_degree))
        if cfg.dump_system:
            system.to_csv(directory / "system.csv")

        report = discover_pde(system, self._report_metadata(order, noisy))
        if noisy.metadata.true_pde:
            report.attach_true_pde(noisy.metadata.true_pde)
        self.write_report(report, directory)
        return AttemptResult(order, directory, report, history, U, N)

    @staticmethod
    def write_report(report: PDEReport, directory: Path) -> None:
        (directory / "report.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")
        (directory / "report.txt").write_text(report.to_text(), encoding="utf-8")
        (directory / "report.schema.json").write_text(json.dumps(PDEReport.model_json_schema(), indent=2),
                                                      encoding="utf-8")

    def needs_escalation(self, attempt: AttemptResult) -> bool:
        increase = attempt.report.top.ratio_percent / 100.0 - 1.0
        return (self.config.escalate_order and attempt.order < MAX_DERIVATIVE_ORDER
                and increase < ESCALATION_MIN_INCREASE)

    def run(self) -> RunResult:
        cfg = self.config
        self.run_dir.mkdir(parents=True, exist_ok=True)
        handler = attach_file_handler(self.run_dir / "run.log")
        try:
            (self.run_dir / "config.json").write_text(cfg.model_dump_json(indent=2), encoding="utf-8")
            self._write_manifest()

            clean = self.load_dataset()
            noisy = inject_noise(clean, cfg.noise, cfg.seed)
            write_dataset(noisy, self.run_dir / "dataset.pdrd")
            samples = subsample(noisy, cfg.n_data, cfg.seed)
            samples.to_csv(self.run_dir / "samples.csv")
            logger.info(f"Training on {len(samples)} samples from a {noisy.shape} grid at {cfg.noise:.0%} noise")

            attempts: List[AttemptResult] = []
            order = cfg.derivative_order
            while True:
                directory = self.run_dir / f"attempt_M{order}" if cfg.escalate_order else self.run_dir
                attempts.append(self.run_attempt(order, noisy, samples, directory))
                if not self.needs_escalation(attempts[-1]):
                    break
                logger.warning(f"Top candidate at M={order} only raises the residual by "
                               f"{attempts[-1].report.top.ratio_percent - 100.0:.1f}%, retrying with M={order + 1}")
                order += 1

            accepted = attempts[-1]
            if accepted.directory != self.run_dir:
                for name in ATTEMPT_ARTIFACTS + ("report.schema.json",):
                    if (accepted.directory / name).is_file():
                        shutil.copy2(accepted.directory / name, self.run_dir / name)
            logger.info(f"Report written to {self.run_dir / 'report.txt'}")
            return RunResult(self.run_dir, accepted, attempts)
        finally:
            logging.getLogger().removeHandler(handler)
            handler.close()


def run_discovery(config: ExperimentConfig, settings: Optional[RuntimeSettings] = None) -> RunResult:
    """Factory-style entry point used by the CLI"""
    return ExperimentRunner(config, settings).run()
