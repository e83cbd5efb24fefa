"""
Experiment configuration

Pydantic models for everything a discovery run needs, JSON loading, shipped
presets, dotted-key overrides from the command line and the environment
settings that control evaluation sharding.
"""

import json
import logging
import os
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from pdeminer.errors import ConfigError

logger = logging.getLogger(__name__)

EQUATIONS = ("heat", "burgers", "kdv")
DEFAULT_U_WIDTHS = (2, 50, 50, 50, 50, 50, 1)
DEFAULT_N_HIDDEN = (100, 100)


class TrainConfig(BaseModel):
    """Two-phase optimizer schedule and collocation settings"""

    n_coll: int = Field(default=10000, ge=1, description="Collocation points per selection")
    n_select: int = Field(default=1, ge=1, description="Epochs between collocation re-selection")
    adam_epochs: int = Field(default=2000, ge=0, description="Full-batch Adam epochs")
    adam_lr: float = Field(default=1e-3, gt=0, description="Adam learning rate")
    lbfgs_epochs: int = Field(default=200, ge=0, description="Maximum L-BFGS epochs")
    lbfgs_lr: float = Field(default=0.1, gt=0, description="L-BFGS step scale")
    lbfgs_history: int = Field(default=10, ge=1, description="L-BFGS curvature pairs kept")
    derivative_order: int = Field(default=2, ge=1, le=4, description="Highest x-derivative M fed to N")
    rng_seed: int = Field(default=0, ge=0, exclude=True,
                          description="Seed of the collocation stream; follows ExperimentConfig.seed")
    log_every: int = Field(default=100, ge=1, description="Epochs between INFO progress lines")


class NetworkConfig(BaseModel):
    """Architectures for U (solution) and N (hidden PDE)"""

    u_widths: List[int] = Field(default=list(DEFAULT_U_WIDTHS), description="U widths, input 2 (x, t), output 1")
    n_hidden: List[int] = Field(default=list(DEFAULT_N_HIDDEN), description="Hidden widths of N")
    activation: Literal["rational", "tanh", "sigmoid"] = Field(default="rational", description="Activation family")

    @field_validator("u_widths")
    @classmethod
    def _check_u_widths(cls, widths: List[int]) -> List[int]:
        if len(widths) < 2 or widths[0] != 2 or widths[-1] != 1 or min(widths) < 1:
            raise ValueError(f"U widths must start with 2, end with 1 and be positive, got {widths}")
        return widths

    @field_validator("n_hidden")
    @classmethod
    def _check_n_hidden(cls, widths: List[int]) -> List[int]:
        if any(w < 1 for w in widths):
            raise ValueError(f"N hidden widths must be positive, got {widths}")
        return widths

    def n_widths(self, order: int) -> Tuple[int, ...]:
        return (order + 1, *self.n_hidden, 1)


class DatasetSource(BaseModel):
    """Either an existing dataset file or a generator recipe"""

    path: Optional[str] = Field(default=None, description="Dataset file (.pdrd or .csv)")
    equation: Optional[Literal["heat", "burgers", "kdv"]] = Field(default=None, description="Generator to run")
    ic: Optional[str] = Field(default=None, description="Initial condition name")
    alpha: float = Field(default=0.05, gt=0, description="Heat diffusivity")
    nu: float = Field(default=0.1, gt=0, description="Burgers viscosity")
    n_x: Optional[int] = Field(default=None, ge=2, description="Output x grid size")
    n_t: Optional[int] = Field(default=None, ge=2, description="Output t grid size")
    n_modes: Optional[int] = Field(default=None, ge=8, description="Internal Fourier modes")

    @model_validator(mode="after")
    def _one_source(self) -> "DatasetSource":
        if (self.path is None) == (self.equation is None):
            raise ValueError("dataset needs exactly one of 'path' or 'equation'")
        return self


class ExperimentConfig(BaseModel):
    """One end-to-end discovery run"""

    name: str = Field(default="experiment", description="Run label")
    dataset: DatasetSource = Field(description="Where the grid comes from")
    noise: float = Field(default=0.0, ge=0, description="Noise level p (std ratio)")
    n_data: int = Field(default=10000, ge=1, description="Scattered training samples")
    train: TrainConfig = Field(default_factory=TrainConfig, description="Optimizer schedule")
    networks: NetworkConfig = Field(default_factory=NetworkConfig, description="Architectures")
    library_degree: int = Field(default=2, ge=1, le=6, description="Max total degree K of library terms")
    n_extract: int = Field(default=20000, ge=1, description="Extraction points for the library system")
    output_dir: str = Field(default="runs/experiment", description="Run directory")
    seed: int = Field(default=0, ge=0, description="Master seed for every random stream")
    escalate_order: bool = Field(default=False, description="Retry with M+1 when the top ratio is below 20%")
    dump_system: bool = Field(default=False, description="Write system.csv with the library matrix")

    @model_validator(mode="before")
    @classmethod
    def _reject_conflicting_seed(cls, data: Any) -> Any:
        if isinstance(data, dict) and isinstance(data.get("train"), dict) and "rng_seed" in data["train"]:
            train_seed, seed = data["train"]["rng_seed"], data.get("seed", 0)
            if train_seed != seed:
                raise ValueError(f"train.rng_seed={train_seed} disagrees with seed={seed}; "
                                 "set the top-level seed instead")
        return data

    @model_validator(mode="after")
    def _sync_seed(self) -> "ExperimentConfig":
        self.train.rng_seed = self.seed
        return self

    @property
    def derivative_order(self) -> int:
        return self.train.derivative_order


class RuntimeSettings(BaseModel):
    """Process-level knobs read from the environment"""

    threads: int = Field(default=1, ge=1, description="Shard worker threads")
    shard_size: int = Field(default=4096, ge=1, description="Points per evaluation shard")

    @classmethod
    def from_env(cls) -> "RuntimeSettings":
        load_dotenv()
        try:
            return cls(threads=int(os.getenv("PDEMINER_THREADS", "1")),
                       shard_size=int(os.getenv("PDEMINER_SHARD_SIZE", "4096")))
        except (ValueError, ValidationError) as e:
            raise ConfigError(f"Invalid PDEMINER_THREADS / PDEMINER_SHARD_SIZE: {e}") from e


# ========================================
# LOADING AND OVERRIDES
# ========================================

def _validate(data: Dict[str, Any], origin: str) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration ({origin}): {e}") from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {e}") from e
    return _validate(data, str(path))


def list_presets() -> List[str]:
    return sorted(p.name[:-5] for p in resources.files("pdeminer.presets").iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> ExperimentConfig:
    if name not in list_presets():
        raise ConfigError(f"Unknown preset '{name}'; available: {', '.join(list_presets())}")
    text = resources.files("pdeminer.presets").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return _validate(json.loads(text), f"preset {name}")


def parse_override(item: str) -> Tuple[str, Any]:
    """'train.adam_epochs=50' -> ('train.adam_epochs', 50); non-JSON values stay strings"""
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ConfigError(f"Override must look like key=value, got '{item}'")
    try:
        return key.strip(), json.loads(raw)
    except json.JSONDecodeError:
        return key.strip(), raw


def merge_overrides(base: ExperimentConfig, overrides: Dict[str, Any]) -> ExperimentConfig:
    """Apply dotted-key overrides and re-validate the whole config"""
    data = base.model_dump()
    for dotted, value in overrides.items():
        *parents, leaf = dotted.split(".")
        node = data
        for part in parents:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"Unknown config section '{part}' in '{dotted}'")
            node = node[part]
        if leaf not in node:
            raise ConfigError(f"Unknown config key '{dotted}'")
        node[leaf] = value
        logger.debug(f"Config override {dotted} = {value!r}")
    return _validate(data, "overrides")
