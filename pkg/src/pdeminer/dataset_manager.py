"""
Dataset Management for pdeminer

Ground-truth grids for the heat, Burgers and KdV equations, calibrated noise,
uniform subsampling into scattered training sets, and the on-disk formats:
a little-endian binary grid with a JSON sidecar, plus CSV for samples and for
ingesting external data.
"""

import json
import logging
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from pdeminer.errors import DatasetFormatError, DatasetSizeError
from pdeminer.tools.spectral_solvers import (
    PeriodicGrid, fourier_coefficients, fourier_interpolate, solve_burgers, solve_heat, solve_kdv,
)
from pdeminer.utils.seeding import rng_stream

logger = logging.getLogger(__name__)

MAGIC = b"PDRD1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<IQQ")

InitialCondition = Union[str, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class Domain:
    """Rectangle [t_min, t_max] x [x_min, x_max]"""
    t_min: float
    t_max: float
    x_min: float
    x_max: float

    def contains(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        return (t >= self.t_min) & (t <= self.t_max) & (x >= self.x_min) & (x <= self.x_max)


class DatasetMetadata(BaseModel):
    """Provenance carried in the sidecar next to every grid"""

    equation: str = Field(description="heat, burgers, kdv or external")
    coefficients: Dict[str, float] = Field(default_factory=dict, description="Equation parameters, e.g. alpha or nu")
    ic: str = Field(default="unknown", description="Initial condition name")
    boundary: str = Field(default="periodic", description="Boundary type")
    noise: float = Field(default=0.0, ge=0, description="Noise level p applied to the values")
    seed: Optional[int] = Field(default=None, description="Seed of the noise stream")
    n_modes: Optional[int] = Field(default=None, description="Internal Fourier modes of the generator")
    true_pde: Dict[str, float] = Field(default_factory=dict, description="Generating PDE as {term name: coefficient}")


@dataclass
class GridDataset:
    t_grid: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray
    metadata: DatasetMetadata

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        self.x_grid = np.asarray(self.x_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.t_grid.size, self.x_grid.size):
            raise DatasetFormatError(f"values shape {self.values.shape} != ({self.t_grid.size}, {self.x_grid.size})")
        if np.any(np.diff(self.t_grid) <= 0) or np.any(np.diff(self.x_grid) <= 0):
            raise DatasetFormatError("Grids must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise DatasetFormatError("Dataset values must be finite")

    @property
    def shape(self):
        return self.values.shape

    @property
    def domain(self) -> Domain:
        return Domain(float(self.t_grid[0]), float(self.t_grid[-1]), float(self.x_grid[0]), float(self.x_grid[-1]))

    def coordinates(self):
        """Row-major (t, x) coordinate arrays matching values.ravel()"""
        t, x = np.meshgrid(self.t_grid, self.x_grid, indexing="ij")
        return t.ravel(), x.ravel()


@dataclass
class SampleSet:
    """Scattered samples (t_i, x_i, u_i)"""
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    domain: Optional[Domain] = None

    def __post_init__(self):
        self.t, self.x, self.u = (np.asarray(a, dtype=float) for a in (self.t, self.x, self.u))
        if not self.t.shape == self.x.shape == self.u.shape:
            raise DatasetFormatError("t, x and u must have equal length")
        if self.domain is None and self.t.size:
            self.domain = Domain(self.t.min(), self.t.max(), self.x.min(), self.x.max())

    def __len__(self) -> int:
        return self.t.size

    def slice(self, start: int, stop: int) -> "SampleSet":
        return SampleSet(self.t[start:stop], self.x[start:stop], self.u[start:stop], self.domain)

    def to_csv(self, path: Union[str, Path]) -> Path:
        pd.DataFrame({"t": self.t, "x": self.x, "u": self.u}).to_csv(path, index=False, float_format="%.17g")
        return Path(path)

    @classmethod
    def from_csv(cls, path: Union[str, Path], domain: Optional[Domain] = None) -> "SampleSet":
        frame = _read_triplets(path)
        return cls(frame["t"].to_numpy(), frame["x"].to_numpy(), frame["u"].to_numpy(), domain)


# ========================================
# GENERATORS
# ========================================

INITIAL_CONDITIONS: Dict[str, Dict[str, Callable[[np.ndarray], np.ndarray]]] = {
    "heat": {
        "sine": lambda x: np.sin(np.pi * x),
        "gaussian-sine": lambda x: np.exp(-0.5 * (x - 5.0) ** 2) * np.sin(2.0 * np.pi * x),
    },
    "burgers": {
        "sine": lambda x: -np.sin(np.pi * x / 8.0),
        "gaussian": lambda x: -np.exp(-(x + 2.0) ** 2),
    },
    "kdv": {
        "sine": lambda x: -np.sin(np.pi * x / 20.0),
    },
}

# domain, default (n_x, n_t), default n_modes
GENERATOR_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "heat": {"domain": Domain(0.0, 10.0, 0.0, 10.0), "n_x": 201, "n_t": 201, "n_modes": 256},
    "burgers": {"domain": Domain(0.0, 10.0, -8.0, 8.0), "n_x": 256, "n_t": 201, "n_modes": 512},
    "kdv": {"domain": Domain(0.0, 40.0, -20.0, 20.0), "n_x": 512, "n_t": 201, "n_modes": 512},
}
BURGERS_GAUSSIAN_N_T = 101


def _resolve_ic(equation: str, ic: InitialCondition):
    if callable(ic):
        return "samples", ic
    try:
        return ic, INITIAL_CONDITIONS[equation][ic]
    except KeyError:
        raise ValueError(f"Unknown {equation} initial condition '{ic}'; "
                         f"choose from {sorted(INITIAL_CONDITIONS[equation])}") from None


def _grids(equation: str, n_x: Optional[int], n_t: Optional[int], n_modes: Optional[int]):
    defaults = GENERATOR_DEFAULTS[equation]
    domain: Domain = defaults["domain"]
    n_x, n_t = n_x or defaults["n_x"], n_t or defaults["n_t"]
    if n_x < 2 or n_t < 2:
        raise ValueError(f"Grid needs at least 2 points per axis, got n_x={n_x}, n_t={n_t}")
    grid = PeriodicGrid(domain.x_min, domain.x_max, n_modes or defaults["n_modes"])
    return grid, np.linspace(domain.t_min, domain.t_max, n_t), np.linspace(domain.x_min, domain.x_max, n_x)


def gen_heat(alpha: float = 0.05, ic: InitialCondition = "sine", n_x: Optional[int] = None,
             n_t: Optional[int] = None, n_modes: Optional[int] = None) -> GridDataset:
    """D_t u = alpha D_x^2 u on the periodic square [0, 10] x [0, 10]"""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    name, u0 = _resolve_ic("heat", ic)
    grid, t_grid, x_grid = _grids("heat", n_x, n_t, n_modes)
    values = fourier_interpolate(grid, solve_heat(grid, fourier_coefficients(grid, u0), alpha, t_grid), x_grid)
    values[0] = u0(x_grid)
    metadata = DatasetMetadata(equation="heat", coefficients={"alpha": alpha}, ic=name, n_modes=grid.n_modes,
                               true_pde={"(D_x^2 U)": alpha})
    logger.info(f"Generated heat dataset ({name}), grid {values.shape}")
    return GridDataset(t_grid, x_grid, values, metadata)


def gen_burgers(nu: float = 0.1, ic: InitialCondition = "sine", n_x: Optional[int] = None,
                n_t: Optional[int] = None, n_modes: Optional[int] = None) -> GridDataset:
    """D_t u = -u D_x u + nu D_x^2 u on x in [-8, 8], t in [0, 10]"""
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    name, u0 = _resolve_ic("burgers", ic)
    if n_t is None and name == "gaussian":
        n_t = BURGERS_GAUSSIAN_N_T
    grid, t_grid, x_grid = _grids("burgers", n_x, n_t, n_modes)
    values = fourier_interpolate(grid, solve_burgers(grid, fourier_coefficients(grid, u0), nu, t_grid), x_grid)
    values[0] = u0(x_grid)
    metadata = DatasetMetadata(equation="burgers", coefficients={"nu": nu}, ic=name, n_modes=grid.n_modes,
                               true_pde={"(D_x^2 U)": nu, "(U) (D_x U)": -1.0})
    logger.info(f"Generated Burgers dataset ({name}), grid {values.shape}")
    return GridDataset(t_grid, x_grid, values, metadata)


def gen_kdv(ic: InitialCondition = "sine", n_x: Optional[int] = None, n_t: Optional[int] = None,
            n_modes: Optional[int] = None) -> GridDataset:
    """D_t u = -u D_x u - D_x^3 u on x in [-20, 20], t in [0, 40]"""
    name, u0 = _resolve_ic("kdv", ic)
    grid, t_grid, x_grid = _grids("kdv", n_x, n_t, n_modes)
    values = fourier_interpolate(grid, solve_kdv(grid, fourier_coefficients(grid, u0), t_grid), x_grid)
    values[0] = u0(x_grid)
    metadata = DatasetMetadata(equation="kdv", ic=name, n_modes=grid.n_modes,
                               true_pde={"(U) (D_x U)": -1.0, "(D_x^3 U)": -1.0})
    logger.info(f"Generated KdV dataset ({name}), grid {values.shape}")
    return GridDataset(t_grid, x_grid, values, metadata)


def generate(equation: str, alpha: float = 0.05, nu: float = 0.1, ic: Optional[InitialCondition] = None,
             n_x: Optional[int] = None, n_t: Optional[int] = None, n_modes: Optional[int] = None) -> GridDataset:
    """Dispatch by equation name with each generator's own defaults"""
    grid_args = {"ic": ic or "sine", "n_x": n_x, "n_t": n_t, "n_modes": n_modes}
    if equation == "heat":
        return gen_heat(alpha=alpha, **grid_args)
    if equation == "burgers":
        return gen_burgers(nu=nu, **grid_args)
    if equation == "kdv":
        return gen_kdv(**grid_args)
    raise ValueError(f"Unknown equation '{equation}'; choose from {sorted(GENERATOR_DEFAULTS)}")


# ========================================
# NOISE AND SUBSAMPLING
# ========================================

def inject_noise(ds: GridDataset, p: float, seed: int) -> GridDataset:
    """Add N(0, (p * std(clean))^2) to every value; the noise stream is derived from seed"""
    if p < 0:
        raise ValueError(f"Noise level must be non-negative, got {p}")
    values = ds.values.copy()
    if p > 0:
        values += p * np.std(ds.values) * rng_stream(seed, "noise").standard_normal(values.shape)
    metadata = ds.metadata.model_copy(update={"noise": p, "seed": seed})
    logger.info(f"Injected {p:.0%} noise (seed {seed})")
    return replace(ds, values=values, metadata=metadata)


def subsample(ds: GridDataset, n_data: int, seed: int) -> SampleSet:
    """Uniform selection of n_data grid nodes without replacement"""
    size = ds.values.size
    if not 1 <= n_data <= size:
        raise DatasetSizeError(f"Cannot draw {n_data} samples from a grid of {size} points")
    picks = rng_stream(seed, "subsample").choice(size, size=n_data, replace=False)
    t, x = ds.coordinates()
    return SampleSet(t[picks], x[picks], ds.values.ravel()[picks], ds.domain)


# ========================================
# FILE FORMATS
# ========================================

def sidecar_path(path: Union[str, Path]) -> Path:
    return Path(path).with_suffix(".json")


def write_dataset(ds: GridDataset, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_t, n_x = ds.shape
    with open(path, "wb") as handle:
        handle.write(MAGIC + _HEADER.pack(FORMAT_VERSION, n_t, n_x))
        for array in (ds.t_grid, ds.x_grid, ds.values):
            handle.write(np.ascontiguousarray(array, dtype="<f8").tobytes())

    sidecar = {"format_version": FORMAT_VERSION, "shape": [n_t, n_x], **ds.metadata.model_dump()}
    sidecar_path(path).write_text(json.dumps(sidecar, indent=2), encoding="utf-8")
    logger.info(f"Dataset written to {path}")
    return path


def _read_triplets(path: Union[str, Path]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DatasetFormatError(f"Cannot parse CSV {path}: {e}") from e
    if list(frame.columns[:3]) != ["t", "x", "u"]:
        raise DatasetFormatError(f"CSV {path} must have header t,x,u, got {list(frame.columns)}")
    try:
        return frame.astype(float)
    except ValueError as e:
        raise DatasetFormatError(f"CSV {path} has non-numeric entries") from e


def _read_csv_grid(path: Path) -> GridDataset:
    frame = _read_triplets(path)
    try:
        grid = frame.pivot(index="t", columns="x", values="u").sort_index().sort_index(axis=1)
    except ValueError as e:
        raise DatasetFormatError(f"CSV {path} has duplicate (t, x) entries") from e
    if grid.isna().to_numpy().any():
        raise DatasetFormatError(f"CSV {path} does not fill a complete t-x grid")
    metadata = DatasetMetadata(equation="external", ic="unknown", boundary="unknown")
    return GridDataset(grid.index.to_numpy(), grid.columns.to_numpy(), grid.to_numpy(), metadata)


def read_dataset(path: Union[str, Path]) -> GridDataset:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Dataset not found: {path}")
    if path.suffix.lower() == ".csv":
        return _read_csv_grid(path)

    raw = path.read_bytes()
    head = len(MAGIC) + _HEADER.size
    if len(raw) < head:
        raise DatasetSizeError(f"{path} is shorter than the header ({len(raw)} bytes)")
    if raw[:len(MAGIC)] != MAGIC:
        raise DatasetFormatError(f"{path} has foreign magic bytes {raw[:len(MAGIC)]!r}")
    version, n_t, n_x = _HEADER.unpack_from(raw, len(MAGIC))
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"{path} has unsupported version {version}")
    expected = head + 8 * (n_t + n_x + n_t * n_x)
    if len(raw) != expected:
        raise DatasetSizeError(f"{path} has {len(raw)} bytes, header implies {expected}")

    body = np.frombuffer(raw, dtype="<f8", offset=head).astype(float)
    t_grid, x_grid, values = body[:n_t], body[n_t:n_t + n_x], body[n_t + n_x:].reshape(n_t, n_x)

    side = sidecar_path(path)
    if not side.is_file():
        raise DatasetFormatError(f"Sidecar {side} is missing")
    sidecar = json.loads(side.read_text(encoding="utf-8"))
    if sidecar.pop("format_version", None) != FORMAT_VERSION or sidecar.pop("shape", None) != [n_t, n_x]:
        raise DatasetFormatError(f"Sidecar {side} does not match {path}")
    return GridDataset(t_grid, x_grid, values, DatasetMetadata.model_validate(sidecar))
