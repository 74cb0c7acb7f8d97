"""
Pydantic models for model/experiment YAML files.

One file describes one model and one experiment. Matrices are lists of rows.
"""
from __future__ import annotations

import hashlib
import logging
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from hybridqf.errors import ConfigError
from hybridqf.generator import GeneratorParams
from hybridqf.levy import LevyAtom, LevyExponentParams, LevyMeasure
from hybridqf.phase_space import PhaseSpaceDim
from hybridqf.states import GridSpec, HybridGaussianState

logger = logging.getLogger(__name__)

Matrix = List[List[float]]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _check_square(matrix: Matrix, size: int, name: str) -> None:
    if len(matrix) != size or any(len(row) != size for row in matrix):
        raise ValueError(f"{name} must be {size}×{size}")


class DimsConfig(_Strict):
    n: int = Field(..., ge=0)
    s: int = Field(..., ge=0)

    @model_validator(mode="after")
    def check_non_empty(self) -> "DimsConfig":
        if self.n + self.s < 1:
            raise ValueError("need n + s ≥ 1")
        return self

    @property
    def d(self) -> int:
        return 2 * self.n + self.s


class LevyAtomConfig(_Strict):
    eta: List[float]
    weight: float
    compensated: Optional[bool] = None


class LevyConfig(_Strict):
    cutoff_radius: float = Field(1.0, gt=0)
    atoms: List[LevyAtomConfig] = Field(default_factory=list)


class GeneratorConfig(_Strict):
    z_matrix: Matrix
    a_matrix: Matrix
    alpha: List[float]
    levy: LevyConfig = Field(default_factory=LevyConfig)


class GaussianStateConfig(_Strict):
    mean: List[float]
    cov: Matrix


class InitialStateConfig(_Strict):
    """Either a Gaussian state or a CSV file written by the ``evolve``/``wigner`` commands."""

    gaussian: Optional[GaussianStateConfig] = None
    charfn_grid: Optional[Path] = None

    @model_validator(mode="after")
    def check_one_source(self) -> "InitialStateConfig":
        if (self.gaussian is None) == (self.charfn_grid is None):
            raise ValueError("give exactly one of 'gaussian' or 'charfn_grid'")
        return self


class GridConfig(_Strict):
    extents: List[float]
    points: List[int]

    def to_spec(self) -> GridSpec:
        return GridSpec(extents=tuple(self.extents), points=tuple(self.points))


class QuadratureConfig(_Strict):
    order: Optional[int] = Field(None, ge=2)
    tol: Optional[float] = Field(None, gt=0)
    max_depth: Optional[int] = Field(None, ge=1)


class CorrelateConfig(_Strict):
    """Multi-time probes: one row of ``kvecs`` (m × s) per probe, all at the same ``times``."""

    times: List[float]
    kvecs: List[List[List[float]]]


class SampleConfig(_Strict):
    horizon: float = Field(..., gt=0)
    dt: Optional[float] = Field(None, gt=0)
    n_paths: Optional[int] = Field(None, ge=1)
    scheme: Literal["exact", "euler"] = "exact"
    record_times: Optional[List[float]] = None
    probes: Optional[CorrelateConfig] = None


class RunConfig(_Strict):
    times: List[float] = Field(default_factory=lambda: [0.0])
    xi_samples: Optional[Matrix] = None
    grid: Optional[GridConfig] = None
    wigner: bool = False
    tol: Optional[float] = Field(None, gt=0)
    seed: int = 0
    quadrature: QuadratureConfig = Field(default_factory=QuadratureConfig)
    correlate: Optional[CorrelateConfig] = None
    sample: Optional[SampleConfig] = None


class ModelConfig(_Strict):
    name: str = "model"
    dims: DimsConfig
    generator: GeneratorConfig
    initial_state: Optional[InitialStateConfig] = None
    run: RunConfig = Field(default_factory=RunConfig)

    @model_validator(mode="after")
    def check_shapes(self) -> "ModelConfig":
        d = self.dims.d
        _check_square(self.generator.z_matrix, d, "generator.z_matrix")
        _check_square(self.generator.a_matrix, d, "generator.a_matrix")
        if len(self.generator.alpha) != d:
            raise ValueError(f"generator.alpha must have length {d}")
        for index, atom in enumerate(self.generator.levy.atoms):
            if len(atom.eta) != d:
                raise ValueError(f"generator.levy.atoms.{index}.eta must have length {d}")
        state = self.initial_state
        if state is not None and state.gaussian is not None:
            if len(state.gaussian.mean) != d:
                raise ValueError(f"initial_state.gaussian.mean must have length {d}")
            _check_square(state.gaussian.cov, d, "initial_state.gaussian.cov")
        if self.run.grid is not None and not (
            len(self.run.grid.extents) == len(self.run.grid.points) == d
        ):
            raise ValueError(f"run.grid needs {d} extents and {d} point counts")
        if self.run.xi_samples is not None and any(len(row) != d for row in self.run.xi_samples):
            raise ValueError(f"run.xi_samples rows must have length {d}")
        return self

    @property
    def phase_space(self) -> PhaseSpaceDim:
        return PhaseSpaceDim(n=self.dims.n, s=self.dims.s)

    def build_params(self) -> GeneratorParams:
        gen = self.generator
        atoms = tuple(LevyAtom(np.array(a.eta), a.weight, a.compensated) for a in gen.levy.atoms)
        nu = LevyMeasure(dim=self.dims.d, atoms=atoms, cutoff_radius=gen.levy.cutoff_radius)
        exponent = LevyExponentParams(alpha=np.array(gen.alpha), a_matrix=np.array(gen.a_matrix), nu=nu)
        return GeneratorParams(dims=self.phase_space, z_matrix=np.array(gen.z_matrix), exponent=exponent)

    def build_gaussian_state(self) -> Optional[HybridGaussianState]:
        if self.initial_state is None or self.initial_state.gaussian is None:
            return None
        gaussian = self.initial_state.gaussian
        return HybridGaussianState(dims=self.phase_space, mean=np.array(gaussian.mean), cov=np.array(gaussian.cov))


class LoadedConfig(BaseModel):
    """A parsed config with the provenance written into every output header."""

    path: Path
    sha256: str
    model: ModelConfig


def _format_location(loc: tuple) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def load_model_config(path: Path) -> LoadedConfig:
    """Parse ``path``; every failure is a :class:`ConfigError` naming a line or a field path."""

    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from exc

    try:
        data = yaml.safe_load(raw.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ConfigError("config is not valid UTF-8", str(path)) from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        location = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark is not None else str(path)
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"YAML parse error: {problem}", location) from exc

    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level", str(path))

    try:
        model = ModelConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        details = "; ".join(f"{_format_location(err['loc'])}: {err['msg']}" for err in exc.errors())
        raise ConfigError(details, f"{path}:{_format_location(first['loc'])}") from exc

    if model.initial_state is not None and model.initial_state.charfn_grid is not None:
        grid_path = model.initial_state.charfn_grid
        if not grid_path.is_absolute():
            model.initial_state.charfn_grid = path.parent / grid_path

    sha256 = hashlib.sha256(raw).hexdigest()
    logger.info("Loaded model config", extra={"config_path": str(path), "sha256": sha256, "config_name": model.name})
    return LoadedConfig(path=path, sha256=sha256, model=model)


__all__ = [
    "DimsConfig",
    "LevyAtomConfig",
    "LevyConfig",
    "GeneratorConfig",
    "GaussianStateConfig",
    "InitialStateConfig",
    "GridConfig",
    "QuadratureConfig",
    "CorrelateConfig",
    "SampleConfig",
    "RunConfig",
    "ModelConfig",
    "LoadedConfig",
    "load_model_config",
]
