"""Run configuration: a TOML file validated into pydantic models."""

from __future__ import annotations

import hashlib
import tomllib
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from .born_models import Variant
from .errors import ConfigError
from .tn_ising import DEFAULT_BOND_CAP, DEFAULT_TOL

Observable = Literal["none", "vortex_cost", "correlation"]


class ModelBlock(BaseModel):
  """Which distribution to sample, and where."""

  variant: Variant = Field(
    description="tfim, deformed, nishimori or coherent"
  )
  params: list[float] | None = Field(
    default=None, description="Explicit parameter values (J, q, p, phi)"
  )
  param_range: tuple[float, float, float] | None = Field(
    default=None,
    description="Inclusive grid as [start, stop, step]",
  )
  sizes: list[int] = Field(
    min_length=1,
    description="Chain lengths or vortex-grid sides",
  )
  boundary: Literal["open", "periodic"] = Field(
    default="open", description="TFIM chain boundary"
  )
  enforce_parity: bool = Field(
    default=False, description="Reject odd Nishimori vortex parity"
  )

  @model_validator(mode="after")
  def _one_grid(self) -> ModelBlock:
    if (self.params is None) == (self.param_range is None):
      raise ValueError("give exactly one of params or param_range")
    if not self.grid():
      raise ValueError("parameter grid is empty")
    if any(s < 1 for s in self.sizes):
      raise ValueError(f"sizes must be positive: {self.sizes}")
    return self

  def grid(self) -> list[float]:
    """Parameter values, rounded to 12 decimals."""
    if self.params is not None:
      return [round(v, 12) for v in self.params]
    assert self.param_range is not None
    start, stop, step = self.param_range
    if step <= 0 or stop < start:
      return []
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(count)]


class SamplerBlock(BaseModel):
  """Sampling schedule; the seed has no default."""

  seed: int = Field(description="Master seed, mandatory")
  n_samples: int = Field(ge=2, description="Snapshots per point")
  chains: int = Field(default=1, ge=1, description="Chains per point")
  thermalization: int | None = Field(
    default=None, ge=0, description="Steps before sampling (5N)"
  )
  thinning: int | None = Field(
    default=None, ge=1, description="Steps between samples (N)"
  )
  pair_weight: float | None = Field(default=None, ge=0)
  site_weight: float | None = Field(default=None, ge=0)


class EstimatorBlock(BaseModel):
  baseline_file: Path | None = Field(
    default=None, description="Shuffle-baseline table to load/extend"
  )
  baseline_samples: int = Field(default=100, ge=1)
  tol: float = Field(default=DEFAULT_TOL, gt=0)
  bond_cap: int = Field(default=DEFAULT_BOND_CAP, ge=1)
  observable: Observable = Field(
    default="none", description="Auxiliary column for sweeps"
  )
  obs_samples: int | None = Field(
    default=None, ge=2, description="Disorder samples (default N_s)"
  )
  vortex_exponent: float = Field(default=0.5, gt=0)
  vortex_weight: int | None = Field(
    default=None, description="Ensemble |Z|^w for the vortex cost"
  )


class OutputBlock(BaseModel):
  directory: Path = Field(description="Where results are written")
  png: bool = Field(default=False, description="Also write snapshot PNGs")


class RunConfig(BaseModel):
  model: ModelBlock
  sampler: SamplerBlock
  estimator: EstimatorBlock = Field(default_factory=EstimatorBlock)
  output: OutputBlock
  threads: int = Field(default=1, ge=1)

  def config_hash(self) -> str:
    """Short digest of the canonical JSON dump."""
    dump = self.model_dump_json(exclude={"threads"})
    return hashlib.sha256(dump.encode()).hexdigest()[:12]


def _errors(exc: ValidationError) -> str:
  return "; ".join(
    f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}"
    for e in exc.errors()
  )


def parse_config(data: dict[str, Any]) -> RunConfig:
  """Validate a parsed TOML document.

  Raises:
    ConfigError: Listing every invalid field.
  """
  try:
    return RunConfig.model_validate(data)
  except ValidationError as exc:
    raise ConfigError(f"invalid configuration: {_errors(exc)}") from exc


def load_config(path: Path) -> RunConfig:
  """Read and validate a TOML run configuration.

  Raises:
    ConfigError: If the file is missing, not TOML, or invalid.
  """
  try:
    data = tomllib.loads(path.read_text())
  except FileNotFoundError:
    raise ConfigError(f"config file not found: {path}") from None
  except tomllib.TOMLDecodeError as exc:
    raise ConfigError(f"{path}: {exc}") from exc
  return parse_config(data)


def apply_overrides(config: RunConfig, **overrides: Any) -> RunConfig:
  """Return a copy with CLI flags applied; None means not given.

  Recognized keys: seed, out, baseline_file, tol, bond_cap, threads.

  Raises:
    ConfigError: If an override fails validation.
  """
  data = config.model_dump()
  routes = {
    "seed": ("sampler", "seed"),
    "out": ("output", "directory"),
    "baseline_file": ("estimator", "baseline_file"),
    "tol": ("estimator", "tol"),
    "bond_cap": ("estimator", "bond_cap"),
  }
  for key, value in overrides.items():
    if value is None:
      continue
    if key == "threads":
      data["threads"] = value
    elif key in routes:
      block, name = routes[key]
      data[block][name] = value
    else:
      raise ConfigError(f"unknown override {key!r}")
  return parse_config(data)
