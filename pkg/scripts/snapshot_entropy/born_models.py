"""The four snapshot distributions behind one interface.

Every model maps a Snapshot to its normalized log2 Born probability.
The 2D models are Ising partition functions on the dual lattice,
evaluated at a canonical bond field for the vortex pattern.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import StrEnum
from functools import cached_property
from typing import Protocol, runtime_checkable

import numpy as np
from numpy.typing import NDArray

from .errors import GeometryError, ParameterError
from .fermion_tfim import LOG_PROB_FLOOR, TfimModel, log_born_prob
from .lattice import (
  Boundary,
  BondField,
  ChainGeom,
  DualSquareGeom,
  Geometry,
  Snapshot,
  reference_bonds,
  vortex_of_bonds,
)
from .tn_ising import (
  DEFAULT_BOND_CAP,
  DEFAULT_TOL,
  IsingInstance,
  contract_log_z,
  replica_norm_logsum,
)

LN2 = math.log(2.0)


class Variant(StrEnum):
  TFIM = "tfim"
  DEFORMED = "deformed"
  NISHIMORI = "nishimori"
  COHERENT = "coherent"


# ── Parameter maps ──────────────────────────────────────────────


def beta_from_q(q: float) -> complex:
  """tanh(beta) = 1 - 2q, or 1 / (1 - 2|q|) on the branch q < 0.

  The unsatisfied-bond weight exp(-2 beta) is q / (1 - q) for q >= 0
  and its negative at -q.
  """
  if q < 0:
    return complex(np.arctanh(complex(1.0 / (1.0 + 2.0 * q))))
  return complex(np.arctanh(1.0 - 2.0 * q))


def beta_from_p(p: float) -> float:
  """Nishimori temperature, tanh(beta) = 1 - 2p."""
  return float(np.arctanh(1.0 - 2.0 * p))


def beta_from_phi(phi: float) -> complex:
  """exp(2 beta) = i tan(phi)."""
  return 0.5 * cmath.log(1j * math.tan(phi))


def dual_beta(k: float) -> float:
  """Kramers-Wannier dual temperature, tanh(beta) = exp(-2K)."""
  return float(np.arctanh(math.exp(-2.0 * k)))


@runtime_checkable
class BornModel(Protocol):
  """A normalized distribution over snapshots of one geometry."""

  @property
  def variant(self) -> Variant: ...

  @property
  def parameter(self) -> float: ...

  @property
  def geometry(self) -> Geometry: ...

  def log_prob(self, x: Snapshot) -> float: ...


def _check_geometry(model: BornModel, x: Snapshot) -> None:
  if x.geometry != model.geometry:
    raise GeometryError(
      f"snapshot geometry {x.geometry} does not match {model.geometry}"
    )


@dataclass(frozen=True)
class TfimBorn:
  """TFIM chain ground state measured in the X basis."""

  coupling: float
  geometry: ChainGeom

  @property
  def variant(self) -> Variant:
    return Variant.TFIM

  @property
  def parameter(self) -> float:
    return self.coupling

  @cached_property
  def state(self) -> TfimModel:
    return TfimModel(self.coupling, self.geometry)

  def log_prob(self, x: Snapshot) -> float:
    _check_geometry(self, x)
    return log_born_prob(self.state, x)


@dataclass(frozen=True)
class _IsingBorn:
  """Shared plumbing for the partition-function models."""

  geometry: DualSquareGeom
  tol: float = DEFAULT_TOL
  bond_cap: int = DEFAULT_BOND_CAP

  @property
  def beta(self) -> complex:
    raise NotImplementedError

  @property
  def weight_power(self) -> int:
    """rho_x is proportional to |Z_x| to this power."""
    return 2

  def log_abs_partition(self, bonds: BondField) -> float:
    """Natural log of |Z_J|."""
    result = contract_log_z(
      IsingInstance(self.geometry, bonds, self.beta),
      self.tol,
      self.bond_cap,
    )
    return result.log_z.real

  @cached_property
  def log_norm(self) -> float:
    """Natural log of sum_x |Z_x|^2."""
    return replica_norm_logsum(
      self.geometry, self.beta, self.tol, self.bond_cap
    )

  def log_prob_from_partition(self, log_abs_z: float) -> float:
    """log2 rho_x given ln|Z_x|."""
    if log_abs_z == -math.inf:
      return LOG_PROB_FLOOR
    return (2.0 * log_abs_z - self.log_norm) / LN2


def _product_state_log_prob(x: Snapshot) -> float:
  return 0.0 if bool(np.all(x.values == 1)) else LOG_PROB_FLOOR


@dataclass(frozen=True)
class DeformedParamagnet(_IsingBorn):
  """rho_x proportional to |Z_x(beta)|^2 with tanh(beta) = 1 - 2q.

  At -q the unsatisfied-bond weight changes sign. Away from the open
  boundary that leaves rho unchanged; the boundary edges of one
  plaquette sublattice keep the flipped sign.
  """

  q: float = 0.0

  def __post_init__(self) -> None:
    if not -0.5 < self.q < 0.5:
      raise ParameterError(f"q must lie in (-0.5, 0.5), got {self.q}")

  @property
  def variant(self) -> Variant:
    return Variant.DEFORMED

  @property
  def parameter(self) -> float:
    return self.q

  @property
  def beta(self) -> complex:
    return beta_from_q(self.q)

  def log_prob(self, x: Snapshot) -> float:
    _check_geometry(self, x)
    if self.q == 0.0:
      return _product_state_log_prob(x)
    lz = self.log_abs_partition(reference_bonds(x))
    return self.log_prob_from_partition(lz)


@dataclass(frozen=True)
class CoherentRBIM(_IsingBorn):
  """rho_x proportional to |Z_x|^2 with exp(2 beta) = i tan(phi)."""

  phi: float = 0.1 * math.pi

  def __post_init__(self) -> None:
    if not 0.0 < self.phi < 0.5 * math.pi:
      raise ParameterError(
        f"phi must lie in (0, pi/2), got {self.phi}"
      )

  @property
  def variant(self) -> Variant:
    return Variant.COHERENT

  @property
  def parameter(self) -> float:
    return self.phi

  @property
  def beta(self) -> complex:
    return beta_from_phi(self.phi)

  def log_prob(self, x: Snapshot) -> float:
    _check_geometry(self, x)
    lz = self.log_abs_partition(reference_bonds(x))
    return self.log_prob_from_partition(lz)


@dataclass(frozen=True)
class NishimoriRBIM(_IsingBorn):
  """Vortices of random bonds, each -1 with probability p.

  rho_x = Z_x / (2 (2 cosh beta)^E) at tanh(beta) = 1 - 2p, which
  equals Z_x (p(1-p))^(E/2) / 2.
  """

  p: float = 0.0
  enforce_parity: bool = False

  def __post_init__(self) -> None:
    if not 0.0 <= self.p <= 0.5:
      raise ParameterError(f"p must lie in [0, 0.5], got {self.p}")

  @property
  def variant(self) -> Variant:
    return Variant.NISHIMORI

  @property
  def parameter(self) -> float:
    return self.p

  @property
  def beta(self) -> complex:
    return complex(beta_from_p(self.p))

  @property
  def weight_power(self) -> int:
    return 1

  @cached_property
  def log_norm(self) -> float:
    """Natural log of sum_x Z_x."""
    e = self.geometry.n_edges
    return math.log(2.0) - 0.5 * e * math.log(self.p * (1.0 - self.p))

  def log_prob_from_partition(self, log_abs_z: float) -> float:
    if log_abs_z == -math.inf:
      return LOG_PROB_FLOOR
    return (log_abs_z - self.log_norm) / LN2

  def log_prob(self, x: Snapshot) -> float:
    _check_geometry(self, x)
    if self.enforce_parity and x.parity() != 1:
      raise ParameterError("odd vortex parity with parity check enabled")
    if self.p == 0.0:
      return _product_state_log_prob(x)
    lz = self.log_abs_partition(reference_bonds(x))
    return self.log_prob_from_partition(lz)

  def sample_bonds(self, rng: np.random.Generator) -> BondField:
    """Independent bonds, -1 with probability p."""
    flips = rng.random(self.geometry.n_edges) < self.p
    values: NDArray[np.int8] = np.where(flips, -1, 1).astype(np.int8)
    return BondField(self.geometry, values)

  def direct_sample(
    self, rng: np.random.Generator
  ) -> tuple[Snapshot, BondField]:
    bonds = self.sample_bonds(rng)
    return vortex_of_bonds(bonds), bonds


IsingBornModel = DeformedParamagnet | CoherentRBIM | NishimoriRBIM


def make_model(
  variant: Variant | str,
  parameter: float,
  size: int,
  *,
  boundary: Boundary = "open",
  tol: float = DEFAULT_TOL,
  bond_cap: int = DEFAULT_BOND_CAP,
  enforce_parity: bool = False,
) -> BornModel:
  """Build a model from its config-level description.

  Args:
    variant: One of the Variant tags.
    parameter: J, q, p or phi.
    size: Chain length (TFIM) or vortex-grid side (2D models).
    boundary: Chain boundary for TFIM.
    tol: Contraction tolerance for 2D models.
    bond_cap: Bond-dimension cap for 2D models.
    enforce_parity: Nishimori vortex-parity check.

  Raises:
    ParameterError: On an unknown variant or an out-of-range parameter.
  """
  try:
    tag = Variant(variant)
  except ValueError:
    raise ParameterError(f"unknown model variant {variant!r}") from None
  if tag is Variant.TFIM:
    return TfimBorn(parameter, ChainGeom(size, boundary))
  geom = DualSquareGeom(size)
  if tag is Variant.DEFORMED:
    return DeformedParamagnet(geom, tol, bond_cap, q=parameter)
  if tag is Variant.COHERENT:
    return CoherentRBIM(geom, tol, bond_cap, phi=parameter)
  return NishimoriRBIM(
    geom, tol, bond_cap, p=parameter, enforce_parity=enforce_parity
  )
