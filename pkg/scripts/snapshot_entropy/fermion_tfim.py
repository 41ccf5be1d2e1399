"""Born probabilities of the transverse-field Ising chain ground state.

H = -(1-J) sum_i X_i - J sum_i Z_i Z_{i+1} maps under Jordan-Wigner
(X_i = 1 - 2 n_i) to a quadratic Majorana Hamiltonian
H = (i/4) sum_ab A_ab g_a g_b with X_i = -i g_{2i} g_{2i+1} and
Z_i Z_{i+1} = -i g_{2i+1} g_{2i+2}. Covariances use the convention
M_ab = -i<g_a g_b> (a != b), so the X = +1 vacuum is a direct sum of
[[0, 1], [-1, 0]] blocks.

A only couples even to odd Majoranas, A = [[0, h], [-h^T, 0]] in
(even, odd) order, so the Bogoliubov problem is the SVD of the L x L
block h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DiagonalizationError, GeometryError, ParameterError
from .lattice import ChainGeom, Snapshot

LOG_PROB_FLOOR = -math.inf
DET_UNDERFLOW = 1e-300
PURITY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
  """Real antisymmetric Majorana covariance of a Gaussian state."""

  matrix: NDArray[np.float64]

  def __post_init__(self) -> None:
    m = np.asarray(self.matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
      raise GeometryError(f"covariance must be 2L x 2L, got {m.shape}")
    if not np.allclose(m, -m.T, atol=1e-10):
      raise GeometryError("covariance matrix is not antisymmetric")
    object.__setattr__(self, "matrix", m)

  @property
  def n_modes(self) -> int:
    return self.matrix.shape[0] // 2

  def is_pure(self, tol: float = PURITY_TOL) -> bool:
    eye = np.eye(self.matrix.shape[0])
    return bool(np.allclose(self.matrix @ self.matrix.T, eye, atol=tol))


def _pair_block(h: NDArray[np.float64]) -> NDArray[np.float64]:
  """Interleave an even-odd block into a full 2L x 2L matrix."""
  n = h.shape[0]
  full = np.zeros((2 * n, 2 * n))
  full[0::2, 1::2] = h
  full[1::2, 0::2] = -h.T
  return full


def coupling_block(coupling: float, geom: ChainGeom) -> NDArray[np.float64]:
  """Even-to-odd block h of the Majorana coupling matrix A.

  The periodic chain is written in the even-parity sector, where the
  wrap-around bond picks up antiperiodic sign.
  """
  n = geom.length
  h = np.zeros((n, n))
  h[np.arange(n), np.arange(n)] = 2.0 * (1.0 - coupling)
  h[np.arange(1, n), np.arange(n - 1)] = -2.0 * coupling
  if geom.boundary == "periodic":
    h[0, n - 1] += 2.0 * coupling
  return h


def _check_coupling(coupling: float) -> None:
  if not 0.0 <= coupling <= 1.0:
    raise ParameterError(f"coupling J must lie in [0, 1], got {coupling}")


def _bogoliubov(
  coupling: float, geom: ChainGeom
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
  _check_coupling(coupling)
  h = coupling_block(coupling, geom)
  try:
    u, energies, vt = np.linalg.svd(h)
  except np.linalg.LinAlgError as exc:
    raise DiagonalizationError(
      f"SVD of the coupling block failed at J={coupling}: {exc}"
    ) from exc
  # even sector: flip the softest mode if the vacuum came out odd
  if np.linalg.det(u) * np.linalg.det(vt) < 0:
    u[:, -1] *= -1.0
    energies = energies.copy()
    energies[-1] *= -1.0
  return u, energies, vt


def ground_covariance(coupling: float, geom: ChainGeom) -> CovarianceMatrix:
  """Covariance of the even-parity ground state.

  Args:
    coupling: J in [0, 1].
    geom: The chain.

  Returns:
    M with even-odd block U V^T, where h = U S V^T.

  Raises:
    ParameterError: If J is outside [0, 1].
    DiagonalizationError: If the SVD does not converge.
  """
  u, _, vt = _bogoliubov(coupling, geom)
  return CovarianceMatrix(_pair_block(u @ vt))


def ground_energy(coupling: float, geom: ChainGeom) -> float:
  """Energy of the even-parity ground state, -1/2 sum of mode energies."""
  _, energies, _ = _bogoliubov(coupling, geom)
  return -0.5 * float(np.sum(energies))


def x_basis_covariance(x: Snapshot | ArrayLike) -> CovarianceMatrix:
  """Covariance of the product state with occupations (1 - x_j)/2."""
  values = (
    x.values if isinstance(x, Snapshot) else np.asarray(x).ravel()
  )
  return CovarianceMatrix(_pair_block(np.diag(values.astype(float))))


@dataclass(frozen=True)
class TfimModel:
  """Ground state of the TFIM chain at coupling J."""

  coupling: float
  geometry: ChainGeom

  def __post_init__(self) -> None:
    _check_coupling(self.coupling)

  @cached_property
  def covariance(self) -> CovarianceMatrix:
    return ground_covariance(self.coupling, self.geometry)

  def ground_energy(self) -> float:
    return ground_energy(self.coupling, self.geometry)


def log_born_prob(model: TfimModel, x: Snapshot) -> float:
  """log2 |<x|psi>|^2 from the Gaussian overlap sqrt det((I - M_x M)/2).

  Parity-forbidden outcomes (non-positive or underflowing determinant)
  return ``LOG_PROB_FLOOR``.

  Raises:
    GeometryError: If ``x`` does not have one value per chain site.
  """
  n = model.geometry.length
  if x.values.size != n:
    raise GeometryError(
      f"snapshot has {x.values.size} sites, chain has {n}"
    )
  m = model.covariance.matrix
  spins = x.values.astype(float)[:, None]
  # M_x^T M with M_x = blockdiag(x_j [[0, 1], [-1, 0]])
  product = np.empty_like(m)
  product[0::2] = -spins * m[1::2]
  product[1::2] = spins * m[0::2]
  kernel = 0.5 * (np.eye(2 * n) + product)
  sign, logdet = np.linalg.slogdet(kernel)
  if sign <= 0 or logdet < math.log(DET_UNDERFLOW):
    return LOG_PROB_FLOOR
  return 0.5 * float(logdet) / math.log(2.0)
