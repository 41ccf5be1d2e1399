"""Tests for snapshot_entropy.tn_ising against brute-force sums."""

import cmath
import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(
  0, str(Path(__file__).resolve().parent.parent)
)
from snapshot_entropy.born_models import beta_from_phi
from snapshot_entropy.errors import ContractionError, GeometryError
from snapshot_entropy.lattice import (
  BondField,
  DualSquareGeom,
  all_snapshots,
  gauge_transform,
  reference_bonds,
)
from snapshot_entropy.tn_ising import (
  IsingInstance,
  contract_log_z,
  edge_weights,
  replica_norm_logsum,
  spin_correlation,
)

# no truncation at these sizes
EXACT = 1e-14


def _spin_configs(n: int) -> np.ndarray:
  codes = np.arange(2**n)[:, None] >> np.arange(n)
  return 1 - 2 * (codes & 1)


def _enum_terms(bonds: BondField, beta: complex) -> tuple[np.ndarray, ...]:
  geom = bonds.geometry
  spins = _spin_configs(geom.n_spins)
  a, b = geom.edges[:, 0], geom.edges[:, 1]
  energy = (spins[:, a] * spins[:, b]) @ bonds.values.astype(float)
  return spins, np.exp(complex(beta) * energy)


def _enum_z(bonds: BondField, beta: complex) -> complex:
  _, weights = _enum_terms(bonds, beta)
  return complex(np.sum(weights))


def _random_bonds(geom: DualSquareGeom, seed: int) -> BondField:
  rng = np.random.default_rng(seed)
  return BondField(geom, 1 - 2 * rng.integers(0, 2, size=geom.n_edges))


class TestContractLogZ:
  """Partition functions."""

  def test_single_plaquette(self) -> None:
    geom = DualSquareGeom(1)
    beta = 0.3
    inst = IsingInstance(geom, BondField.ones(geom), beta)
    expected = 2 * math.exp(4 * beta) + 12 + 2 * math.exp(-4 * beta)
    result = contract_log_z(inst)
    assert result.log_z.real == pytest.approx(math.log(expected))

  def test_single_plaquette_complex(self) -> None:
    geom = DualSquareGeom(1)
    inst = IsingInstance(geom, BondField.ones(geom), 0.25j * math.pi)
    z = cmath.exp(contract_log_z(inst).log_z)
    assert z == pytest.approx(8.0 + 0j, abs=1e-9)

  @pytest.mark.parametrize("size", [1, 2, 3])
  @pytest.mark.parametrize(
    "beta",
    [0.2, 0.6, 1.0, beta_from_phi(0.1 * math.pi), beta_from_phi(0.3 * math.pi)],
  )
  def test_matches_enumeration(self, size: int, beta: complex) -> None:
    geom = DualSquareGeom(size)
    for seed in range(3):
      bonds = _random_bonds(geom, seed)
      z = _enum_z(bonds, beta)
      log_z = contract_log_z(IsingInstance(geom, bonds, beta), EXACT).log_z
      assert log_z.real == pytest.approx(math.log(abs(z)), abs=1e-6)

  def test_phase_matches_enumeration(self) -> None:
    geom = DualSquareGeom(2)
    beta = beta_from_phi(0.2 * math.pi)
    bonds = _random_bonds(geom, 5)
    z = _enum_z(bonds, beta)
    inst = IsingInstance(geom, bonds, beta)
    got = cmath.exp(contract_log_z(inst, EXACT).log_z)
    assert got == pytest.approx(z, rel=1e-8)

  def test_gauge_invariant(self) -> None:
    geom = DualSquareGeom(4)
    bonds = _random_bonds(geom, 1)
    rng = np.random.default_rng(2)
    for beta in (0.45, beta_from_phi(0.15 * math.pi)):
      inst = IsingInstance(geom, bonds, beta)
      base = contract_log_z(inst, EXACT).log_z.real
      for _ in range(25):
        sigma = 1 - 2 * rng.integers(0, 2, size=geom.n_spins)
        moved = gauge_transform(bonds, sigma)
        log_z = contract_log_z(IsingInstance(geom, moved, beta), EXACT).log_z
        assert log_z.real == pytest.approx(base, abs=1e-8)

  def test_tolerance_converges(self) -> None:
    geom = DualSquareGeom(6)
    inst = IsingInstance(geom, _random_bonds(geom, 4), 0.44)
    loose = contract_log_z(inst, tol=1e-8)
    tight = contract_log_z(inst, tol=1e-12)
    assert abs(loose.log_z.real - tight.log_z.real) < 1e-5
    assert loose.truncation_error <= 1e-8

  def test_ferromagnet_ground_state_limit(self) -> None:
    # two aligned ground states dominate as beta grows
    geom = DualSquareGeom(3)
    bonds = BondField.ones(geom)
    gaps = []
    for beta in (1.0, 2.0, 4.0, 8.0):
      log_z = contract_log_z(IsingInstance(geom, bonds, beta)).log_z.real
      gaps.append(log_z - (beta * geom.n_edges + math.log(2)))
    assert all(g > 0 for g in gaps)
    assert gaps == sorted(gaps, reverse=True)
    assert gaps[-1] < 1e-4

  def test_bond_cap(self) -> None:
    geom = DualSquareGeom(3)
    inst = IsingInstance(geom, _random_bonds(geom, 0), 0.8)
    with pytest.raises(ContractionError):
      contract_log_z(inst, bond_cap=1)

  def test_geometry_mismatch(self) -> None:
    with pytest.raises(GeometryError):
      IsingInstance(
        DualSquareGeom(2), BondField.ones(DualSquareGeom(3)), 0.5
      )


class TestEdgeWeights:
  """Bounded edge normalization."""

  @pytest.mark.parametrize("beta", [0.7, -0.7, 0.3 + 1.2j])
  def test_bounded(self, beta: complex) -> None:
    weights, _ = edge_weights(np.array([1, -1], dtype=np.int8), beta)
    assert np.max(np.abs(weights)) == pytest.approx(1.0)

  def test_scale_restores_boltzmann(self) -> None:
    beta = 0.4
    weights, log_scale = edge_weights(np.array([1], dtype=np.int8), beta)
    restored = weights[0] * cmath.exp(log_scale)
    expected = np.exp(beta * np.outer([1, -1], [1, -1]))
    np.testing.assert_allclose(restored, expected)


class TestSpinCorrelation:
  """Two-point functions."""

  def test_matches_enumeration(self) -> None:
    geom = DualSquareGeom(3)
    bonds = _random_bonds(geom, 8)
    spins, weights = _enum_terms(bonds, 0.5)
    inst = IsingInstance(geom, bonds, 0.5)
    for i, j in [(0, 15), (3, 5), (1, 2), (12, 13)]:
      expected = np.sum(spins[:, i] * spins[:, j] * weights.real) / np.sum(
        weights.real
      )
      got = spin_correlation(inst, i, j)
      assert got == pytest.approx(expected, abs=1e-6)

  def test_infinite_temperature(self) -> None:
    geom = DualSquareGeom(3)
    inst = IsingInstance(geom, _random_bonds(geom, 3), 0.0)
    assert spin_correlation(inst, 0, 10) == pytest.approx(0.0, abs=1e-9)

  def test_ferromagnet_saturates(self) -> None:
    geom = DualSquareGeom(4)
    inst = IsingInstance(geom, BondField.ones(geom), 4.0)
    assert spin_correlation(inst, 4, 12) == pytest.approx(1.0, abs=1e-4)

  def test_same_site(self) -> None:
    geom = DualSquareGeom(2)
    inst = IsingInstance(geom, BondField.ones(geom), 0.5)
    with pytest.raises(GeometryError):
      spin_correlation(inst, 3, 3)


class TestReplicaNorm:
  """sum_x |Z_x|^2 against enumeration over vortex patterns."""

  @pytest.mark.parametrize(
    "beta", [0.0, 0.4, 1.1, beta_from_phi(0.2 * math.pi)]
  )
  def test_matches_enumeration(self, beta: complex) -> None:
    geom = DualSquareGeom(2)
    total = sum(
      abs(_enum_z(reference_bonds(x), beta)) ** 2
      for x in all_snapshots(geom)
    )
    got = replica_norm_logsum(geom, beta)
    assert got == pytest.approx(math.log(total), abs=1e-6)

  def test_infinite_temperature_closed_form(self) -> None:
    geom = DualSquareGeom(3)
    expected = (geom.n_sites + 2 * geom.n_spins) * math.log(2.0)
    assert replica_norm_logsum(geom, 0.0) == pytest.approx(expected)
