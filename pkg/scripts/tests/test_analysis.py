"""Tests for snapshot_entropy.analysis."""

import math
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

sys.path.insert(
  0, str(Path(__file__).resolve().parent.parent)
)
from snapshot_entropy.analysis import (
  SWEEP_COLUMNS,
  Series,
  collapse_score,
  data_collapse,
  finite_difference,
  group_series,
  has_significant_peak,
  optimal_step,
  peak_location,
  read_sweep_table,
  smooth,
  sweep_rows,
  total_error,
  write_sweep_table,
)
from snapshot_entropy.errors import AnalysisError


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
  n = int(round((hi - lo) / step)) + 1
  return lo + step * np.arange(n)


class TestSeries:
  """Grid checks."""

  def test_spacing(self) -> None:
    s = Series(_grid(0.0, 1.0, 0.1), np.zeros(11))
    assert s.spacing == pytest.approx(0.1)

  def test_non_uniform(self) -> None:
    s = Series(np.array([0.0, 0.1, 0.3]), np.zeros(3))
    with pytest.raises(AnalysisError):
      _ = s.spacing

  def test_length_mismatch(self) -> None:
    with pytest.raises(AnalysisError):
      Series(np.zeros(3), np.zeros(4))


class TestSmooth:
  """Three-point running means."""

  def test_constant_unchanged(self) -> None:
    s = smooth(Series(_grid(0, 1, 0.1), np.full(11, 2.5)), rounds=3)
    assert len(s) == 5
    np.testing.assert_allclose(s.y, 2.5)

  def test_linear_unchanged(self) -> None:
    x = _grid(0, 1, 0.1)
    s = smooth(Series(x, 3 * x + 1), rounds=2)
    np.testing.assert_allclose(s.y, 3 * s.x + 1)
    np.testing.assert_allclose(s.x, x[2:-2])

  def test_spike_spreads(self) -> None:
    y = np.zeros(7)
    y[3] = 6.0
    s = smooth(Series(_grid(0, 6, 1), y), rounds=1)
    np.testing.assert_allclose(s.y, [0.0, 2.0, 2.0, 2.0, 0.0])

  def test_commutes_with_affine_map(self) -> None:
    x = _grid(0, 2, 0.1)
    y = np.sin(3 * x)
    plain = smooth(Series(x, y), rounds=2)
    moved = smooth(Series(x, -2.5 * y + 0.7), rounds=2)
    np.testing.assert_allclose(moved.y, -2.5 * plain.y + 0.7, atol=1e-12)

  def test_quiets_derivative_noise(self) -> None:
    rng = np.random.default_rng(17)
    noise = Series(_grid(0, 199.9, 0.1), rng.normal(size=2000))
    for order in (1, 2, 3):
      raw = finite_difference(noise, order)
      quiet = finite_difference(smooth(noise, rounds=3), order)
      assert np.var(quiet.y) < 0.5 * np.var(raw.y)

  def test_too_short(self) -> None:
    with pytest.raises(AnalysisError):
      smooth(Series(_grid(0, 4, 1), np.zeros(5)), rounds=3)

  def test_zero_rounds(self) -> None:
    y = np.array([1.0, 5.0, 2.0])
    assert smooth(Series(_grid(0, 2, 1), y), rounds=0).y.tolist() == [
      1.0,
      5.0,
      2.0,
    ]


class TestFiniteDifference:
  """Central stencils."""

  def test_first_of_quadratic(self) -> None:
    x = _grid(-1, 1, 0.1)
    d = finite_difference(Series(x, x**2), 1)
    np.testing.assert_allclose(d.y, 2 * d.x, atol=1e-10)
    assert len(d) == len(x) - 2

  def test_second_of_quadratic(self) -> None:
    x = _grid(-1, 1, 0.1)
    d = finite_difference(Series(x, 3 * x**2 - x), 2)
    np.testing.assert_allclose(d.y, 6.0, atol=1e-8)

  def test_third_of_cubic(self) -> None:
    x = _grid(-1, 1, 0.05)
    d = finite_difference(Series(x, x**3 + x**2), 3)
    np.testing.assert_allclose(d.y, 6.0, atol=1e-6)
    assert len(d) == len(x) - 4

  def test_second_order_accuracy(self) -> None:
    errors = []
    for step in (0.1, 0.05):
      x = _grid(0, 1, step)
      d = finite_difference(Series(x, np.sin(x)), 1)
      errors.append(float(np.max(np.abs(d.y - np.cos(d.x)))))
    assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.05)

  @pytest.mark.parametrize("order", [1, 2, 3])
  def test_scales_with_affine_map(self, order: int) -> None:
    x = _grid(0, 2, 0.05)
    y = np.exp(x) * np.cos(x)
    plain = finite_difference(Series(x, y), order)
    moved = finite_difference(Series(x, 4.0 * y - 3.0), order)
    np.testing.assert_allclose(moved.y, 4.0 * plain.y, rtol=1e-9, atol=1e-6)

  def test_bad_order(self) -> None:
    with pytest.raises(AnalysisError):
      finite_difference(Series(_grid(0, 1, 0.1), np.zeros(11)), 4)

  def test_too_few_points(self) -> None:
    with pytest.raises(AnalysisError):
      finite_difference(Series(_grid(0, 3, 1), np.zeros(4)), 3)


class TestStepSize:
  """Noise versus truncation error."""

  def test_value(self) -> None:
    assert optimal_step(1e-3, 1.0) == pytest.approx(0.1)

  def test_scaling(self) -> None:
    assert optimal_step(8e-3, 1.0) == pytest.approx(
      2 * optimal_step(1e-3, 1.0)
    )

  def test_minimizes_total_error(self) -> None:
    steps = np.linspace(0.01, 1.0, 2000)
    errors = [total_error(h, 2e-3, -3.0) for h in steps]
    best = float(steps[int(np.argmin(errors))])
    assert best == pytest.approx(optimal_step(2e-3, -3.0), abs=1e-3)

  def test_invalid(self) -> None:
    with pytest.raises(AnalysisError):
      optimal_step(0.0, 1.0)
    with pytest.raises(AnalysisError):
      optimal_step(1e-3, 0.0)


class TestPeaks:
  """Peak location and significance."""

  def test_location(self) -> None:
    x = _grid(0, 1, 0.1)
    assert peak_location(Series(x, -((x - 0.3) ** 2))) == pytest.approx(0.3)

  def test_spike_is_significant(self) -> None:
    x = _grid(0, 2, 0.1)
    y = 0.01 * np.arange(x.size)
    y[10] += 1.0
    assert has_significant_peak(Series(x, y))

  def test_ramp_is_not(self) -> None:
    x = _grid(0, 2, 0.1)
    assert not has_significant_peak(Series(x, 0.01 * np.arange(x.size)))

  def test_short(self) -> None:
    assert not has_significant_peak(Series(np.arange(2.0), np.zeros(2)))


class TestCollapse:
  """Finite-size scaling fits."""

  @staticmethod
  def _curves(critical: float, nu: float) -> dict[int, Series]:
    x = _grid(0.05, 0.17, 0.005)
    return {
      size: Series(x, np.tanh((x - critical) * size ** (1 / nu)))
      for size in (8, 12, 16, 24)
    }

  def test_recovers_parameters(self) -> None:
    fit = data_collapse(self._curves(0.109, 1.5), start=(0.105, 1.4))
    assert fit.critical == pytest.approx(0.109, abs=2e-3)
    assert fit.nu == pytest.approx(1.5, abs=0.15)
    assert fit.n_points >= 5

  def test_score_lowest_at_truth(self) -> None:
    curves = self._curves(0.109, 1.5)
    best, _ = collapse_score(curves, 0.109, 1.5)
    off, _ = collapse_score(curves, 0.125, 1.5)
    assert best < off

  def test_recovers_parameters_from_noisy_curves(self) -> None:
    rng = np.random.default_rng(23)
    x = _grid(0.05, 0.17, 0.0025)
    curves = {
      size: Series(
        x,
        np.tanh((x - 0.109) * size ** (1 / 1.5))
        + 0.01 * rng.normal(size=x.size),
      )
      for size in (8, 12, 16, 24, 32)
    }
    fit = data_collapse(curves, start=(0.105, 1.4))
    assert fit.critical == pytest.approx(0.109, abs=0.005)
    assert fit.nu == pytest.approx(1.5, abs=0.1)

  def test_size_order_does_not_matter(self) -> None:
    curves = self._curves(0.109, 1.5)
    reordered = dict(reversed(list(curves.items())))
    for critical, nu in ((0.109, 1.5), (0.1, 1.2), (0.12, 2.0)):
      a, n_a = collapse_score(curves, critical, nu)
      b, n_b = collapse_score(reordered, critical, nu)
      assert n_a == n_b
      assert a == pytest.approx(b, rel=1e-12)
    first = data_collapse(curves, start=(0.105, 1.4))
    second = data_collapse(reordered, start=(0.105, 1.4))
    assert first.critical == pytest.approx(second.critical, abs=1e-3)
    assert first.nu == pytest.approx(second.nu, abs=1e-2)

  def test_bad_nu(self) -> None:
    score, n = collapse_score(self._curves(0.1, 1.0), 0.1, 0.0)
    assert math.isinf(score)
    assert n == 0

  def test_needs_three_sizes(self) -> None:
    curves = self._curves(0.1, 1.0)
    with pytest.raises(AnalysisError):
      data_collapse({k: curves[k] for k in (8, 12)})


class TestSweepTable:
  """CSV round trips and grouping."""

  @staticmethod
  def _frame() -> pd.DataFrame:
    rows = [
      {"model": "tfim", "param": p, "L": size, "N_s": 100, "s_d": p * size}
      for size in (8, 16)
      for p in (0.3, 0.1, 0.2)
    ]
    return sweep_rows(rows)

  def test_columns_and_nan(self) -> None:
    frame = self._frame()
    assert tuple(frame.columns) == SWEEP_COLUMNS
    assert frame["cid"].isna().all()

  def test_round_trip(self, tmp_path: Path) -> None:
    path = tmp_path / "sweep.csv"
    write_sweep_table(
      self._frame(), path, header=["config abc"], failures=["L=16 p=0.2"]
    )
    lines = path.read_text().splitlines()
    assert lines[0] == "# config abc"
    assert lines[1] == "# failed: L=16 p=0.2"
    assert lines[2] == ",".join(SWEEP_COLUMNS)
    loaded = read_sweep_table(path)
    assert len(loaded) == 6
    assert loaded["s_d"].tolist() == pytest.approx(
      self._frame()["s_d"].tolist()
    )

  def test_wrong_columns(self, tmp_path: Path) -> None:
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(AnalysisError):
      read_sweep_table(path)

  def test_group_series(self) -> None:
    groups = group_series(self._frame(), "s_d")
    assert list(groups) == [("tfim", 8), ("tfim", 16)]
    series = groups[("tfim", 16)]
    np.testing.assert_allclose(series.x, [0.1, 0.2, 0.3])
    np.testing.assert_allclose(series.y, [1.6, 3.2, 4.8])

  def test_group_repeated_param(self) -> None:
    frame = sweep_rows(
      [{"model": "tfim", "param": 0.1, "L": 8, "s_d": v} for v in (1, 2)]
    )
    with pytest.raises(AnalysisError):
      group_series(frame, "s_d")
