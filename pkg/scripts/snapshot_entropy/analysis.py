"""Sweep post-processing: smoothing, derivatives and data collapse."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy.optimize import minimize

from .errors import AnalysisError, CollapseError

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = (
  "model",
  "param",
  "L",
  "N_s",
  "s_d",
  "s_d_err",
  "cid",
  "cid_err",
  "obs",
  "obs_err",
)
DEFAULT_SMOOTHING_ROUNDS = 3
DEFAULT_WINDOW = (-0.4, 0.4)
MIN_WINDOW_POINTS = 5
SPACING_RTOL = 1e-6
# score returned for a (p_c, nu) trial with too few points in the window
_DEGENERATE_SCORE = 1e6

# central stencils of second-order accuracy, offsets -2..2
_STENCILS: dict[int, NDArray[np.float64]] = {
  1: np.array([0.0, -0.5, 0.0, 0.5, 0.0]),
  2: np.array([0.0, 1.0, -2.0, 1.0, 0.0]),
  3: np.array([-0.5, 1.0, 0.0, -1.0, 0.5]),
}
_STENCIL_REACH = {1: 1, 2: 1, 3: 2}


@dataclass(frozen=True, eq=False)
class Series:
  """y sampled on a uniformly spaced, increasing x grid."""

  x: NDArray[np.float64]
  y: NDArray[np.float64]

  def __post_init__(self) -> None:
    x = np.asarray(self.x, dtype=float).ravel()
    y = np.asarray(self.y, dtype=float).ravel()
    if x.size != y.size:
      raise AnalysisError(f"x has {x.size} points but y has {y.size}")
    object.__setattr__(self, "x", x)
    object.__setattr__(self, "y", y)

  def __len__(self) -> int:
    return int(self.x.size)

  @property
  def spacing(self) -> float:
    """Grid step; raises unless the grid is uniform and increasing."""
    if self.x.size < 2:
      raise AnalysisError("a single point has no spacing")
    steps = np.diff(self.x)
    step = float(steps.mean())
    if step <= 0 or not np.allclose(
      steps, step, rtol=SPACING_RTOL, atol=0.0
    ):
      raise AnalysisError("parameter grid is not uniformly increasing")
    return step


def smooth(series: Series, rounds: int = DEFAULT_SMOOTHING_ROUNDS) -> Series:
  """Repeated three-point mean; each round drops one point per side.

  Raises:
    AnalysisError: If the series has fewer than 2 * rounds + 1 points.
  """
  if rounds < 0:
    raise AnalysisError(f"rounds must be >= 0, got {rounds}")
  if len(series) < 2 * rounds + 1:
    raise AnalysisError(
      f"{len(series)} points cannot take {rounds} smoothing rounds"
    )
  if rounds and len(series) > 1:
    _ = series.spacing
  y = series.y
  for _ in range(rounds):
    y = (y[:-2] + y[1:-1] + y[2:]) / 3.0
  return Series(series.x[rounds : len(series) - rounds], y)


def finite_difference(series: Series, order: int) -> Series:
  """Central difference of the given order (1, 2 or 3).

  Raises:
    AnalysisError: On an unsupported order, a non-uniform grid or too
      few points for the stencil.
  """
  if order not in _STENCILS:
    raise AnalysisError(f"derivative order must be 1, 2 or 3: {order}")
  step = series.spacing
  reach = _STENCIL_REACH[order]
  n = len(series)
  if n < 2 * reach + 1:
    raise AnalysisError(
      f"order-{order} stencil needs {2 * reach + 1} points, got {n}"
    )
  weights = _STENCILS[order][2 - reach : 3 + reach]
  windows = np.lib.stride_tricks.sliding_window_view(
    series.y, 2 * reach + 1
  )
  values = windows @ weights / step**order
  return Series(series.x[reach : n - reach], values)


def total_error(step: float, epsilon: float, s3: float) -> float:
  """epsilon/step + |s3| step^2 / 2, the first-derivative error model."""
  return epsilon / step + 0.5 * abs(s3) * step * step


def optimal_step(epsilon: float, s3: float) -> float:
  """(epsilon / |s3|)^(1/3), the minimizer of :func:`total_error`.

  Raises:
    AnalysisError: If either input is not positive.
  """
  if not (epsilon > 0 and abs(s3) > 0):
    raise AnalysisError(
      f"need epsilon > 0 and |s3| > 0, got {epsilon}, {s3}"
    )
  return float((epsilon / abs(s3)) ** (1.0 / 3.0))


def peak_location(series: Series) -> float:
  """x at the maximum of y."""
  if not len(series):
    raise AnalysisError("empty series has no peak")
  return float(series.x[int(np.argmax(series.y))])


def has_significant_peak(
  series: Series, n_sigma: float = 3.0, window: int = 7
) -> bool:
  """Whether any point stands n_sigma above its local noise band.

  The band around point k is the median and scaled MAD of the other
  points in a centred window.
  """
  y = series.y
  half = window // 2
  if y.size < 3:
    return False
  for k in range(y.size):
    lo, hi = max(0, k - half), min(y.size, k + half + 1)
    others = np.delete(y[lo:hi], k - lo)
    center = float(np.median(others))
    spread = 1.4826 * float(np.median(np.abs(others - center)))
    if spread == 0.0:
      spread = float(np.std(others))
    if spread > 0 and y[k] - center > n_sigma * spread:
      return True
  return False


# ── Data collapse ───────────────────────────────────────────────


@dataclass(frozen=True)
class CollapseFit:
  critical: float
  nu: float
  score: float
  window: tuple[float, float]
  n_points: int


def collapse_score(
  curves: Mapping[int, Series],
  critical: float,
  nu: float,
  window: tuple[float, float] = DEFAULT_WINDOW,
) -> tuple[float, int]:
  """Mean squared distance to the other sizes' interpolated curves.

  Every point inside the u window is compared with the mean of the
  linear interpolants of the other sizes that cover its u. The result
  is normalized by the variance of y in the window.

  Returns:
    (score, number of points that contributed).
  """
  if nu <= 0:
    return math.inf, 0
  scaled = {
    size: ((s.x - critical) * size ** (1.0 / nu), s.y)
    for size, s in curves.items()
  }
  lo, hi = window
  residuals: list[float] = []
  in_window: list[float] = []
  for size, (u, y) in scaled.items():
    mask = (u >= lo) & (u <= hi)
    for uk, yk in zip(u[mask], y[mask]):
      refs = [
        float(np.interp(uk, uo, yo))
        for other, (uo, yo) in scaled.items()
        if other != size and uo[0] <= uk <= uo[-1]
      ]
      in_window.append(float(yk))
      if refs:
        residuals.append(float(yk) - float(np.mean(refs)))
  if len(residuals) < MIN_WINDOW_POINTS:
    return math.inf, len(residuals)
  spread = float(np.var(in_window))
  mse = float(np.mean(np.square(residuals)))
  return (mse / spread if spread > 0 else mse), len(residuals)


def data_collapse(
  curves: Mapping[int, Series],
  window: tuple[float, float] = DEFAULT_WINDOW,
  start: tuple[float, float] = (0.1, 1.5),
) -> CollapseFit:
  """Fit (critical value, nu) by Nelder-Mead on the collapse score.

  Args:
    curves: Observable versus parameter for each system size.
    window: Interval of u = (p - p_c) L^(1/nu) that is scored.
    start: Initial (p_c, nu).

  Raises:
    AnalysisError: With fewer than three sizes.
    CollapseError: If the best fit has fewer than 5 points in window.
  """
  if len(curves) < 3:
    raise AnalysisError(f"collapse needs >= 3 sizes, got {len(curves)}")

  def objective(params: NDArray[np.float64]) -> float:
    score, _ = collapse_score(curves, params[0], params[1], window)
    return _DEGENERATE_SCORE if math.isinf(score) else score

  result = minimize(
    objective,
    np.asarray(start, dtype=float),
    method="Nelder-Mead",
    options={"xatol": 1e-5, "fatol": 1e-10, "maxiter": 4000},
  )
  critical, nu = (float(v) for v in result.x)
  score, n_points = collapse_score(curves, critical, nu, window)
  if n_points < MIN_WINDOW_POINTS:
    raise CollapseError(
      f"only {n_points} points inside window {window} at "
      f"p_c={critical:.4f}, nu={nu:.3f}"
    )
  logger.info(
    "collapse: p_c=%.4f nu=%.3f score=%.3g (%d points)",
    critical,
    nu,
    score,
    n_points,
  )
  return CollapseFit(critical, nu, score, window, n_points)


# ── SweepTable I/O ──────────────────────────────────────────────


def sweep_rows(rows: Iterable[Mapping[str, object]]) -> pd.DataFrame:
  """DataFrame in canonical column order; missing values become NaN."""
  return pd.DataFrame(list(rows), columns=list(SWEEP_COLUMNS))


def write_sweep_table(
  frame: pd.DataFrame,
  path: Path,
  header: Iterable[str] = (),
  failures: Iterable[str] = (),
) -> None:
  """CSV with '#' comment lines before the column header."""
  lines = [f"# {h}" for h in header]
  lines += [f"# failed: {f}" for f in failures]
  body = frame.loc[:, list(SWEEP_COLUMNS)].to_csv(
    index=False, float_format="%.10g", lineterminator="\n"
  )
  path.write_text("".join(f"{line}\n" for line in lines) + body)


def read_sweep_table(path: Path) -> pd.DataFrame:
  """Load a SweepTable CSV, skipping comment lines.

  Raises:
    AnalysisError: If the header does not name the expected columns.
  """
  frame = pd.read_csv(path, comment="#")
  if tuple(frame.columns) != SWEEP_COLUMNS:
    raise AnalysisError(
      f"{path}: columns {list(frame.columns)} != {list(SWEEP_COLUMNS)}"
    )
  return frame


def group_series(
  frame: pd.DataFrame, column: str
) -> dict[tuple[str, int], Series]:
  """One Series per (model, L), sorted by parameter.

  Raises:
    AnalysisError: If a group repeats a parameter value.
  """
  out: dict[tuple[str, int], Series] = {}
  for (model, size), group in frame.groupby(["model", "L"], sort=True):
    group = group.sort_values("param")
    if group["param"].duplicated().any():
      raise AnalysisError(f"{model} L={size}: repeated parameter values")
    out[(str(model), int(size))] = Series(
      group["param"].to_numpy(dtype=float),
      group[column].to_numpy(dtype=float),
    )
  return out
