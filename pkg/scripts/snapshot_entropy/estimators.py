"""Scalar estimates built from snapshot samples."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .born_models import (
  BornModel,
  DeformedParamagnet,
  IsingBornModel,
  NishimoriRBIM,
  Variant,
)
from .errors import (
  BudgetExceededError,
  EstimatorError,
  ParameterError,
  SnapshotEntropyError,
)
from .lattice import (
  BondField,
  ChainGeom,
  DualSquareGeom,
  Snapshot,
  all_snapshots,
  reference_bonds,
  vortex_insertion_path,
)
from .lzcid import ShuffleBaseline, cid
from .sampler import ChainRun, draw_samples, task_seed
from .tn_ising import IsingInstance, spin_correlation

logger = logging.getLogger(__name__)

MAX_CHAIN_ENUMERATION = 12
MAX_GRID_ENUMERATION = 3
REFERENCE_FACTOR = 10
DEFAULT_BUDGET_CAP = 2**14
DEFAULT_VORTEX_EXPONENT = 0.5

Estimator = Literal["direct", "cid"]


@dataclass(frozen=True)
class EntropyEstimate:
  value: float
  standard_error: float
  n_samples: int
  n_sites: int
  estimator: Estimator


@dataclass(frozen=True)
class ComplexityPoint:
  size: int
  n_samples: int
  epsilon: float
  sigma_cid: float


@dataclass(frozen=True)
class DisorderAverage:
  value: float
  standard_error: float
  n_used: int
  n_dropped: int = 0


def jackknife_error(
  values: ArrayLike, blocks: int | None = None
) -> float:
  """Jackknife standard error of the mean.

  Args:
    values: Per-sample values.
    blocks: Number of contiguous leave-one-out blocks; defaults to one
      block per sample.

  Raises:
    EstimatorError: With fewer than two values or blocks.
  """
  data = np.asarray(values, dtype=float).ravel()
  n_blocks = data.size if blocks is None else min(blocks, data.size)
  if n_blocks < 2:
    raise EstimatorError(
      f"jackknife needs at least 2 blocks, got {n_blocks}"
    )
  if np.ptp(data) == 0:
    return 0.0
  # leave-one-out means as offsets from the full mean
  chunks = np.array_split(data - data.mean(), n_blocks)
  sums = np.array([c.sum() for c in chunks])
  counts = np.array([c.size for c in chunks])
  loo = -sums / (data.size - counts)
  spread = np.sum((loo - loo.mean()) ** 2)
  return float(math.sqrt((n_blocks - 1) / n_blocks * spread))


def _estimate(
  values: NDArray[np.float64],
  n_sites: int,
  estimator: Estimator,
  blocks: int | None,
) -> EntropyEstimate:
  if values.size < 2:
    raise EstimatorError(
      f"need at least 2 samples for an estimate, got {values.size}"
    )
  return EntropyEstimate(
    float(values.mean()),
    jackknife_error(values, blocks),
    int(values.size),
    n_sites,
    estimator,
  )


def direct_entropy(
  log_probs: ArrayLike, n_sites: int, blocks: int | None = None
) -> EntropyEstimate:
  """Mean of -log2(rho) per site over samples.

  Raises:
    EstimatorError: With fewer than two samples or a zero-probability
      sample.
  """
  lp = np.asarray(log_probs, dtype=float).ravel()
  if np.any(~np.isfinite(lp)):
    raise EstimatorError("sample with zero or undefined probability")
  return _estimate(-lp / n_sites, n_sites, "direct", blocks)


def cid_entropy(
  snapshots: Sequence[Snapshot],
  baseline: ShuffleBaseline,
  blocks: int | None = None,
) -> EntropyEstimate:
  """Sample mean and standard error of the CID."""
  if not snapshots:
    raise EstimatorError("no snapshots to compress")
  values = np.array([cid(x, baseline) for x in snapshots])
  return _estimate(
    values, snapshots[0].geometry.n_sites, "cid", blocks
  )


def runs_estimates(
  runs: Sequence[ChainRun], baseline: ShuffleBaseline | None = None
) -> tuple[EntropyEstimate, EntropyEstimate | None]:
  """Direct (and optionally CID) estimates with chains as blocks."""
  samples = [s for run in runs for s in run]
  if not samples:
    raise EstimatorError("runs contain no samples")
  n_sites = samples[0].snapshot.geometry.n_sites
  blocks = len(runs) if len(runs) > 1 else None
  direct = direct_entropy([s.log_prob for s in samples], n_sites, blocks)
  if baseline is None:
    return direct, None
  snapshots = [s.snapshot for s in samples]
  return direct, cid_entropy(snapshots, baseline, blocks)


# ── Exact references ────────────────────────────────────────────


def is_enumerable(model: BornModel) -> bool:
  geom = model.geometry
  if isinstance(geom, ChainGeom):
    return geom.length <= MAX_CHAIN_ENUMERATION
  return geom.size <= MAX_GRID_ENUMERATION


def exact_distribution(
  model: BornModel,
) -> tuple[list[Snapshot], NDArray[np.float64]]:
  """Every outcome and its probability.

  Raises:
    EstimatorError: If the model is too large to enumerate.
  """
  if not is_enumerable(model):
    raise EstimatorError(
      f"{model.variant} on {model.geometry} is too large to enumerate"
    )
  outcomes = list(all_snapshots(model.geometry))
  probs = np.exp2([model.log_prob(x) for x in outcomes])
  return outcomes, probs


def exact_entropy_density(model: BornModel) -> float:
  """-sum rho log2 rho / n_sites by enumeration."""
  _, probs = exact_distribution(model)
  nz = probs[probs > 0]
  return float(-np.sum(nz * np.log2(nz)) / model.geometry.n_sites)


def reference_entropy(
  model: BornModel, n_samples: int, seed: int, threads: int = 1
) -> tuple[float, float]:
  """(s_d, error): exact when enumerable, else a large direct run."""
  if is_enumerable(model):
    return exact_entropy_density(model), 0.0
  runs = draw_samples(
    model,
    REFERENCE_FACTOR * n_samples,
    task_seed(seed, 1),
    threads=threads,
  )
  est, _ = runs_estimates(runs)
  return est.value, est.standard_error


# ── Complexity metrics ──────────────────────────────────────────


def epsilon_sigma(
  model: BornModel,
  n_samples: int,
  baseline: ShuffleBaseline,
  *,
  seed: int,
  reference: tuple[float, float] | None = None,
  chains: int = 1,
  threads: int = 1,
) -> ComplexityPoint:
  """|E[CID] - s_d| and the standard error of E[CID] at N_s samples."""
  if reference is None:
    reference = reference_entropy(model, n_samples, seed, threads)
  ref_value, _ = reference
  runs = draw_samples(
    model, n_samples, task_seed(seed, 0), chains=chains, threads=threads
  )
  snapshots = [s.snapshot for run in runs for s in run]
  est = cid_entropy(snapshots, baseline)
  return ComplexityPoint(
    model.geometry.size,
    n_samples,
    abs(est.value - ref_value),
    est.standard_error,
  )


def complexity_measure(
  model: BornModel,
  baseline: ShuffleBaseline,
  *,
  seed: int,
  reference_samples: int = 1000,
  threads: int = 1,
) -> Callable[[int], ComplexityPoint]:
  """epsilon_sigma as a function of N_s, sharing one s_d reference."""
  reference = reference_entropy(model, reference_samples, seed, threads)

  def measure(n_samples: int) -> ComplexityPoint:
    return epsilon_sigma(
      model,
      n_samples,
      baseline,
      seed=task_seed(seed, n_samples),
      reference=reference,
      threads=threads,
    )

  return measure


def sample_budget(
  alpha: float,
  measure: Callable[[int], ComplexityPoint],
  *,
  minimum: int = 2,
  cap: int = DEFAULT_BUDGET_CAP,
) -> int:
  """Smallest doubling N_s with sigma_CID <= alpha * epsilon.

  Raises:
    EstimatorError: If ``alpha`` is not positive.
    BudgetExceededError: If no N_s up to ``cap`` qualifies.
  """
  if not alpha > 0:
    raise EstimatorError(f"alpha must be positive, got {alpha}")
  n = minimum
  while n <= cap:
    if math.isinf(alpha):
      return n
    point = measure(n)
    logger.debug(
      "N_s=%d: sigma=%.4g eps=%.4g", n, point.sigma_cid, point.epsilon
    )
    if point.sigma_cid <= alpha * point.epsilon:
      return n
    n *= 2
  raise BudgetExceededError(
    f"sigma_CID > {alpha} * epsilon for every N_s up to {cap}"
  )


def gamma_subleading(s_at_l: float, s_at_2l: float, size: int) -> float:
  """2L (s_d(2L) - s_d(L))."""
  return 2.0 * size * (s_at_2l - s_at_l)


# ── Disorder averages ───────────────────────────────────────────


def ensemble_model(
  model: IsingBornModel, weight_power: int | None = None
) -> IsingBornModel:
  """Model whose Born weight is |Z|^weight_power at the same beta.

  Weight 1 for a deformed paramagnet at q is the Nishimori ensemble at
  p = q; weight 2 for a Nishimori model at p is the deformed paramagnet
  at q = p.

  Raises:
    ParameterError: If the requested weight has no real ensemble.
  """
  if weight_power is None or weight_power == model.weight_power:
    return model
  common = {"tol": model.tol, "bond_cap": model.bond_cap}
  if isinstance(model, DeformedParamagnet) and weight_power == 1:
    if model.q < 0:
      raise ParameterError("linear weight needs q >= 0")
    return NishimoriRBIM(model.geometry, p=model.q, **common)
  if isinstance(model, NishimoriRBIM) and weight_power == 2:
    if model.p >= 0.5:
      raise ParameterError("squared weight needs p < 0.5")
    return DeformedParamagnet(model.geometry, q=model.p, **common)
  raise ParameterError(
    f"{model.variant} has no ensemble with weight |Z|^{weight_power}"
  )


def _frozen_limit(model: IsingBornModel) -> bool:
  return (isinstance(model, NishimoriRBIM) and model.p == 0.0) or (
    isinstance(model, DeformedParamagnet) and model.q == 0.0
  )


def _disorder_bonds(
  model: IsingBornModel, n_samples: int, seed: int, threads: int
) -> list[BondField]:
  if isinstance(model, NishimoriRBIM):
    streams = np.random.SeedSequence([seed, 2]).spawn(n_samples)
    return [
      model.sample_bonds(np.random.default_rng(s)) for s in streams
    ]
  runs = draw_samples(model, n_samples, seed, threads=threads)
  return [reference_bonds(s.snapshot) for run in runs for s in run]


def _average(
  results: Sequence[float | None], what: str
) -> DisorderAverage:
  kept = np.array([r for r in results if r is not None], dtype=float)
  dropped = len(results) - kept.size
  if dropped:
    logger.warning("%s: dropped %d failed samples", what, dropped)
  if kept.size < 2:
    raise EstimatorError(f"{what}: fewer than 2 usable samples")
  return DisorderAverage(
    float(kept.mean()), jackknife_error(kept), int(kept.size), dropped
  )


def vortex_free_energy(
  model: IsingBornModel,
  n_samples: int,
  *,
  seed: int,
  exponent: float = DEFAULT_VORTEX_EXPONENT,
  weight_power: int | None = None,
  threads: int = 1,
) -> DisorderAverage:
  """Average of |Z_{J,l} / Z_J|^exponent over the disorder ensemble.

  The vortex is inserted at the central plaquette. The ensemble is the
  model's own Born weight unless ``weight_power`` selects another (see
  :func:`ensemble_model`). Samples whose contraction fails are dropped
  and counted.

  Args:
    model: A 2D model.
    n_samples: Disorder samples to draw.
    seed: Master seed.
    exponent: Power applied to the partition-function ratio.
    weight_power: Ensemble weight |Z|^weight_power.
    threads: Worker threads for the contractions.
  """
  sampled = ensemble_model(model, weight_power)
  if _frozen_limit(sampled):
    return DisorderAverage(0.0, 0.0, n_samples)
  geom: DualSquareGeom = model.geometry
  path = vortex_insertion_path(geom, geom.center)
  bonds = _disorder_bonds(sampled, n_samples, seed, threads)

  def ratio(b: BondField) -> float | None:
    try:
      base = model.log_abs_partition(b)
      moved = model.log_abs_partition(b.flipped(path))
    except SnapshotEntropyError as exc:
      logger.debug("vortex sample failed: %s", exc)
      return None
    if base == -math.inf:
      return None
    return math.exp(exponent * (moved - base))

  with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
    results = list(pool.map(ratio, bonds))
  return _average(results, "vortex free energy")


def exact_vortex_free_energy(
  model: IsingBornModel, exponent: float = DEFAULT_VORTEX_EXPONENT
) -> float:
  """sum_x rho_x |Z_{x+l} / Z_x|^exponent by enumeration.

  With the Nishimori weight and exponent 1/2 this is
  sum_x sqrt(rho_x rho_{x+l}).
  """
  if _frozen_limit(model):
    return 0.0
  geom: DualSquareGeom = model.geometry
  outcomes, probs = exact_distribution(model)
  total = 0.0
  for x, rho in zip(outcomes, probs):
    if rho == 0.0:
      continue
    base = model.log_abs_partition(reference_bonds(x))
    moved = model.log_abs_partition(
      reference_bonds(x.flipped([geom.center]))
    )
    total += rho * math.exp(exponent * (moved - base))
  return total


def correlation_sites(geom: DualSquareGeom) -> tuple[int, int]:
  """Dual spins (0, L) and (L//2, L//2)."""
  half = geom.size // 2
  return geom.spin_index(0, geom.size), geom.spin_index(half, half)


def correlation_disorder_avg(
  model: NishimoriRBIM,
  n_samples: int,
  *,
  seed: int,
  threads: int = 1,
) -> DisorderAverage:
  """[<s_i s_j>] over direct Nishimori bond samples."""
  if model.variant is not Variant.NISHIMORI:
    raise ParameterError("correlation average needs the Nishimori model")
  if model.p == 0.0:
    return DisorderAverage(1.0, 0.0, n_samples)
  geom = model.geometry
  i, j = correlation_sites(geom)
  bonds = _disorder_bonds(model, n_samples, seed, threads)

  def correlate(b: BondField) -> float | None:
    try:
      return spin_correlation(
        IsingInstance(geom, b, model.beta),
        i,
        j,
        model.tol,
        model.bond_cap,
      )
    except SnapshotEntropyError as exc:
      logger.debug("correlation sample failed: %s", exc)
      return None

  with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
    results = list(pool.map(correlate, bonds))
  return _average(results, "spin correlation")

