"""Metropolis-Hastings chains over snapshots.

A chain starts from the all-ones snapshot, runs ``thermalization``
single steps, then keeps one sample every ``thinning`` steps. Each step
proposes either a bond-pair flip (two neighbouring sites, parity
preserving) or a single-site flip and accepts with
min(1, rho_proposed / rho_current).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from .born_models import BornModel, NishimoriRBIM, Variant
from .errors import SamplerError, SnapshotEntropyError
from .lattice import Snapshot

logger = logging.getLogger(__name__)

THERMALIZATION_FACTOR = 5


def chain_rng(seed: int, *key: int) -> np.random.Generator:
  """Generator for one chain, derived from (seed, *key) only."""
  return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def default_mix(model: BornModel) -> tuple[float, float]:
  """(bond-pair weight, single-site weight) for a model."""
  if model.variant is Variant.TFIM:
    return 1.0, 0.0
  return 0.5, 0.5


@dataclass(frozen=True)
class ChainConfig:
  model: BornModel
  seed: int
  n_samples: int
  chain_index: int = 0
  pair_weight: float | None = None
  site_weight: float | None = None
  thermalization: int | None = None
  thinning: int | None = None

  def __post_init__(self) -> None:
    pair, site = self.mix
    if pair < 0 or site < 0 or pair + site <= 0:
      raise SamplerError(
        f"proposal weights must be >= 0 and not both 0: {pair}, {site}"
      )
    if self.n_samples < 0:
      raise SamplerError(f"n_samples must be >= 0, got {self.n_samples}")
    if self.steps_between < 1:
      raise SamplerError(f"thinning must be >= 1, got {self.thinning}")
    if self.burn_in < 0:
      raise SamplerError(
        f"thermalization must be >= 0, got {self.thermalization}"
      )

  @property
  def n_sites(self) -> int:
    return self.model.geometry.n_sites

  @property
  def mix(self) -> tuple[float, float]:
    """Normalized (pair, site) proposal probabilities."""
    pair, site = default_mix(self.model)
    if self.pair_weight is not None or self.site_weight is not None:
      pair = self.pair_weight or 0.0
      site = self.site_weight or 0.0
    total = pair + site
    return (pair / total, site / total) if total > 0 else (pair, site)

  @property
  def burn_in(self) -> int:
    if self.thermalization is None:
      return THERMALIZATION_FACTOR * self.n_sites
    return self.thermalization

  @property
  def steps_between(self) -> int:
    return self.n_sites if self.thinning is None else self.thinning


@dataclass(frozen=True)
class ChainState:
  snapshot: Snapshot
  log_prob: float
  accepted: int = 0
  proposed: int = 0

  @property
  def acceptance_rate(self) -> float:
    return self.accepted / self.proposed if self.proposed else 0.0


class Sample(NamedTuple):
  snapshot: Snapshot
  log_prob: float


@dataclass
class ChainRun:
  """Kept samples of one chain plus its final counters."""

  chain_index: int
  samples: list[Sample] = field(default_factory=list)
  accepted: int = 0
  proposed: int = 0

  def __iter__(self) -> Iterator[Sample]:
    return iter(self.samples)

  def __len__(self) -> int:
    return len(self.samples)

  @property
  def acceptance_rate(self) -> float:
    return self.accepted / self.proposed if self.proposed else 0.0


def acceptance_probability(current: float, proposed: float) -> float:
  """min(1, 2^(proposed - current)) for log2 probabilities."""
  if proposed == -math.inf:
    return 0.0
  if current == -math.inf or proposed >= current:
    return 1.0
  return float(2.0 ** (proposed - current))


def _bonds(cfg: ChainConfig) -> NDArray[np.intp]:
  return cfg.model.geometry.bonds()


def enumerate_proposals(
  values: NDArray[np.int8], cfg: ChainConfig
) -> list[tuple[float, NDArray[np.int8]]]:
  """Every proposal from ``values`` with its probability."""
  pair, site = cfg.mix
  moves: list[tuple[float, NDArray[np.int8]]] = []
  bonds = _bonds(cfg)
  if pair > 0:
    for a, b in bonds:
      new = values.copy()
      new[[a, b]] *= -1
      moves.append((pair / len(bonds), new))
  if site > 0:
    for s in range(values.size):
      new = values.copy()
      new[s] *= -1
      moves.append((site / values.size, new))
  return moves


def initial_state(model: BornModel) -> ChainState:
  start = Snapshot.ones(model.geometry)
  log_prob = model.log_prob(start)
  if log_prob == -math.inf:
    raise SamplerError("all-ones start has zero probability")
  return ChainState(start, log_prob)


def step(
  state: ChainState,
  cfg: ChainConfig,
  rng: np.random.Generator,
  bonds: NDArray[np.intp] | None = None,
) -> ChainState:
  """One Metropolis-Hastings update.

  Raises:
    SamplerError: If the model fails on the proposed snapshot.
  """
  pair, _ = cfg.mix
  if bonds is None:
    bonds = _bonds(cfg)
  if rng.random() < pair:
    a, b = bonds[rng.integers(len(bonds))]
    sites: list[int] = [int(a), int(b)]
  else:
    sites = [int(rng.integers(state.snapshot.values.size))]
  candidate = state.snapshot.flipped(sites)
  try:
    log_prob = cfg.model.log_prob(candidate)
  except SnapshotEntropyError as exc:
    raise SamplerError(
      f"chain {cfg.chain_index}: log_prob failed after "
      f"{state.proposed} proposals: {exc}"
    ) from exc
  u = rng.random()
  proposed = state.proposed + 1
  if u < acceptance_probability(state.log_prob, log_prob):
    return ChainState(candidate, log_prob, state.accepted + 1, proposed)
  return replace(state, proposed=proposed)


def run_chain(cfg: ChainConfig) -> ChainRun:
  """Thermalize, then keep ``n_samples`` thinned samples.

  The stream depends only on (seed, chain_index).
  """
  rng = chain_rng(cfg.seed, cfg.chain_index)
  bonds = _bonds(cfg)
  state = initial_state(cfg.model)
  for _ in range(cfg.burn_in):
    state = step(state, cfg, rng, bonds)
  run = ChainRun(cfg.chain_index)
  for _ in range(cfg.n_samples):
    for _ in range(cfg.steps_between):
      state = step(state, cfg, rng, bonds)
    run.samples.append(Sample(state.snapshot, state.log_prob))
  run.accepted, run.proposed = state.accepted, state.proposed
  logger.debug(
    "chain %d: %d samples, acceptance %.3f",
    cfg.chain_index,
    len(run),
    run.acceptance_rate,
  )
  return run


def run_chains(
  configs: Sequence[ChainConfig], threads: int = 1
) -> list[ChainRun]:
  """Run independent chains; results follow the input order."""
  with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
    return list(pool.map(run_chain, configs))


def direct_samples(
  model: NishimoriRBIM, n_samples: int, rng: np.random.Generator
) -> ChainRun:
  """Exact Nishimori samples wrapped as a chain run."""
  run = ChainRun(0)
  for _ in range(n_samples):
    x, _ = model.direct_sample(rng)
    run.samples.append(Sample(x, model.log_prob(x)))
  return run


def task_seed(seed: int, *key: int) -> int:
  """Deterministic sub-seed for one (parameter, size, ...) task."""
  state = np.random.SeedSequence([seed, *key]).generate_state(1)
  return int(state[0])


def draw_samples(
  model: BornModel,
  n_samples: int,
  seed: int,
  *,
  chains: int = 1,
  threads: int = 1,
  pair_weight: float | None = None,
  site_weight: float | None = None,
  thermalization: int | None = None,
  thinning: int | None = None,
) -> list[ChainRun]:
  """Samples from a model: direct for Nishimori, chains otherwise.

  ``n_samples`` is split across ``chains`` as evenly as possible, the
  first chains taking the remainder.
  """
  if isinstance(model, NishimoriRBIM):
    return [direct_samples(model, n_samples, chain_rng(seed, 0))]
  chains = max(1, min(chains, max(n_samples, 1)))
  base, extra = divmod(n_samples, chains)
  configs = [
    ChainConfig(
      model,
      seed,
      base + (1 if k < extra else 0),
      chain_index=k,
      pair_weight=pair_weight,
      site_weight=site_weight,
      thermalization=thermalization,
      thinning=thinning,
    )
    for k in range(chains)
  ]
  return run_chains(configs, threads)
