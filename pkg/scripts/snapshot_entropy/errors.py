"""Exception hierarchy shared by every module."""

from __future__ import annotations


class SnapshotEntropyError(Exception):
  """Base class for all package errors."""


class GeometryError(SnapshotEntropyError, ValueError):
  """Shapes, indices or geometries do not match."""


class CompressionError(SnapshotEntropyError, ValueError):
  """Empty input or a malformed LZ77 tuple stream."""


class MissingBaselineError(SnapshotEntropyError, LookupError):
  """No shuffle-baseline entry for the requested length."""


class ParameterError(SnapshotEntropyError, ValueError):
  """A model or estimator parameter is out of range."""


class DiagonalizationError(SnapshotEntropyError, RuntimeError):
  """The free-fermion coupling matrix could not be diagonalized."""


class ContractionError(SnapshotEntropyError, RuntimeError):
  """Boundary-MPS compression exceeded the bond-dimension cap."""


class SamplerError(SnapshotEntropyError, RuntimeError):
  """A Markov chain could not continue."""


class EstimatorError(SnapshotEntropyError, ValueError):
  """Not enough (or unusable) samples for an estimate."""


class BudgetExceededError(EstimatorError):
  """The sample-budget search hit its cap without success."""


class AnalysisError(SnapshotEntropyError, ValueError):
  """A sweep series cannot be smoothed, differenced or fitted."""


class CollapseError(AnalysisError):
  """Too few points inside the data-collapse window."""


class ConfigError(SnapshotEntropyError, ValueError):
  """The run configuration is invalid."""
