"""Chain and dual-square-lattice geometry, snapshots and bond fields.

The 2D layout is an L x L grid of vortex sites (plaquettes) sitting on
an (L+1) x (L+1) grid of dual spins with open boundaries. Spins are
indexed row-major from the top-left, ``r * (L+1) + c``. Edges come in
two blocks: horizontal edges ``h(r, c)`` joining spins (r, c) and
(r, c+1), index ``r * L + c``; then vertical edges ``v(r, c)`` joining
(r, c) and (r+1, c), index ``(L+1) * L + r * (L+1) + c``.

Plaquette (i, j) is bounded by h(i, j), h(i+1, j), v(i, j) and
v(i, j+1), so every plaquette has four edges, including those on the
boundary, and every vortex pattern is reachable from some bond field.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import GeometryError

Boundary = Literal["open", "periodic"]

ZERO_CHAR = "0"  # -1
ONE_CHAR = "1"  # +1


@dataclass(frozen=True)
class ChainGeom:
  """A 1D chain of ``length`` spins."""

  length: int
  boundary: Boundary = "open"

  def __post_init__(self) -> None:
    if self.length < 2:
      raise GeometryError(
        f"chain length must be at least 2, got {self.length}"
      )
    if self.boundary not in ("open", "periodic"):
      raise GeometryError(f"unknown boundary {self.boundary!r}")

  @property
  def n_sites(self) -> int:
    return self.length

  @property
  def shape(self) -> tuple[int, ...]:
    return (self.length,)

  @property
  def size(self) -> int:
    return self.length

  def bonds(self) -> NDArray[np.intp]:
    """Nearest-neighbour site pairs, shape (n_bonds, 2)."""
    left = np.arange(self.length - 1)
    pairs = np.stack([left, left + 1], axis=1)
    if self.boundary == "periodic" and self.length > 2:
      pairs = np.vstack([pairs, [[self.length - 1, 0]]])
    return pairs.astype(np.intp)


@dataclass(frozen=True)
class DualSquareGeom:
  """L x L vortex grid on an (L+1) x (L+1) open dual lattice."""

  size: int

  def __post_init__(self) -> None:
    if self.size < 1:
      raise GeometryError(
        f"vortex grid size must be at least 1, got {self.size}"
      )

  @property
  def n_sites(self) -> int:
    return self.size * self.size

  @property
  def shape(self) -> tuple[int, ...]:
    return (self.size, self.size)

  @property
  def side(self) -> int:
    """Dual spins per side."""
    return self.size + 1

  @property
  def n_spins(self) -> int:
    return self.side * self.side

  @property
  def n_horizontal(self) -> int:
    return self.side * self.size

  @property
  def n_edges(self) -> int:
    return 2 * self.size * self.side

  def spin_index(self, row: int, col: int) -> int:
    if not (0 <= row <= self.size and 0 <= col <= self.size):
      raise GeometryError(f"dual spin ({row}, {col}) out of range")
    return row * self.side + col

  def plaquette_index(self, row: int, col: int) -> int:
    if not (0 <= row < self.size and 0 <= col < self.size):
      raise GeometryError(f"plaquette ({row}, {col}) out of range")
    return row * self.size + col

  def horizontal_edge(self, row: int, col: int) -> int:
    return row * self.size + col

  def vertical_edge(self, row: int, col: int) -> int:
    return self.n_horizontal + row * self.side + col

  @property
  def center(self) -> int:
    """Plaquette index of (L//2, L//2)."""
    half = self.size // 2
    return self.plaquette_index(half, half)

  @cached_property
  def edges(self) -> NDArray[np.intp]:
    """Spin endpoints of every edge, shape (n_edges, 2)."""
    n, s = self.size, self.side
    rows, cols = np.meshgrid(
      np.arange(s), np.arange(n), indexing="ij"
    )
    left = (rows * s + cols).ravel()
    horizontal = np.stack([left, left + 1], axis=1)
    rows, cols = np.meshgrid(
      np.arange(n), np.arange(s), indexing="ij"
    )
    top = (rows * s + cols).ravel()
    vertical = np.stack([top, top + s], axis=1)
    return np.vstack([horizontal, vertical]).astype(np.intp)

  @cached_property
  def plaquette_edges(self) -> NDArray[np.intp]:
    """Edges around each plaquette (top, bottom, left, right)."""
    n, s = self.size, self.side
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    i, j = i.ravel(), j.ravel()
    top = i * n + j
    left = self.n_horizontal + i * s + j
    return np.stack(
      [top, top + n, left, left + 1], axis=1
    ).astype(np.intp)

  def bonds(self) -> NDArray[np.intp]:
    """Edge-sharing plaquette pairs, shape (n_bonds, 2)."""
    n = self.size
    grid = np.arange(n * n).reshape(n, n)
    across = np.stack(
      [grid[:, :-1].ravel(), grid[:, 1:].ravel()], axis=1
    )
    down = np.stack(
      [grid[:-1, :].ravel(), grid[1:, :].ravel()], axis=1
    )
    return np.vstack([across, down]).astype(np.intp)


Geometry = ChainGeom | DualSquareGeom


def _as_spins(
  values: ArrayLike, expected: int, what: str
) -> NDArray[np.int8]:
  arr = np.array(values, dtype=np.int8).ravel()
  if arr.size != expected:
    raise GeometryError(
      f"{what} has {arr.size} values, geometry expects {expected}"
    )
  if not np.all((arr == 1) | (arr == -1)):
    raise GeometryError(f"{what} values must be +1 or -1")
  arr.flags.writeable = False
  return arr


@dataclass(frozen=True, eq=False)
class Snapshot:
  """One measurement outcome: a +-1 value per site, row-major."""

  geometry: Geometry
  values: NDArray[np.int8]

  def __post_init__(self) -> None:
    object.__setattr__(
      self,
      "values",
      _as_spins(self.values, self.geometry.n_sites, "snapshot"),
    )

  @classmethod
  def ones(cls, geometry: Geometry) -> Snapshot:
    return cls(geometry, np.ones(geometry.n_sites, dtype=np.int8))

  def raster(self) -> NDArray[np.int8]:
    return self.values

  def grid(self) -> NDArray[np.int8]:
    return self.values.reshape(self.geometry.shape)

  def parity(self) -> int:
    return int(np.prod(self.values, dtype=np.int64))

  def flipped(self, sites: ArrayLike) -> Snapshot:
    """Copy with the given sites negated."""
    values = self.values.copy()
    values[np.asarray(sites, dtype=np.intp)] *= -1
    return Snapshot(self.geometry, values)

  def __eq__(self, other: object) -> bool:
    if not isinstance(other, Snapshot):
      return NotImplemented
    return self.geometry == other.geometry and bool(
      np.array_equal(self.values, other.values)
    )

  def __hash__(self) -> int:
    return hash((self.geometry, self.values.tobytes()))


@dataclass(frozen=True, eq=False)
class BondField:
  """A +-1 coupling on every edge of a dual square lattice."""

  geometry: DualSquareGeom
  values: NDArray[np.int8]

  def __post_init__(self) -> None:
    if not isinstance(self.geometry, DualSquareGeom):
      raise GeometryError("bond fields live on a DualSquareGeom")
    object.__setattr__(
      self,
      "values",
      _as_spins(self.values, self.geometry.n_edges, "bond field"),
    )

  @classmethod
  def ones(cls, geometry: DualSquareGeom) -> BondField:
    return cls(geometry, np.ones(geometry.n_edges, dtype=np.int8))

  def flipped(self, edges: ArrayLike) -> BondField:
    """Copy with the given edges negated (b XOR path)."""
    values = self.values.copy()
    values[np.asarray(edges, dtype=np.intp)] *= -1
    return BondField(self.geometry, values)

  def __eq__(self, other: object) -> bool:
    if not isinstance(other, BondField):
      return NotImplemented
    return self.geometry == other.geometry and bool(
      np.array_equal(self.values, other.values)
    )

  def __hash__(self) -> int:
    return hash((self.geometry, self.values.tobytes()))


# ── Vortex / bond conversions ───────────────────────────────────


def vortex_of_bonds(bonds: BondField) -> Snapshot:
  """Plaquette products of a bond field.

  Args:
    bonds: Couplings on a dual square lattice.

  Returns:
    Snapshot with x_j = product of the four bonds around plaquette j.

  Raises:
    GeometryError: If ``bonds`` is not defined on a DualSquareGeom.
  """
  geom = bonds.geometry
  if not isinstance(geom, DualSquareGeom):
    raise GeometryError("vortex_of_bonds needs a DualSquareGeom")
  products = np.prod(bonds.values[geom.plaquette_edges], axis=1)
  return Snapshot(geom, products.astype(np.int8))


def reference_bonds(x: Snapshot) -> BondField:
  """Canonical bond field whose vortex pattern is ``x``.

  Each vortex flips the horizontal edges straight below it down to the
  bottom boundary. Edge h(k, j) is therefore flipped once per vortex
  in column j above row k.

  Raises:
    GeometryError: If ``x`` does not live on a DualSquareGeom.
  """
  geom = x.geometry
  if not isinstance(geom, DualSquareGeom):
    raise GeometryError("reference_bonds needs a DualSquareGeom")
  defects = (x.grid() == -1).astype(np.int64)
  odd = np.cumsum(defects, axis=0) % 2
  values = np.ones(geom.n_edges, dtype=np.int8)
  # rows 1..L of the horizontal block
  values[geom.size : geom.n_horizontal] = (1 - 2 * odd).ravel()
  return BondField(geom, values)


def gauge_transform(
  bonds: BondField, sigma: ArrayLike
) -> BondField:
  """Multiply every bond by the product of its endpoint spins.

  Args:
    bonds: Bond field to transform.
    sigma: One +-1 per dual spin, row-major.

  Raises:
    GeometryError: If ``sigma`` does not have one value per dual spin.
  """
  geom = bonds.geometry
  spins = _as_spins(sigma, geom.n_spins, "gauge field")
  ends = geom.edges
  factor = spins[ends[:, 0]] * spins[ends[:, 1]]
  return BondField(geom, bonds.values * factor)


def vortex_insertion_path(
  geom: DualSquareGeom, plaquette: int
) -> NDArray[np.intp]:
  """Edges from a plaquette straight down to the bottom boundary.

  Flipping them toggles the vortex at ``plaquette`` and nothing else.

  Raises:
    GeometryError: If ``plaquette`` is not a vortex site.
  """
  if not 0 <= plaquette < geom.n_sites:
    raise GeometryError(
      f"plaquette {plaquette} outside 0..{geom.n_sites - 1}"
    )
  row, col = divmod(plaquette, geom.size)
  rows = np.arange(row + 1, geom.size + 1)
  return (rows * geom.size + col).astype(np.intp)


def all_snapshots(geometry: Geometry) -> Iterator[Snapshot]:
  """Every +-1 configuration of the geometry's sites."""
  for combo in itertools.product((1, -1), repeat=geometry.n_sites):
    yield Snapshot(geometry, np.array(combo, dtype=np.int8))


# ── Text format ─────────────────────────────────────────────────


def format_snapshot(x: Snapshot) -> str:
  """Rows of '0' (-1) and '1' (+1), newline separated."""
  rows = np.atleast_2d(x.grid())
  return "\n".join(
    "".join(ONE_CHAR if v > 0 else ZERO_CHAR for v in row)
    for row in rows
  )


def format_snapshots(snapshots: Iterable[Snapshot]) -> str:
  blocks = [format_snapshot(x) for x in snapshots]
  return "\n\n".join(blocks) + ("\n" if blocks else "")


def parse_snapshots(text: str, geometry: Geometry) -> list[Snapshot]:
  """Inverse of :func:`format_snapshots`; '#' lines are skipped.

  Raises:
    GeometryError: On a block whose shape or characters do not fit.
  """
  lines = [
    line.strip()
    for line in text.splitlines()
    if not line.lstrip().startswith("#")
  ]
  snapshots: list[Snapshot] = []
  block: list[str] = []
  for line in [*lines, ""]:
    if line:
      block.append(line)
      continue
    if not block:
      continue
    chars = "".join(block)
    if set(chars) - {ZERO_CHAR, ONE_CHAR}:
      raise GeometryError(
        f"snapshot {len(snapshots)}: characters must be 0 or 1"
      )
    values = np.array(
      [1 if ch == ONE_CHAR else -1 for ch in chars], dtype=np.int8
    )
    snapshots.append(Snapshot(geometry, values))
    block = []
  return snapshots
