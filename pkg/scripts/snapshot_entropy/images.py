"""Snapshot images for visual inspection."""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from PIL import Image

from .errors import GeometryError
from .lattice import ChainGeom, Snapshot

BLACK = 0  # -1 / vortex
WHITE = 255
GUTTER = 1


def snapshot_mosaic(snapshots: Sequence[Snapshot]) -> NDArray[np.uint8]:
  """Grey-level pixels: chains stacked as rows, grids side by side."""
  if not snapshots:
    raise GeometryError("no snapshots to draw")
  geom = snapshots[0].geometry
  if any(x.geometry != geom for x in snapshots):
    raise GeometryError("snapshots in one image must share a geometry")
  pixels = [np.where(x.grid() > 0, WHITE, BLACK) for x in snapshots]
  if isinstance(geom, ChainGeom):
    return np.vstack(pixels).astype(np.uint8)
  rows = geom.shape[0]
  gutter = np.full((rows, GUTTER), 128)
  tiles: list[NDArray[np.int64]] = []
  for k, tile in enumerate(pixels):
    if k:
      tiles.append(gutter)
    tiles.append(tile)
  return np.hstack(tiles).astype(np.uint8)


def save_snapshot_png(
  snapshots: Sequence[Snapshot], path: Path, scale: int = 4
) -> None:
  """Write the mosaic as a PNG, each site ``scale`` pixels wide."""
  image = Image.fromarray(snapshot_mosaic(snapshots))
  if scale > 1:
    image = image.resize(
      (image.width * scale, image.height * scale), Image.Resampling.NEAREST
    )
  image.save(path)
