"""LZ77 compression of +-1 sequences and the CID statistic.

The compressor is greedy with an unbounded window: at every position
it emits the longest earlier match (ties go to the nearest one) plus
the symbol that follows it. Matches may run into the region they are
copying, so a length can exceed its back-distance.

Matches are found with ``bytes.rfind`` on two encodings of the input:
one byte per symbol for short queries, and one byte per 8-symbol
window for longer ones. A match of length l >= 8 is a run of
l - 7 equal window codes.
"""

from __future__ import annotations

import io
import logging
import math
from collections.abc import Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray

from . import __version__
from .errors import CompressionError, MissingBaselineError
from .lattice import Snapshot

logger = logging.getLogger(__name__)

# symbols per window code; codes must fit in one byte
WINDOW = 8

DEFAULT_BASELINE_SAMPLES = 100
BASELINE_COLUMNS = ("N", "K", "seed", "N_shuffle")


class LZTuple(NamedTuple):
  """Copy ``l`` symbols from ``d`` back, then append ``b``."""

  d: int
  l: int  # noqa: E741
  b: int | None


def _tuple_problem(k: int, t: LZTuple, last: int) -> str | None:
  if t.d < 0 or t.l < 0:
    return f"tuple {k}: negative field in {t}"
  if t.d == 0 and (t.l != 0 or t.b is None):
    return f"tuple {k}: a literal needs l = 0 and a symbol, got {t}"
  if t.b is None and k != last:
    return f"tuple {k}: only the final tuple may omit its symbol"
  if t.b not in (None, 1, -1):
    return f"tuple {k}: symbol {t.b} is not +-1"
  return None


@dataclass(frozen=True)
class CompressedSeq:
  tuples: tuple[LZTuple, ...]
  source_length: int

  def __post_init__(self) -> None:
    if self.source_length < 1 or not self.tuples:
      raise CompressionError("compressed sequence is empty")
    last = len(self.tuples) - 1
    for k, (d, length, b) in enumerate(self.tuples):
      valid_symbol = b == 1 or b == -1 or (b is None and k == last)
      if d > 0 and length >= 0 and valid_symbol:
        continue
      problem = _tuple_problem(k, self.tuples[k], last)
      if problem:
        raise CompressionError(problem)

  def __len__(self) -> int:
    return len(self.tuples)


def _as_sequence(x: ArrayLike | Snapshot) -> NDArray[np.int8]:
  if isinstance(x, Snapshot):
    return x.raster()
  seq = np.asarray(x).ravel()
  if seq.size and not np.all((seq == 1) | (seq == -1)):
    raise CompressionError("sequence values must be +1 or -1")
  return seq.astype(np.int8)


def _encodings(seq: NDArray[np.int8]) -> tuple[bytes, bytes]:
  """(one byte per symbol, one byte per WINDOW-symbol code)."""
  bits = (seq < 0).astype(np.uint8)
  if bits.size < WINDOW:
    return bits.tobytes(), b""
  windows = np.lib.stride_tricks.sliding_window_view(bits, WINDOW)
  weights = 1 << np.arange(WINDOW, dtype=np.int64)
  return bits.tobytes(), (windows @ weights).astype(np.uint8).tobytes()


def _nearest(raw: bytes, codes: bytes, pos: int, length: int) -> int:
  """Largest j < pos with raw[j : j + length] == raw[pos : pos + length].

  Returns -1 when there is none.
  """
  if length >= WINDOW:
    m = length - WINDOW + 1
    return codes.rfind(codes[pos : pos + m], 0, pos - 1 + m)
  return raw.rfind(raw[pos : pos + length], 0, pos - 1 + length)


def _common_prefix(raw: bytes, a: int, b: int, limit: int) -> int:
  """Length of the common prefix of raw[a:] and raw[b:], at most limit."""
  good, bad = 0, limit + 1
  k = 1
  while k < bad:
    if raw[a : a + k] == raw[b : b + k]:
      good = k
      k *= 2
    else:
      bad = k
  while bad - good > 1:
    mid = (good + bad) // 2
    if raw[a : a + mid] == raw[b : b + mid]:
      good = mid
    else:
      bad = mid
  return good


def _longest_match(raw: bytes, codes: bytes, pos: int) -> tuple[int, int]:
  """(distance, length) of the longest match for ``raw[pos:]``.

  Each hit is the nearest occurrence of the current length; extending
  it and asking for one symbol more either fails, proving the length
  maximal, or finds the nearest longer occurrence.
  """
  rest = len(raw) - pos
  want = min(WINDOW, rest)
  j = _nearest(raw, codes, pos, want)
  if j < 0 and want > 1:
    want = 1
    j = _nearest(raw, codes, pos, 1)
  length, start = 0, -1
  while j >= 0:
    length = want + _common_prefix(raw, j + want, pos + want, rest - want)
    start = j
    want = length + 1
    if want > rest:
      break
    j = _nearest(raw, codes, pos, want)
  if start < 0:
    return 0, 0
  return pos - start, length


def compress(x: ArrayLike | Snapshot) -> CompressedSeq:
  """Greedy longest-match LZ77 with an unbounded window.

  Args:
    x: A +-1 sequence, or a Snapshot (rasterized row-major).

  Returns:
    The tuple list and the source length.

  Raises:
    CompressionError: If ``x`` is empty or not +-1 valued.
  """
  seq = _as_sequence(x)
  n = seq.size
  if n == 0:
    raise CompressionError("cannot compress an empty sequence")
  raw, codes = _encodings(seq)
  tuples = [LZTuple(0, 0, -1 if raw[0] else 1)]
  pos = 1
  while pos < n:
    d, length = _longest_match(raw, codes, pos)
    end = pos + length
    if end < n:
      tuples.append(LZTuple(d, length, -1 if raw[end] else 1))
      pos = end + 1
    else:
      tuples.append(LZTuple(d, length, None))
      pos = end
  return CompressedSeq(tuple(tuples), n)


def decompress(c: CompressedSeq) -> NDArray[np.int8]:
  """Decode a tuple stream.

  Raises:
    CompressionError: If a tuple reaches before the decoded prefix or
      the stream does not decode to ``c.source_length`` symbols.
  """
  out = bytearray()
  for k, t in enumerate(c.tuples):
    pos = len(out)
    if t.d > pos:
      raise CompressionError(
        f"tuple {k}: back-distance {t.d} exceeds decoded length {pos}"
      )
    extra = 0 if t.b is None else 1
    if pos + t.l + extra > c.source_length:
      raise CompressionError(
        f"tuple {k}: decodes past source length {c.source_length}"
      )
    if t.l:
      # periodic extension of the last d symbols == overlapping copy
      window = out[pos - t.d : pos]
      out += (window * (t.l // t.d + 1))[: t.l]
    if t.b is not None:
      out.append(t.b & 0xFF)
  if len(out) != c.source_length:
    raise CompressionError(
      f"decoded {len(out)} symbols, expected {c.source_length}"
    )
  return np.frombuffer(bytes(out), dtype=np.int8).copy()
def code_length(c: CompressedSeq) -> float:
  """|C| log2|C| + 2|C| log2(N/|C|), in bits."""
  size = len(c.tuples)
  n = c.source_length
  if size > n:
    raise CompressionError(f"{size} tuples for {n} symbols")
  return size * math.log2(size) + 2 * size * math.log2(n / size)


# ── Shuffle baseline ────────────────────────────────────────────


def shuffle_baseline(
  length: int, samples: int = DEFAULT_BASELINE_SAMPLES, seed: int = 0
) -> float:
  """Mean code length of ``samples`` uniform sequences of ``length``.

  The generator is seeded from (seed, length), so each length is
  reproducible on its own regardless of which others are built.
  """
  if length < 1 or samples < 1:
    raise CompressionError(
      f"baseline needs N >= 1 and K >= 1, got N={length} K={samples}"
    )
  rng = np.random.default_rng([seed, length])
  draws = 1 - 2 * rng.integers(0, 2, size=(samples, length), dtype=np.int8)
  total = sum(code_length(compress(row)) for row in draws)
  return total / samples


class BaselineEntry(NamedTuple):
  length: int
  samples: int
  seed: int
  value: float


@dataclass(frozen=True)
class ShuffleBaseline:
  """Baseline code lengths keyed by sequence length."""

  entries: Mapping[int, BaselineEntry] = field(default_factory=dict)

  def __contains__(self, length: object) -> bool:
    return length in self.entries

  def __getitem__(self, length: int) -> float:
    try:
      return self.entries[length].value
    except KeyError:
      raise MissingBaselineError(
        f"no shuffle baseline for N={length}; "
        f"available: {sorted(self.entries)}"
      ) from None

  def lengths(self) -> list[int]:
    return sorted(self.entries)

  def extended(
    self,
    lengths: Iterable[int],
    samples: int = DEFAULT_BASELINE_SAMPLES,
    seed: int = 0,
    threads: int = 1,
  ) -> ShuffleBaseline:
    """New table with every missing length built; existing kept."""
    missing = sorted(set(lengths) - set(self.entries))
    if not missing:
      return self
    logger.info(
      "Building shuffle baseline for %d lengths (K=%d)",
      len(missing),
      samples,
    )
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
      values = list(
        pool.map(
          lambda n: shuffle_baseline(n, samples, seed), missing
        )
      )
    entries = dict(self.entries)
    for n, value in zip(missing, values):
      entries[n] = BaselineEntry(n, samples, seed, value)
    return ShuffleBaseline(entries)

  def to_frame(self) -> pd.DataFrame:
    return pd.DataFrame(
      [tuple(self.entries[n]) for n in self.lengths()],
      columns=list(BASELINE_COLUMNS),
    )

  def to_text(self) -> str:
    body = self.to_frame().to_csv(sep=" ", index=False, lineterminator="\n")
    return f"# snapshot-entropy {__version__} shuffle baseline\n{body}"

  @classmethod
  def from_text(cls, text: str) -> ShuffleBaseline:
    """Parse a whitespace table with ``#`` comments.

    Raises:
      CompressionError: On wrong columns or incomplete rows.
    """
    try:
      frame = pd.read_csv(io.StringIO(text), sep=r"\s+", comment="#")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
      raise CompressionError(f"unreadable baseline table: {exc}") from exc
    if tuple(frame.columns) != BASELINE_COLUMNS:
      raise CompressionError(
        f"baseline columns {list(frame.columns)}, "
        f"expected {list(BASELINE_COLUMNS)}"
      )
    if frame.isna().to_numpy().any():
      raise CompressionError("baseline table has incomplete rows")
    entries = {
      int(n): BaselineEntry(int(n), int(k), int(seed), float(value))
      for n, k, seed, value in frame.itertuples(index=False)
    }
    return cls(entries)

  def save(self, path: Path) -> None:
    path.write_text(self.to_text())

  @classmethod
  def load(cls, path: Path) -> ShuffleBaseline:
    return cls.from_text(path.read_text())


def cid(x: ArrayLike | Snapshot, baseline: ShuffleBaseline) -> float:
  """Code length of ``x`` over the baseline for its length.

  Raises:
    MissingBaselineError: If the baseline lacks ``len(x)``.
  """
  seq = _as_sequence(x)
  reference = baseline[seq.size]
  return code_length(compress(seq)) / reference
