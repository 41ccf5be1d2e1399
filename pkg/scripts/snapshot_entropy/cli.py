"""Command-line driver for snapshot sampling and entropy sweeps.

Usage:
  python3 -m snapshot_entropy --seed 7 --baseline-file b.txt \\
    baseline --lengths 64 128
  python3 -m snapshot_entropy --config run.toml sample
  python3 -m snapshot_entropy --config run.toml sweep
  python3 -m snapshot_entropy analyze out/sweep_tfim.csv --smooth 3 --diff 1
  python3 -m snapshot_entropy --config run.toml budget --alpha 0.5
  python3 -m snapshot_entropy --out out report --table out/sweep_tfim.csv
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from collections.abc import Iterator, Sequence
from pathlib import Path
from typing import Any

import pandas as pd

from . import __version__
from .analysis import (
  DEFAULT_SMOOTHING_ROUNDS,
  DEFAULT_WINDOW,
  Series,
  data_collapse,
  finite_difference,
  group_series,
  has_significant_peak,
  peak_location,
  read_sweep_table,
  smooth,
  sweep_rows,
  write_sweep_table,
)
from .born_models import (
  BornModel,
  IsingBornModel,
  NishimoriRBIM,
  make_model,
)
from .config import RunConfig, apply_overrides, load_config
from .errors import AnalysisError, ConfigError, SnapshotEntropyError
from .estimators import (
  DEFAULT_BUDGET_CAP,
  complexity_measure,
  correlation_disorder_avg,
  gamma_subleading,
  runs_estimates,
  sample_budget,
  vortex_free_energy,
)
from .images import save_snapshot_png
from .lattice import format_snapshots
from .lzcid import DEFAULT_BASELINE_SAMPLES, ShuffleBaseline
from .report import render_report
from .sampler import ChainRun, draw_samples, task_seed

logger = logging.getLogger(__name__)

PNG_SNAPSHOTS = 5


# ── Shared plumbing ─────────────────────────────────────────────


def _config(args: argparse.Namespace) -> RunConfig:
  if not args.config:
    raise ConfigError(f"'{args.command}' needs --config <file>")
  config = load_config(Path(args.config))
  return apply_overrides(
    config,
    seed=args.seed,
    out=args.out,
    baseline_file=args.baseline_file,
    tol=args.tol,
    bond_cap=args.bond_cap,
    threads=args.threads,
  )


def _header(config: RunConfig) -> str:
  return f"snapshot-entropy {__version__} config {config.config_hash()}"


def _tasks(config: RunConfig) -> Iterator[tuple[int, float, int]]:
  """(parameter index, parameter, size) in output order."""
  for index, param in enumerate(config.model.grid()):
    for size in config.model.sizes:
      yield index, param, size


def _model(config: RunConfig, param: float, size: int) -> BornModel:
  return make_model(
    config.model.variant,
    param,
    size,
    boundary=config.model.boundary,
    tol=config.estimator.tol,
    bond_cap=config.estimator.bond_cap,
    enforce_parity=config.model.enforce_parity,
  )


def _draw(config: RunConfig, model: BornModel, seed: int) -> list[ChainRun]:
  s = config.sampler
  return draw_samples(
    model,
    s.n_samples,
    seed,
    chains=s.chains,
    threads=config.threads,
    pair_weight=s.pair_weight,
    site_weight=s.site_weight,
    thermalization=s.thermalization,
    thinning=s.thinning,
  )


def _output_dir(config: RunConfig) -> Path:
  out = config.output.directory
  out.mkdir(parents=True, exist_ok=True)
  return out


def _baseline(config: RunConfig, lengths: Sequence[int]) -> ShuffleBaseline:
  """Load the configured table, fill missing lengths, save it back."""
  path = config.estimator.baseline_file
  table = ShuffleBaseline()
  if path is not None and path.exists():
    table = ShuffleBaseline.load(path)
  extended = table.extended(
    lengths,
    config.estimator.baseline_samples,
    config.sampler.seed,
    config.threads,
  )
  if path is not None and extended is not table:
    extended.save(path)
  return extended


def _stem(config: RunConfig, param: float, size: int) -> str:
  return f"{config.model.variant}_{param:g}_L{size}"


# ── Subcommands ─────────────────────────────────────────────────


def do_baseline(args: argparse.Namespace) -> None:
  """Build or extend a shuffle-baseline table."""
  if args.seed is None:
    raise ConfigError("baseline needs an explicit --seed")
  if not args.baseline_file:
    raise ConfigError("baseline needs --baseline-file <path>")
  path = Path(args.baseline_file)
  if not path.parent.is_dir():
    raise ConfigError(f"output directory does not exist: {path.parent}")
  table = ShuffleBaseline.load(path) if path.exists() else ShuffleBaseline()
  before = set(table.lengths())
  table = table.extended(
    args.lengths, args.samples, args.seed, args.threads or 1
  )
  table.save(path)
  added = sorted(set(table.lengths()) - before)
  print(f"Baseline {path}: {len(added)} added, {len(before)} kept")


def _sidecar(runs: Sequence[ChainRun], header: Sequence[str]) -> str:
  frame = pd.DataFrame(
    [
      (run.chain_index, k, s.log_prob)
      for run in runs
      for k, s in enumerate(run)
    ],
    columns=["chain", "sample", "log2prob"],
  )
  body = frame.to_csv(sep="\t", index=False, lineterminator="\n")
  return "".join(f"# {h}\n" for h in header) + body


def do_sample(args: argparse.Namespace) -> None:
  """Write snapshot files and log-probability sidecars."""
  config = _config(args)
  out = _output_dir(config)
  for index, param, size in _tasks(config):
    model = _model(config, param, size)
    stem = _stem(config, param, size)
    try:
      runs = _draw(config, model, task_seed(config.sampler.seed, index, size))
    except SnapshotEntropyError:
      logger.error("%s: sampling failed", stem)
      raise
    header = [
      _header(config),
      f"model {config.model.variant} param {param!r} L {size}",
    ]
    header += [
      f"chain {run.chain_index} acceptance {run.acceptance_rate:.4f}"
      for run in runs
    ]
    snapshots = [s.snapshot for run in runs for s in run]
    snap_path = out / f"{stem}.txt"
    body = "".join(f"# {h}\n" for h in header)
    snap_path.write_text(body + format_snapshots(snapshots))
    (out / f"{stem}.tsv").write_text(_sidecar(runs, header))
    print(f"{stem}: {len(snapshots)} snapshots -> {snap_path}")
    if config.output.png and snapshots:
      png_path = out / f"{stem}.png"
      save_snapshot_png(snapshots[:PNG_SNAPSHOTS], png_path)
      print(f"{stem}: image -> {png_path}")


def _observable(
  config: RunConfig, model: BornModel, seed: int
) -> tuple[float, float]:
  kind = config.estimator.observable
  if kind == "none":
    return math.nan, math.nan
  if not isinstance(model, IsingBornModel):
    raise ConfigError(f"observable {kind!r} needs a 2D model")
  n = config.estimator.obs_samples or config.sampler.n_samples
  obs_seed = task_seed(seed, 3)
  if kind == "correlation":
    if not isinstance(model, NishimoriRBIM):
      raise ConfigError("observable 'correlation' needs the nishimori model")
    avg = correlation_disorder_avg(
      model, n, seed=obs_seed, threads=config.threads
    )
  else:
    avg = vortex_free_energy(
      model,
      n,
      seed=obs_seed,
      exponent=config.estimator.vortex_exponent,
      weight_power=config.estimator.vortex_weight,
      threads=config.threads,
    )
  return avg.value, avg.standard_error


def _sweep_row(
  config: RunConfig,
  model: BornModel,
  baseline: ShuffleBaseline,
  seed: int,
) -> dict[str, Any]:
  runs = _draw(config, model, seed)
  direct, cid = runs_estimates(runs, baseline)
  assert cid is not None
  obs, obs_err = _observable(config, model, seed)
  return {
    "s_d": direct.value,
    "s_d_err": direct.standard_error,
    "cid": cid.value,
    "cid_err": cid.standard_error,
    "obs": obs,
    "obs_err": obs_err,
  }


def do_sweep(args: argparse.Namespace) -> None:
  """One SweepTable row per (parameter, size)."""
  config = _config(args)
  tasks = list(_tasks(config))
  models = {
    (index, size): _model(config, param, size)
    for index, param, size in tasks
  }
  lengths = sorted({m.geometry.n_sites for m in models.values()})
  baseline = _baseline(config, lengths)
  out = _output_dir(config)
  rows: list[dict[str, Any]] = []
  failures: list[str] = []
  for index, param, size in tasks:
    key = {
      "model": str(config.model.variant),
      "param": param,
      "L": size,
      "N_s": config.sampler.n_samples,
    }
    seed = task_seed(config.sampler.seed, index, size)
    try:
      values = _sweep_row(config, models[(index, size)], baseline, seed)
    except SnapshotEntropyError as exc:
      logger.warning("param=%g L=%d failed: %s", param, size, exc)
      failures.append(f"param={param!r} L={size}: {exc}")
      values = {}
    else:
      logger.info(
        "param=%g L=%d: s_d=%.4f cid=%.4f",
        param,
        size,
        values["s_d"],
        values["cid"],
      )
    rows.append(key | values)
  path = out / f"sweep_{config.model.variant}.csv"
  write_sweep_table(sweep_rows(rows), path, [_header(config)], failures)
  print(f"Sweep written to {path} ({len(rows)} rows, {len(failures)} failed)")


def _gamma_series(
  curves: dict[tuple[str, int], Series],
) -> dict[tuple[str, int], Series]:
  out: dict[tuple[str, int], Series] = {}
  for (model, size), small in curves.items():
    large = curves.get((model, 2 * size))
    if large is None:
      continue
    if not (small.x.shape == large.x.shape and (small.x == large.x).all()):
      raise AnalysisError(
        f"{model}: L={size} and L={2 * size} use different grids"
      )
    values = [
      gamma_subleading(a, b, size) for a, b in zip(small.y, large.y)
    ]
    out[(model, size)] = Series(small.x, values)
  if not out:
    raise AnalysisError("gamma needs rows at both L and 2L")
  return out


def do_analyze(args: argparse.Namespace) -> None:
  """Smooth, differentiate and fit a SweepTable column."""
  table = Path(args.table)
  frame = read_sweep_table(table)
  column = args.column
  if column not in frame.columns:
    raise AnalysisError(f"no column {column!r} in {table}")
  curves = group_series(frame, column)
  provenance = [
    f"snapshot-entropy {__version__} analyze",
    f"source {table.name}",
    f"column {column}",
  ]
  name = column
  if args.gamma:
    curves = _gamma_series(curves)
    name = f"gamma_{column}"
    provenance.append("gamma 2L (s(2L) - s(L))")
  if args.smooth:
    curves = {k: smooth(s, args.smooth) for k, s in curves.items()}
    provenance.append(f"smoothing rounds {args.smooth}")
  if args.diff:
    curves = {k: finite_difference(s, args.diff) for k, s in curves.items()}
    name = f"d{args.diff}_{name}"
    provenance.append(f"stencil central order {args.diff}")

  for (model, size), s in curves.items():
    if not len(s):
      continue
    line = f"{model} L={size}: peak at {peak_location(s):.6g}"
    if args.peaks:
      significant = has_significant_peak(s)
      line += "" if significant else " (not significant)"
      provenance.append(
        f"peak {model} L={size} significant {significant}"
      )
    print(line)

  if args.collapse:
    lo, hi = args.window
    for model in sorted({m for m, _ in curves}):
      fit = data_collapse(
        {size: s for (m, size), s in curves.items() if m == model},
        window=(lo, hi),
      )
      provenance.append(
        f"collapse {model} window {lo:g} {hi:g} "
        f"p_c {fit.critical:.6g} nu {fit.nu:.6g} score {fit.score:.4g}"
      )
      print(
        f"{model}: p_c={fit.critical:.4f} nu={fit.nu:.3f} "
        f"({fit.n_points} points)"
      )

  derived = pd.DataFrame(
    [
      {"model": m, "L": size, "param": x, name: y}
      for (m, size), s in curves.items()
      for x, y in zip(s.x, s.y)
    ],
    columns=["model", "L", "param", name],
  )
  out = Path(args.out) if args.out else table.parent
  out.mkdir(parents=True, exist_ok=True)
  path = out / f"{table.stem}_{name}.csv"
  body = derived.to_csv(index=False, float_format="%.10g", lineterminator="\n")
  path.write_text("".join(f"# {p}\n" for p in provenance) + body)
  print(f"Derived table written to {path}")


def do_budget(args: argparse.Namespace) -> None:
  """Smallest N_s with sigma_CID <= alpha * epsilon per grid point."""
  config = _config(args)
  out = _output_dir(config)
  rows: list[dict[str, Any]] = []
  failures: list[str] = []
  for index, param, size in _tasks(config):
    model = _model(config, param, size)
    baseline = _baseline(config, [model.geometry.n_sites])
    try:
      measure = complexity_measure(
        model,
        baseline,
        seed=task_seed(config.sampler.seed, index, size),
        reference_samples=config.sampler.n_samples,
        threads=config.threads,
      )
      n = sample_budget(args.alpha, measure, cap=args.cap)
    except SnapshotEntropyError as exc:
      logger.warning("param=%g L=%d: %s", param, size, exc)
      failures.append(f"param={param!r} L={size}: {exc}")
      n = None
    rows.append(
      {
        "model": str(config.model.variant),
        "param": param,
        "L": size,
        "alpha": args.alpha,
        "N_s": n,
      }
    )
    print(f"param={param:g} L={size}: N_s={n if n else 'over cap'}")
  path = out / f"budget_{config.model.variant}.csv"
  lines = [f"# {_header(config)}"] + [f"# failed: {f}" for f in failures]
  body = pd.DataFrame(rows).to_csv(index=False, lineterminator="\n")
  path.write_text("\n".join(lines) + "\n" + body)
  print(f"Budget written to {path}")


def do_report(args: argparse.Namespace) -> None:
  """Render a SweepTable and snapshot PNGs as one HTML page."""
  table = Path(args.table) if args.table else None
  if table is not None and not table.exists():
    raise ConfigError(f"table not found: {table}")
  image_dir = Path(args.images) if args.images else None
  images = sorted(image_dir.glob("*.png")) if image_dir else []
  if table is None and not images:
    raise ConfigError("report needs --table or a directory of PNGs")
  if args.out:
    out = Path(args.out)
  else:
    out = table.parent if table is not None else Path(".")
  out.mkdir(parents=True, exist_ok=True)
  report_path = out / "report.html"
  report_path.write_text(render_report(table, images))
  print(f"Report written to {report_path}")


# ── Entry point ─────────────────────────────────────────────────


def build_parser() -> argparse.ArgumentParser:
  parser = argparse.ArgumentParser(
    prog="snapshot-entropy",
    description="Snapshot sampling and entropy estimation",
  )
  parser.add_argument("--config", help="TOML run configuration")
  parser.add_argument("--seed", type=int, help="Master seed override")
  parser.add_argument("--out", help="Output directory override")
  parser.add_argument("--baseline-file", help="Shuffle-baseline table")
  parser.add_argument("--tol", type=float, help="Contraction tolerance")
  parser.add_argument("--bond-cap", type=int, help="Bond-dimension cap")
  parser.add_argument("--threads", type=int, help="Worker threads")
  parser.add_argument(
    "--verbose", "-v", action="store_true", help="Debug logging"
  )
  sub = parser.add_subparsers(dest="command")

  baseline_cmd = sub.add_parser(
    "baseline", help="Build or extend a shuffle baseline"
  )
  baseline_cmd.add_argument(
    "--lengths", type=int, nargs="+", required=True, help="Lengths N"
  )
  baseline_cmd.add_argument(
    "--samples",
    type=int,
    default=DEFAULT_BASELINE_SAMPLES,
    help=f"Sequences per length (default: {DEFAULT_BASELINE_SAMPLES})",
  )

  sub.add_parser("sample", help="Write snapshot files")
  sub.add_parser("sweep", help="Write a SweepTable CSV")

  analyze_cmd = sub.add_parser("analyze", help="Post-process a sweep")
  analyze_cmd.add_argument("table", help="SweepTable CSV")
  analyze_cmd.add_argument(
    "--column", default="s_d", help="Column to analyze (default: s_d)"
  )
  analyze_cmd.add_argument(
    "--smooth",
    type=int,
    default=0,
    metavar="R",
    help=f"Smoothing rounds (typical: {DEFAULT_SMOOTHING_ROUNDS})",
  )
  analyze_cmd.add_argument(
    "--diff",
    type=int,
    default=0,
    choices=[0, 1, 2, 3],
    metavar="K",
    help="Derivative order",
  )
  analyze_cmd.add_argument(
    "--gamma", action="store_true", help="2L (s(2L) - s(L)) first"
  )
  analyze_cmd.add_argument(
    "--collapse", action="store_true", help="Fit p_c and nu"
  )
  analyze_cmd.add_argument(
    "--window",
    type=float,
    nargs=2,
    default=list(DEFAULT_WINDOW),
    metavar=("LO", "HI"),
    help="Collapse window in u",
  )
  analyze_cmd.add_argument(
    "--peaks", action="store_true", help="Test peaks against noise"
  )

  budget_cmd = sub.add_parser("budget", help="Sample budget per point")
  budget_cmd.add_argument(
    "--alpha", type=float, required=True, help="sigma <= alpha * epsilon"
  )
  budget_cmd.add_argument(
    "--cap",
    type=int,
    default=DEFAULT_BUDGET_CAP,
    help=f"Largest N_s tried (default: {DEFAULT_BUDGET_CAP})",
  )

  report_cmd = sub.add_parser("report", help="HTML report")
  report_cmd.add_argument("--table", help="SweepTable CSV")
  report_cmd.add_argument("--images", help="Directory of snapshot PNGs")
  return parser


def main(argv: Sequence[str] | None = None) -> None:
  """Entry point."""
  parser = build_parser()
  args = parser.parse_args(argv)
  logging.basicConfig(
    level=logging.DEBUG if args.verbose else logging.INFO,
    format="%(message)s",
  )
  if not args.command:
    parser.print_help()
    sys.exit(1)

  commands = {
    "baseline": do_baseline,
    "sample": do_sample,
    "sweep": do_sweep,
    "analyze": do_analyze,
    "budget": do_budget,
    "report": do_report,
  }
  try:
    commands[args.command](args)
  except (SnapshotEntropyError, OSError) as exc:
    logger.error("%s", exc)
    sys.exit(1)


if __name__ == "__main__":
  main()
