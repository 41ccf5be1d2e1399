"""End-to-end tests for the snapshot-entropy command line."""

import math
import sys
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import pytest

sys.path.insert(
  0, str(Path(__file__).resolve().parent.parent)
)
from snapshot_entropy import cli
from snapshot_entropy.analysis import (
  read_sweep_table,
  sweep_rows,
  write_sweep_table,
)
from snapshot_entropy.cli import main
from snapshot_entropy.errors import EstimatorError
from snapshot_entropy.lattice import DualSquareGeom, parse_snapshots
from snapshot_entropy.lzcid import ShuffleBaseline


def _write_config(
  tmp_path: Path,
  variant: str,
  params: list[float],
  sizes: list[int],
  *,
  n_samples: int = 8,
  observable: str = "none",
  png: bool = False,
) -> Path:
  out = tmp_path / "out"
  baseline = tmp_path / "baseline.txt"
  text = f"""\
[model]
variant = "{variant}"
params = {params!r}
sizes = {sizes!r}

[sampler]
seed = 11
n_samples = {n_samples}

[estimator]
baseline_file = "{baseline.as_posix()}"
baseline_samples = 5
observable = "{observable}"

[output]
directory = "{out.as_posix()}"
png = {str(png).lower()}
"""
  path = tmp_path / "run.toml"
  path.write_text(text)
  return path


class TestBaselineCommand:
  """baseline subcommand."""

  def test_creates_and_extends(self, tmp_path: Path) -> None:
    path = tmp_path / "b.txt"
    common = ["--seed", "1", "--baseline-file", str(path), "baseline"]
    main([*common, "--lengths", "16", "--samples", "3"])
    first = ShuffleBaseline.load(path)
    main([*common, "--lengths", "16", "32", "--samples", "3"])
    second = ShuffleBaseline.load(path)
    assert second.lengths() == [16, 32]
    assert second.entries[16] == first.entries[16]

  def test_deterministic(self, tmp_path: Path) -> None:
    for name in ("a.txt", "b.txt"):
      main(
        [
          "--seed",
          "4",
          "--baseline-file",
          str(tmp_path / name),
          "baseline",
          "--lengths",
          "24",
          "--samples",
          "3",
        ]
      )
    assert (tmp_path / "a.txt").read_text() == (
      tmp_path / "b.txt"
    ).read_text()

  def test_missing_directory(self, tmp_path: Path) -> None:
    target = tmp_path / "nope" / "b.txt"
    with pytest.raises(SystemExit) as exc:
      main(
        ["--seed", "1", "--baseline-file", str(target), "baseline",
         "--lengths", "8"]
      )
    assert exc.value.code == 1
    assert not target.exists()

  def test_needs_seed(self, tmp_path: Path) -> None:
    with pytest.raises(SystemExit) as exc:
      main(
        ["--baseline-file", str(tmp_path / "b.txt"), "baseline",
         "--lengths", "8"]
      )
    assert exc.value.code == 1


class TestSampleCommand:
  """sample subcommand."""

  def test_clean_nishimori(self, tmp_path: Path) -> None:
    config = _write_config(tmp_path, "nishimori", [0.0], [3], n_samples=4)
    main(["--config", str(config), "sample"])
    text = (tmp_path / "out" / "nishimori_0_L3.txt").read_text()
    assert text.startswith("# snapshot-entropy")
    snaps = parse_snapshots(text, DualSquareGeom(3))
    assert len(snaps) == 4
    assert all(bool(np.all(x.values == 1)) for x in snaps)
    sidecar = tmp_path / "out" / "nishimori_0_L3.tsv"
    assert "chain\tsample\tlog2prob" in sidecar.read_text()
    frame = pd.read_csv(sidecar, sep="\t", comment="#")
    assert list(frame.columns) == ["chain", "sample", "log2prob"]
    assert len(frame) == 4
    assert (frame["log2prob"] == 0.0).all()

  def test_reruns_identical(self, tmp_path: Path) -> None:
    config = _write_config(tmp_path, "tfim", [0.5], [8], png=True)
    main(["--config", str(config), "sample"])
    snap = tmp_path / "out" / "tfim_0.5_L8.txt"
    first = snap.read_bytes()
    main(["--config", str(config), "sample"])
    assert snap.read_bytes() == first
    assert (tmp_path / "out" / "tfim_0.5_L8.png").exists()

  def test_seed_override(self, tmp_path: Path) -> None:
    config = _write_config(tmp_path, "tfim", [0.5], [8], n_samples=20)
    main(["--config", str(config), "sample"])
    snap = tmp_path / "out" / "tfim_0.5_L8.txt"
    first = snap.read_text()
    main(["--config", str(config), "--seed", "12", "sample"])
    assert snap.read_text() != first

  def test_needs_config(self) -> None:
    with pytest.raises(SystemExit) as exc:
      main(["sample"])
    assert exc.value.code == 1


class TestSweepCommand:
  """sweep subcommand."""

  def test_tfim(self, tmp_path: Path) -> None:
    config = _write_config(tmp_path, "tfim", [0.2, 0.5], [6], n_samples=20)
    main(["--config", str(config), "sweep"])
    frame = read_sweep_table(tmp_path / "out" / "sweep_tfim.csv")
    assert frame["param"].tolist() == [0.2, 0.5]
    assert frame["s_d"].notna().all()
    assert frame["cid"].notna().all()
    assert frame["obs"].isna().all()
    assert ShuffleBaseline.load(tmp_path / "baseline.txt").lengths() == [6]

  def test_failed_point_is_recorded(self, tmp_path: Path) -> None:
    config = _write_config(
      tmp_path, "deformed", [0.1], [2], n_samples=4, observable="correlation"
    )
    main(["--config", str(config), "sweep"])
    path = tmp_path / "out" / "sweep_deformed.csv"
    assert "# failed: param=0.1 L=2" in path.read_text()
    frame = read_sweep_table(path)
    assert math.isnan(frame["s_d"].iloc[0])

  def test_nishimori_correlation(self, tmp_path: Path) -> None:
    config = _write_config(
      tmp_path, "nishimori", [0.0], [2], n_samples=4, observable="correlation"
    )
    main(["--config", str(config), "sweep"])
    frame = read_sweep_table(tmp_path / "out" / "sweep_nishimori.csv")
    assert frame["obs"].iloc[0] == 1.0
    assert frame["s_d"].iloc[0] == 0.0


class TestAnalyzeCommand:
  """analyze subcommand."""

  @staticmethod
  def _sweep(tmp_path: Path) -> Path:
    params = [round(0.1 * k, 10) for k in range(11)]
    rows = [
      {"model": "tfim", "param": p, "L": size, "N_s": 10, "s_d": p / size}
      for size in (8, 16)
      for p in params
    ]
    path = tmp_path / "sweep_tfim.csv"
    write_sweep_table(sweep_rows(rows), path, ["config test"])
    return path

  def _derived(self, path: Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")

  def test_smooth(self, tmp_path: Path) -> None:
    table = self._sweep(tmp_path)
    main(["analyze", str(table), "--smooth", "3"])
    derived = self._derived(tmp_path / "sweep_tfim_s_d.csv")
    assert len(derived) == 2 * 5
    assert (tmp_path / "sweep_tfim_s_d.csv").read_text().startswith("# ")

  def test_derivative(self, tmp_path: Path) -> None:
    table = self._sweep(tmp_path)
    main(["analyze", str(table), "--diff", "1"])
    derived = self._derived(tmp_path / "sweep_tfim_d1_s_d.csv")
    small = derived[derived["L"] == 8]
    np.testing.assert_allclose(small["d1_s_d"], 1 / 8)

  def test_gamma(self, tmp_path: Path) -> None:
    table = self._sweep(tmp_path)
    out = tmp_path / "derived"
    main(["--out", str(out), "analyze", str(table), "--gamma"])
    derived = self._derived(out / "sweep_tfim_gamma_s_d.csv")
    assert derived["L"].unique().tolist() == [8]
    expected = 16 * (derived["param"] / 16 - derived["param"] / 8)
    np.testing.assert_allclose(derived["gamma_s_d"], expected, atol=1e-9)

  def test_missing_column(self, tmp_path: Path) -> None:
    with pytest.raises(SystemExit) as exc:
      main(["analyze", str(self._sweep(tmp_path)), "--column", "nope"])
    assert exc.value.code == 1


class TestBudgetCommand:
  """budget subcommand."""

  def test_infinite_alpha(self, tmp_path: Path) -> None:
    config = _write_config(tmp_path, "tfim", [0.5], [6])
    main(["--config", str(config), "budget", "--alpha", "inf"])
    path = tmp_path / "out" / "budget_tfim.csv"
    frame = pd.read_csv(path, comment="#")
    assert frame["N_s"].tolist() == [2]

  def test_reference_failure_is_recorded(
    self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch
  ) -> None:
    real = cli.complexity_measure

    def failing(model: Any, baseline: Any, **kwargs: Any) -> Any:
      if model.parameter == 0.2:
        raise EstimatorError("no reference")
      return real(model, baseline, **kwargs)

    monkeypatch.setattr(cli, "complexity_measure", failing)
    config = _write_config(tmp_path, "tfim", [0.2, 0.5], [6])
    main(["--config", str(config), "budget", "--alpha", "inf"])
    path = tmp_path / "out" / "budget_tfim.csv"
    assert "# failed: param=0.2 L=6: no reference" in path.read_text()
    frame = pd.read_csv(path, comment="#")
    assert math.isnan(frame["N_s"].iloc[0])
    assert frame["N_s"].iloc[1] == 2


class TestReportCommand:
  """report subcommand."""

  def test_writes_html(self, tmp_path: Path) -> None:
    table = TestAnalyzeCommand._sweep(tmp_path)
    main(["report", "--table", str(table)])
    html = (tmp_path / "report.html").read_text()
    assert "<table>" in html

  def test_nothing_to_report(self, tmp_path: Path) -> None:
    with pytest.raises(SystemExit) as exc:
      main(["--out", str(tmp_path), "report"])
    assert exc.value.code == 1


class TestNoCommand:
  """Bare invocation."""

  def test_prints_help(self, capsys: pytest.CaptureFixture[str]) -> None:
    with pytest.raises(SystemExit) as exc:
      main([])
    assert exc.value.code == 1
    assert "usage" in capsys.readouterr().out
