"""Self-contained HTML report of a sweep and its snapshot images."""

from __future__ import annotations

import base64
import math
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import pandas as pd
from jinja2 import Template

from . import __version__

REPORT_TEMPLATE = """\
<!DOCTYPE html>
<html>
<head>
<meta charset="utf-8">
<title>Snapshot Entropy Report</title>
<style>
  * { box-sizing: border-box; margin: 0; padding: 0; }
  body { font-family: monospace; background: #1a1a1a;
         color: #eee; padding: 20px; }
  h1 { margin-bottom: 20px; }
  h2 { margin: 24px 0 8px; color: #8cf; }
  .summary { background: #222; padding: 12px;
             margin: 20px 0; border-radius: 4px; }
  .failed { color: #ff4; }
  table { border-collapse: collapse; }
  th, td { border: 1px solid #555; padding: 2px 8px;
           text-align: right; font-size: 12px; }
  th { background: #333; color: #aaa; }
  td.nan { color: #f44; }
  .images { display: flex; flex-wrap: wrap; gap: 16px; }
  .images figure { background: #222; padding: 8px; }
  .images img { image-rendering: pixelated;
                border: 1px solid #444; max-width: 600px; }
  figcaption { color: #aaa; font-size: 11px; margin-top: 4px; }
</style>
</head>
<body>
<h1>Snapshot Entropy Report</h1>
<div class="summary">
  {{ title }} | rows: {{ rows|length }} |
  version {{ version }}
  {% for line in comments %}
  <div class="{{ 'failed' if line.startswith('failed') else '' }}">
    # {{ line }}</div>
  {% endfor %}
</div>

{% if rows %}
<h2>Sweep</h2>
<table>
  <tr>{% for col in columns %}<th>{{ col }}</th>{% endfor %}</tr>
  {% for row in rows %}
  <tr>
    {% for cell in row %}
    <td class="{{ 'nan' if cell == 'nan' else '' }}">{{ cell }}</td>
    {% endfor %}
  </tr>
  {% endfor %}
</table>
{% endif %}

{% if images %}
<h2>Snapshots</h2>
<div class="images">
  {% for image in images %}
  <figure>
    <img src="data:image/png;base64,{{ image.data }}"
         alt="{{ image.name }}">
    <figcaption>{{ image.name }}</figcaption>
  </figure>
  {% endfor %}
</div>
{% endif %}
</body>
</html>
"""


def _cell(value: Any) -> str:
  if isinstance(value, float):
    return "nan" if math.isnan(value) else f"{value:.6g}"
  return str(value)


def render_report(
  table: Path | None,
  images: Sequence[Path] = (),
  title: str = "",
) -> str:
  """HTML page with the sweep rows and inline PNG snapshots.

  Args:
    table: SweepTable or any derived CSV, or None for an images-only
      page. Headers come from the file.
    images: PNG files to embed.
    title: Summary line.

  Returns:
    The rendered page.
  """
  comments: list[str] = []
  columns: list[str] = []
  rows: list[list[str]] = []
  if table is not None:
    comments = [
      line[1:].strip()
      for line in table.read_text().splitlines()
      if line.startswith("#")
    ]
    frame = pd.read_csv(table, comment="#")
    columns = [str(c) for c in frame.columns]
    rows = [
      [_cell(v) for v in record]
      for record in frame.itertuples(index=False)
    ]
  embedded = [
    {
      "name": path.stem,
      "data": base64.b64encode(path.read_bytes()).decode("ascii"),
    }
    for path in images
  ]
  return Template(REPORT_TEMPLATE).render(
    title=title or (table.name if table else "snapshots"),
    version=__version__,
    comments=comments,
    columns=columns,
    rows=rows,
    images=embedded,
  )
