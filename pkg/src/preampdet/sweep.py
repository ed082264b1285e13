"""Tabular sweep results and their CSV form."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["SweepResult", "format_value", "read_csv"]


def format_value(value):
    """CSV text for one cell: 17 significant digits for reals, blank for None."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            raise ValueError("NaN is not allowed in sweep output")
        return format(value, ".17g")
    return str(value)


@dataclass
class SweepResult:
    """Rows of parameter values and computed quantities.

    ``metadata`` is written as ``# key: value`` lines above the header.
    """

    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def records(self):
        return [dict(zip(self.columns, row)) for row in self.rows]

    @property
    def failed(self):
        """Rows whose ``status`` column reports an error."""
        if "status" not in self.columns:
            return []
        i = self.columns.index("status")
        return [row for row in self.rows if str(row[i]).startswith("error")
                or row[i] == "impossible"]

    def to_csv(self, path=None):
        """Write CSV to ``path`` (or return it as text when ``path`` is None)."""
        buf = io.StringIO()
        for key, value in self.metadata.items():
            buf.write(f"# {key}: {format_value(value)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_value(v) for v in row])
        text = buf.getvalue()
        if path is None:
            return text
        Path(path).write_text(text)
        return text


def read_csv(path_or_text):
    """Parse CSV written by :meth:`SweepResult.to_csv`.

    Returns ``(metadata, header, rows)`` with cells left as strings.
    """
    if isinstance(path_or_text, Path) or (
        isinstance(path_or_text, str) and "\n" not in path_or_text
    ):
        text = Path(path_or_text).read_text()
    else:
        text = path_or_text
    metadata = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            metadata[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    return metadata, rows[0], rows[1:]
