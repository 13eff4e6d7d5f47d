"""Small file helpers: atomic writes and strict numeric CSV reading."""

from __future__ import annotations

import csv
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ParseError


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def read_csv_rows(path, header) -> list[tuple[int, list[str]]]:
    """Raw ``(line number, fields)`` pairs of a CSV whose first line must equal ``header``."""
    header = tuple(header)
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file", line=1) from None
        if tuple(h.strip() for h in first) != header:
            raise ParseError(f"{path}: expected header {','.join(header)}, got {','.join(first)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: expected {len(header)} fields, got {len(row)}", line=lineno)
            out.append((lineno, row))
    return out


def read_csv_columns(
    path, header, monotone: str | None = "t_s", allow_nonfinite: bool = False
) -> dict[str, np.ndarray]:
    """Read a numeric CSV whose first line must equal ``header`` exactly.

    Raises :class:`ParseError` carrying the 1-based line number of the first
    offending row. When ``monotone`` names a column, that column must be
    strictly increasing.
    """
    header = tuple(header)
    cols: list[list[float]] = [[] for _ in header]
    j = None if monotone is None else header.index(monotone)
    for lineno, row in read_csv_rows(path, header):
        try:
            values = [float(c) for c in row]
        except ValueError:
            raise ParseError(f"{path}: non-numeric field in {row}", line=lineno) from None
        if not allow_nonfinite and not all(math.isfinite(v) for v in values):
            raise ParseError(f"{path}: non-finite value", line=lineno)
        if j is not None and cols[j] and not values[j] > cols[j][-1]:
            raise ParseError(f"{path}: {monotone} not strictly increasing", line=lineno)
        for c, v in zip(cols, values):
            c.append(v)
    return {h: np.asarray(c, dtype=float) for h, c in zip(header, cols)}
