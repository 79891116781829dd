"""Plain-text serialisation: CSV tables and P2 (ASCII) PGM heatmaps.

Floats are written with 17 significant digits so that a round trip through
text reproduces every double exactly, and output bytes depend only on the
values written.
"""

from __future__ import annotations

import csv
import io as _io
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Density, LossPath, TimeGrid, ValidationError

__all__ = [
    "fmt",
    "write_density_csv",
    "read_density_csv",
    "read_density_table",
    "write_loss_csv",
    "write_noise_csv",
    "read_noise_csv",
    "write_table_csv",
    "pgm_bytes",
    "write_pgm",
]


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def _write(path, text: str) -> None:
    # newline="" keeps "\n" line endings on every platform
    with open(path, "w", newline="") as fh:
        fh.write(text)


def write_table_csv(path, header: Sequence[str], rows) -> None:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(c) if isinstance(c, (float, np.floating)) else c for c in row])
    _write(path, buf.getvalue())


def write_density_csv(density: Density, path) -> None:
    write_table_csv(path, ["x", "value"], zip(density.nodes.tolist(), density.values.tolist()))


def read_density_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Two numeric columns ``x, value``; an optional header line is skipped."""
    xs, vs = [], []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                x, v = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if i == 0:
                    continue
                raise ValidationError(f"{path}: line {i + 1} is not a numeric 'x,value' pair: {row}")
            xs.append(x)
            vs.append(v)
    if len(xs) < 2:
        raise ValidationError(f"{path}: need at least two tabulated points")
    return np.array(xs), np.array(vs)


read_density_csv = read_density_table


def write_loss_csv(loss: LossPath, path) -> None:
    jump = np.zeros(loss.values.size)
    for j in loss.jumps:
        if j.time_index < jump.size:
            jump[j.time_index] = j.size
    rows = zip(loss.indices.tolist(), loss.times.tolist(), loss.values.tolist(), jump.tolist())
    write_table_csv(path, ["t_index", "t", "L", "jump_size"], rows)


def write_noise_csv(noise, path) -> None:
    write_table_csv(path, ["k", "increment"], enumerate(noise.increments.tolist()))


def read_noise_csv(path, grid: TimeGrid, seed: int = 0):
    """Load increments written by :func:`write_noise_csv` onto ``grid``."""
    from .stochastic import NoisePath

    inc = []
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header != ["k", "increment"]:
            raise ValidationError(f"{path}: expected header 'k,increment', got {header}")
        for k, row in enumerate(rows):
            if int(row[0]) != k:
                raise ValidationError(f"{path}: row {k + 2} has index {row[0]}, expected {k}")
            inc.append(float(row[1]))
    return NoisePath(np.array(inc), seed, grid)


def pgm_bytes(columns: Sequence[np.ndarray]) -> bytes:
    """Encode density columns (one per snapshot) as an ASCII PGM image.

    Rows run over space with the top row at the largest node; grey levels
    map ``0 .. max`` linearly onto ``0 .. 255`` with the maximum taken over
    the whole run. An all-zero run is black.
    """
    if not columns:
        raise ValidationError("a heatmap needs at least one snapshot")
    img = np.column_stack([np.asarray(c, dtype=float) for c in columns])[::-1]
    top = float(img.max())
    levels = np.zeros(img.shape, dtype=np.int64) if top <= 0 else np.rint(255.0 * img / top).astype(np.int64)
    levels = np.clip(levels, 0, 255)
    h, w = levels.shape
    lines = ["P2", f"{w} {h}", "255"]
    lines += [" ".join(map(str, r)) for r in levels.tolist()]
    return ("\n".join(lines) + "\n").encode("ascii")


def write_pgm(columns: Sequence[np.ndarray], path) -> None:
    Path(path).write_bytes(pgm_bytes(columns))
