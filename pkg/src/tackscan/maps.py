"""Spatial map products: predicted class/quantity grids and exports.

Maps align to the scene grid (node (i, j) at (i*step, j*step)). Cells never
visited by a prediction carry a no-data marker. CSV export is lossless for
round-tripping; the portable graymap export renders classes as evenly
spaced gray levels with 0 reserved for no-data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .scene import ValidationError

__all__ = ["ClassMap", "assemble_map", "export_map_csv", "export_map_pgm", "read_map_csv"]

logger = logging.getLogger(__name__)

NODATA = None


@dataclass
class ClassMap:
    """Grid of predicted labels (str) or quantities (float); None = no data."""

    shape: tuple[int, int]
    step: float
    values: np.ndarray  # (nx, ny) object array
    kind: str  # "class" | "quantity"

    def filled_fraction(self) -> float:
        return float(np.mean([v is not None for v in self.values.reshape(-1)]))


def assemble_map(
    shape: tuple[int, int],
    step: float,
    positions: Sequence[tuple[float, float]],
    values: Sequence,
    kind: str = "class",
) -> ClassMap:
    """Place per-trace predictions onto the scene grid.

    Positions snap to the nearest node within step/2. Multiple predictions
    snapping to one node resolve to the last writer, with a logged warning.

    Raises
    ------
    ValidationError
        Position outside the scene bounds.
    """
    nx, ny = shape
    grid = np.full((nx, ny), None, dtype=object)
    conflicts = 0
    for (x, y), v in zip(positions, values):
        i = int(round(x / step))
        j = int(round(y / step))
        if not (0 <= i < nx and 0 <= j < ny):
            raise ValidationError(
                f"position ({x}, {y}) outside the {nx}x{ny} grid at step {step}"
            )
        if grid[i, j] is not None:
            conflicts += 1
        grid[i, j] = v
    if conflicts:
        logger.warning(
            "map assembly: %d position(s) snapped onto occupied nodes; last writer kept",
            conflicts,
        )
    return ClassMap(shape=shape, step=step, values=grid, kind=kind)


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------
def _cell_text(v, kind: str) -> str:
    if v is None:
        return ""
    if kind == "quantity":
        return repr(float(v))
    return str(v)


def export_map_csv(cmap: ClassMap, path: Union[str, Path]) -> None:
    """One CSV row per grid row (fixed x), empty cells for no-data."""
    nx, ny = cmap.shape
    lines = []
    for i in range(nx):
        lines.append(",".join(_cell_text(cmap.values[i, j], cmap.kind) for j in range(ny)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_map_csv(path: Union[str, Path], step: float, kind: str = "class") -> ClassMap:
    rows = Path(path).read_text().splitlines()
    nx = len(rows)
    cells = [r.split(",") for r in rows]
    ny = len(cells[0])
    grid = np.full((nx, ny), None, dtype=object)
    for i, row in enumerate(cells):
        if len(row) != ny:
            raise ValidationError(f"ragged map row {i}")
        for j, text in enumerate(row):
            if text == "":
                continue
            grid[i, j] = float(text) if kind == "quantity" else text
    return ClassMap(shape=(nx, ny), step=step, values=grid, kind=kind)


def class_gray_levels(labels: Sequence[str]) -> dict[str, int]:
    """Evenly spaced gray levels over (0, 255]; 0 stays reserved for no-data.

    Class index i of K maps to round(255 * (i + 1) / K).
    """
    k = len(labels)
    return {l: int(round(255.0 * (i + 1) / k)) for i, l in enumerate(labels)}


def export_map_pgm(
    cmap: ClassMap,
    path: Union[str, Path],
    labels: Optional[Sequence[str]] = None,
    quantity_max: Optional[float] = None,
) -> None:
    """8-bit ASCII portable graymap of the map grid.

    Class maps need the ordered label list; quantity maps scale linearly
    over [0, quantity_max] (defaulting to the grid maximum) onto [1, 255].
    """
    nx, ny = cmap.shape
    if cmap.kind == "class":
        if labels is None:
            raise ValidationError("class-map graymap export needs the label order")
        levels = class_gray_levels(labels)

        def level(v):
            return 0 if v is None else levels[str(v)]

    else:
        filled = [float(v) for v in cmap.values.reshape(-1) if v is not None]
        top = quantity_max if quantity_max is not None else (max(filled) if filled else 1.0)
        top = max(top, 1e-30)

        def level(v):
            if v is None:
                return 0
            return 1 + int(round(min(max(float(v), 0.0), top) / top * 254.0))

    # Longitudinal axis across the image: width nx, height ny.
    body = "\n".join(" ".join(str(level(cmap.values[i, j])) for i in range(nx)) for j in range(ny))
    Path(path).write_text(f"P2\n{nx} {ny}\n255\n{body}\n")
