"""Density and grid file formats.

JSON densities:
    {"grid_x": {"min": 0.0, "max": 1.0, "n": 16},
     "grid_y": {"min": 0.0, "max": 1.0, "n": 16},   # omitted for 1-D
     "values": [...]}                                # row-major (x outer)

CSV grids: the header row carries the y-cell edges (first field is a label),
each data row carries its left x-edge followed by the row of values, and a
final short row carries the last x-edge. The format is self-contained, so
every emitted grid round-trips through `read_grid_csv`. Density ingestion
floors and renormalizes; bit-exactness of the stored values is not required.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .measures import DiscreteDensity1D, DiscreteDensity2D, Grid1D


class DensityFormatError(ValueError):
    pass


def _grid_from_spec(spec: dict, label: str) -> Grid1D:
    try:
        lo, hi, n = float(spec["min"]), float(spec["max"]), int(spec["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DensityFormatError(f"{label} must provide min, max and n") from exc
    if not hi > lo or n < 1:
        raise DensityFormatError(f"{label} needs max > min and n >= 1")
    return Grid1D.uniform(lo, hi, n)


def read_density_json(path: str | Path) -> DiscreteDensity1D | DiscreteDensity2D:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DensityFormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "grid_x" not in doc or "values" not in doc:
        raise DensityFormatError(f"{path}: expected an object with grid_x and values")
    grid_x = _grid_from_spec(doc["grid_x"], "grid_x")
    values = np.asarray(doc["values"], dtype=float)
    if "grid_y" in doc and doc["grid_y"] is not None:
        grid_y = _grid_from_spec(doc["grid_y"], "grid_y")
        if values.ndim == 1:
            values = values.reshape(grid_x.n_cells, grid_y.n_cells)
        if values.shape != (grid_x.n_cells, grid_y.n_cells):
            raise DensityFormatError(f"{path}: values shape {values.shape} does not match grids")
        return DiscreteDensity2D.from_values(grid_x, grid_y, values)
    if values.shape != (grid_x.n_cells,):
        raise DensityFormatError(f"{path}: values length does not match grid_x")
    return DiscreteDensity1D.from_values(grid_x, values)


def write_density_json(path: str | Path, d: DiscreteDensity1D | DiscreteDensity2D) -> None:
    def spec(grid: Grid1D) -> dict:
        return {"min": float(grid.nodes[0]), "max": float(grid.nodes[-1]), "n": grid.n_cells}

    if isinstance(d, DiscreteDensity2D):
        doc = {
            "grid_x": spec(d.grid_x),
            "grid_y": spec(d.grid_y),
            "values": [[float(v) for v in row] for row in d.values],
        }
    else:
        doc = {"grid_x": spec(d.grid), "values": [float(v) for v in d.values]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def write_grid_csv(path: str | Path, grid_x: Grid1D, grid_y: Grid1D, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=float)
    if values.shape != (grid_x.n_cells, grid_y.n_cells):
        raise ValueError("values must be (n_x, n_y)")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        header = ["x_edge\\y_edges"] + [f"{v:.17g}" for v in grid_y.nodes]
        fh.write(",".join(header) + "\n")
        for i in range(grid_x.n_cells):
            row = [f"{grid_x.nodes[i]:.17g}"] + [f"{v:.17g}" for v in values[i]]
            fh.write(",".join(row) + "\n")
        fh.write(f"{grid_x.nodes[-1]:.17g}\n")


def read_grid_csv(path: str | Path) -> tuple[Grid1D, Grid1D, np.ndarray]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise DensityFormatError(f"{path}: {exc}") from exc
    if len(lines) < 3:
        raise DensityFormatError(f"{path}: too short for a grid CSV")
    try:
        y_nodes = np.array([float(v) for v in lines[0].split(",")[1:]])
        rows = [ln.split(",") for ln in lines[1:]]
        x_nodes = np.array([float(r[0]) for r in rows])
        values = np.array([[float(v) for v in r[1:]] for r in rows[:-1]])
    except (ValueError, IndexError) as exc:
        raise DensityFormatError(f"{path}: malformed grid CSV ({exc})") from exc
    if len(rows[-1]) != 1:
        raise DensityFormatError(f"{path}: final row must carry only the last x-edge")
    if values.shape != (x_nodes.size - 1, y_nodes.size - 1):
        raise DensityFormatError(f"{path}: value block does not match the edge counts")
    return Grid1D(x_nodes), Grid1D(y_nodes), values


def read_density_csv(path: str | Path) -> DiscreteDensity2D:
    grid_x, grid_y, values = read_grid_csv(path)
    if np.any(values < 0):
        raise DensityFormatError(f"{path}: density values must be nonnegative")
    return DiscreteDensity2D.from_values(grid_x, grid_y, values)


def read_density(path: str | Path) -> DiscreteDensity1D | DiscreteDensity2D:
    """Dispatch on extension: .json or .csv."""
    suffix = Path(path).suffix.lower()
    if suffix == ".json":
        return read_density_json(path)
    if suffix == ".csv":
        return read_density_csv(path)
    raise DensityFormatError(f"{path}: unsupported extension {suffix!r}")
