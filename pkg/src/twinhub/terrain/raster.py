"""Height raster and contour ingestion, ocean masking, land/sea fusion.

Rasters travel in a plain-text grid format with a six-line header::

    ncols 4
    nrows 3
    xllcenter 0.0
    yllcenter 0.0
    cellsize 10.0
    nodata_value -9999.0

followed by ``nrows`` whitespace-separated data rows, top (northernmost) row
first. Internally rows are stored bottom-up: row 0 is the southernmost, and
cell (r, c) sits at map coordinates
``(origin_x + c * cell_size, origin_y + r * cell_size)``.

Contours travel as CSV with the exact header line ``x,y,depth``, one vertex
per row, depth in meters positive downward.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HEADER_KEYS = ("ncols", "nrows", "xllcenter", "yllcenter", "cellsize", "nodata_value")
CONTOUR_HEADER = "x,y,depth"
DEFAULT_SEA_LEVEL = 0.0


class RasterFormatError(ValueError):
    """Malformed raster or contour input."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HeightField:
    """Georeferenced elevation raster. origin_* is the lower-left cell center."""

    width: int
    height: int
    origin_x: float
    origin_y: float
    cell_size: float
    values: np.ndarray  # (height, width) float64, row 0 = southernmost
    nodata: float

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("raster must have at least one cell per axis")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be > 0")
        if not math.isfinite(self.nodata):
            raise ValueError("nodata sentinel must be finite")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.height, self.width):
            raise ValueError(
                f"values shape {vals.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if not np.isfinite(vals).all():
            raise ValueError("raster contains non-finite cells")
        object.__setattr__(self, "values", _freeze(vals))

    @property
    def nodata_mask(self) -> np.ndarray:
        return self.values == self.nodata


@dataclass(frozen=True)
class ContourSet:
    """Bathymetric contour vertices; depths are meters, positive downward."""

    xs: np.ndarray
    ys: np.ndarray
    depths: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        ys = np.asarray(self.ys, dtype=np.float64)
        depths = np.asarray(self.depths, dtype=np.float64)
        if not (xs.shape == ys.shape == depths.shape and xs.ndim == 1):
            raise ValueError("contour arrays must be 1-D and equally sized")
        if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
            raise ValueError("contour coordinates must be finite")
        if not np.isfinite(depths).all() or (depths < 0).any():
            raise ValueError("contour depths must be finite and >= 0")
        object.__setattr__(self, "xs", _freeze(xs))
        object.__setattr__(self, "ys", _freeze(ys))
        object.__setattr__(self, "depths", _freeze(depths))

    def __len__(self):
        return self.xs.shape[0]

    def point(self, i: int) -> tuple[float, float, float]:
        return float(self.xs[i]), float(self.ys[i]), float(self.depths[i])


@dataclass(frozen=True)
class OceanMask:
    """Per-cell ocean flags, geometry identical to the source HeightField."""

    width: int
    height: int
    flags: np.ndarray  # (height, width) bool

    def __post_init__(self):
        flags = np.asarray(self.flags, dtype=bool)
        if flags.shape != (self.height, self.width):
            raise ValueError("mask shape does not match declared dimensions")
        object.__setattr__(self, "flags", _freeze(flags))

    @property
    def ocean_cell_count(self) -> int:
        return int(np.count_nonzero(self.flags))


@dataclass(frozen=True)
class MergedField:
    """Signed elevation field: land heights, negative depths below sea level."""

    width: int
    height: int
    origin_x: float
    origin_y: float
    cell_size: float
    values: np.ndarray  # (height, width) float64, row 0 = southernmost

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.height, self.width):
            raise ValueError("values shape does not match declared dimensions")
        object.__setattr__(self, "values", _freeze(vals))


def cell_center(
    origin_x: float, origin_y: float, cell_size: float, row: int, col: int
) -> tuple[float, float]:
    """Map coordinates of cell (row, col); row 0 is the southernmost row."""
    return origin_x + col * cell_size, origin_y + row * cell_size


def load_height_field(path, fmt: str = "grid") -> HeightField:
    """Load a height raster from the plain-text grid exchange format."""
    if fmt != "grid":
        raise RasterFormatError(f"unsupported raster format: {fmt!r}")
    path = Path(path)
    text = path.read_text()
    lines = text.splitlines()
    if len(lines) < len(HEADER_KEYS):
        raise RasterFormatError(f"{path}: malformed header: fewer than 6 lines")
    header = {}
    for expected, line in zip(HEADER_KEYS, lines):
        parts = line.split()
        if len(parts) != 2 or parts[0].lower() != expected:
            raise RasterFormatError(
                f"{path}: malformed header: expected '{expected} <value>', got {line!r}"
            )
        try:
            header[expected] = float(parts[1])
        except ValueError:
            raise RasterFormatError(
                f"{path}: malformed header: non-numeric value in {line!r}"
            ) from None
    width = int(header["ncols"])
    height = int(header["nrows"])
    if width != header["ncols"] or height != header["nrows"]:
        raise RasterFormatError(f"{path}: malformed header: ncols/nrows must be integers")
    if width < 1 or height < 1:
        raise RasterFormatError(f"{path}: malformed header: ncols/nrows must be >= 1")
    if header["cellsize"] <= 0:
        raise RasterFormatError(f"{path}: malformed header: cellsize must be > 0")
    if not math.isfinite(header["nodata_value"]):
        raise RasterFormatError(f"{path}: malformed header: nodata_value must be finite")

    tokens = " ".join(lines[len(HEADER_KEYS) :]).split()
    try:
        flat = np.array(tokens, dtype=np.float64)
    except ValueError:
        raise RasterFormatError(f"{path}: non-numeric cell value") from None
    if flat.size != width * height:
        raise RasterFormatError(
            f"{path}: dimension mismatch: header declares {width * height} cells, "
            f"file contains {flat.size}"
        )
    if not np.isfinite(flat).all():
        raise RasterFormatError(f"{path}: non-finite cell value")
    # File rows run top-down; flip to the internal bottom-up layout.
    grid = flat.reshape(height, width)[::-1].copy()
    return HeightField(
        width=width,
        height=height,
        origin_x=header["xllcenter"],
        origin_y=header["yllcenter"],
        cell_size=header["cellsize"],
        values=grid,
        nodata=header["nodata_value"],
    )


def write_height_field(field: HeightField, path) -> None:
    """Serialize a HeightField back to the text grid format.

    Numbers use Python repr (shortest exact form), so write -> load -> write
    is byte-stable.
    """
    path = Path(path)
    out = [
        f"ncols {field.width}",
        f"nrows {field.height}",
        f"xllcenter {field.origin_x!r}",
        f"yllcenter {field.origin_y!r}",
        f"cellsize {field.cell_size!r}",
        f"nodata_value {field.nodata!r}",
    ]
    for row in field.values[::-1].tolist():  # top row first
        out.append(" ".join(map(repr, row)))
    path.write_text("\n".join(out) + "\n")


def load_contours(path, source_id: str | None = None) -> ContourSet:
    """Load contour vertices from ``x,y,depth`` CSV, preserving file order."""
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        raise RasterFormatError(f"{path}: empty contour file")
    reader = csv.reader(text.splitlines())
    header = next(reader)
    if [h.strip() for h in header] != CONTOUR_HEADER.split(","):
        raise RasterFormatError(
            f"{path}: expected header '{CONTOUR_HEADER}', got {','.join(header)!r}"
        )
    xs, ys, depths = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise RasterFormatError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        try:
            x, y, d = (float(v) for v in row)
        except ValueError:
            raise RasterFormatError(f"{path}:{lineno}: non-numeric field") from None
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(d)):
            raise RasterFormatError(f"{path}:{lineno}: non-finite field")
        if d < 0:
            raise RasterFormatError(f"{path}:{lineno}: negative depth {d}")
        xs.append(x)
        ys.append(y)
        depths.append(d)
    if not xs:
        raise RasterFormatError(f"{path}: empty contour file")
    return ContourSet(
        xs=np.array(xs), ys=np.array(ys), depths=np.array(depths),
        source_id=source_id if source_id is not None else path.name,
    )


def ocean_mask(field: HeightField, sea_level: float = DEFAULT_SEA_LEVEL) -> OceanMask:
    """Flag ocean cells: elevation at or below sea level, or nodata."""
    flags = (field.values <= sea_level) | field.nodata_mask
    return OceanMask(width=field.width, height=field.height, flags=flags)


def merge_bathymetry(
    field: HeightField,
    mask: OceanMask,
    index=None,
    sea_level: float = DEFAULT_SEA_LEVEL,
) -> MergedField:
    """Fuse land heights and interpolated ocean depths into one signed field.

    Land cells copy through unchanged; ocean cells become
    ``sea_level - depth`` interpolated at the cell center. ``index`` is a
    DepthIndex and may be omitted only when the mask flags no ocean cells.
    """
    if (mask.height, mask.width) != (field.height, field.width):
        raise ValueError(
            f"mask geometry {mask.height}x{mask.width} does not match "
            f"field {field.height}x{field.width}"
        )
    land_nodata = field.nodata_mask & ~mask.flags
    if land_nodata.any():
        r, c = np.argwhere(land_nodata)[0]
        raise ValueError(f"nodata cell ({r}, {c}) not covered by the ocean mask")
    merged = field.values.copy()
    rows, cols = np.nonzero(mask.flags)
    if rows.size:
        if index is None:
            raise ValueError("ocean cells present but no depth index was given")
        from twinhub.terrain.spatial import interpolate_depth_many

        qx = field.origin_x + cols * field.cell_size
        qy = field.origin_y + rows * field.cell_size
        merged[rows, cols] = sea_level - interpolate_depth_many(index, qx, qy)
    return MergedField(
        width=field.width,
        height=field.height,
        origin_x=field.origin_x,
        origin_y=field.origin_y,
        cell_size=field.cell_size,
        values=merged,
    )
