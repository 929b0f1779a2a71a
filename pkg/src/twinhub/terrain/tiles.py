"""Slice merged elevation (and optional co-registered color) into PNG tiles.

Every tile is the nominal size; edge tiles are padded on the north and east
sides with zero pixels, and the pad extents are recorded in the sidecar.
Height tiles are 16-bit single-channel PNGs holding normalized elevation:
pixel p encodes ``norm_min + (p / 65535) * (norm_max - norm_min)``. Color
tiles are 8-bit RGB. Each tile gets an ASCII ``key=value`` sidecar, and the
tile set is described by ``index.txt``.

By default all tiles share the field-global normalization bounds so elevation
is continuous across tile seams; per-tile bounds are available as an option.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from twinhub.terrain.raster import MergedField

DEFAULT_TILE_SIZE = 256
QUANT_MAX = 65535

SIDECAR_KEYS = (
    "row",
    "col",
    "origin_x",
    "origin_y",
    "cell_size",
    "norm_min",
    "norm_max",
    "pad_right",
    "pad_top",
)
_SIDECAR_INT_KEYS = {"row", "col", "pad_right", "pad_top"}

INDEX_FILENAME = "index.txt"
_INDEX_SCALAR_KEYS = (
    "tile_size",
    "rows",
    "cols",
    "origin_x",
    "origin_y",
    "cell_size",
    "norm_min",
    "norm_max",
)
_INDEX_INT_KEYS = {"tile_size", "rows", "cols"}


class TilesetError(ValueError):
    """Inconsistent or unreadable tile set."""


@dataclass
class TerrainTile:
    """One tile of the merged field, padded to the nominal tile size."""

    row: int
    col: int
    width: int
    height: int
    origin_x: float
    origin_y: float
    cell_size: float
    norm_min: float
    norm_max: float
    pad_right: int
    pad_top: int
    height_image: np.ndarray  # (height, width) uint16, row 0 = southernmost
    color_image: np.ndarray | None = None  # (height, width, 3) uint8

    def __post_init__(self):
        if self.norm_max < self.norm_min:
            raise ValueError("norm_max must be >= norm_min")
        if self.height_image.shape != (self.height, self.width):
            raise ValueError("height image shape does not match tile dimensions")
        if self.color_image is not None and self.color_image.shape != (
            self.height,
            self.width,
            3,
        ):
            raise ValueError("color image shape does not match tile dimensions")

    @property
    def height_file(self) -> str:
        return f"tile_{self.row}_{self.col}_h.png"

    @property
    def color_file(self) -> str:
        return f"tile_{self.row}_{self.col}_c.png"

    @property
    def sidecar_file(self) -> str:
        return f"tile_{self.row}_{self.col}.txt"


@dataclass
class TileEntry:
    row: int
    col: int
    height_file: str
    color_file: str | None = None


@dataclass
class TileIndex:
    """Tile-set manifest: grid extent, shared georeferencing, tile files."""

    tile_size: int
    rows: int
    cols: int
    origin_x: float
    origin_y: float
    cell_size: float
    norm_min: float
    norm_max: float
    entries: list[TileEntry]

    def __post_init__(self):
        coords = [(e.row, e.col) for e in self.entries]
        if len(set(coords)) != len(coords):
            raise TilesetError("duplicate tile entry in index")
        if len(coords) != self.rows * self.cols:
            raise TilesetError(
                f"index holds {len(coords)} entries, extent is {self.rows}x{self.cols}"
            )
        for r, c in coords:
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise TilesetError(f"tile ({r}, {c}) outside extent")


def normalize(field: MergedField) -> tuple[float, float, np.ndarray]:
    """Map field values onto [0, 1]; a constant field maps to all zeros."""
    vmin = float(field.values.min())
    vmax = float(field.values.max())
    if vmax == vmin:
        return vmin, vmax, np.zeros_like(field.values)
    return vmin, vmax, (field.values - vmin) / (vmax - vmin)


def quantize(unit: np.ndarray) -> np.ndarray:
    """16-bit quantization of a unit-interval array."""
    return np.round(unit * QUANT_MAX).astype(np.uint16)


def dequantize(pixels: np.ndarray, norm_min: float, norm_max: float) -> np.ndarray:
    return norm_min + pixels.astype(np.float64) / QUANT_MAX * (norm_max - norm_min)


def slice_tiles(
    field: MergedField,
    color: np.ndarray | None = None,
    tile_size: int = DEFAULT_TILE_SIZE,
    per_tile_norm: bool = False,
) -> list[TerrainTile]:
    """Cut the field into ceil(h/ts) x ceil(w/ts) equally sized tiles.

    ``color``, if given, must be an (height, width, 3) uint8 array
    co-registered with the field (row 0 = southernmost).
    """
    if tile_size < 1:
        raise ValueError("tile_size must be >= 1")
    if color is not None and color.shape != (field.height, field.width, 3):
        raise ValueError(
            f"color geometry mismatch: {color.shape} vs "
            f"({field.height}, {field.width}, 3)"
        )
    g_min, g_max, unit = normalize(field)
    n_rows = math.ceil(field.height / tile_size)
    n_cols = math.ceil(field.width / tile_size)
    tiles = []
    for tr in range(n_rows):
        r0 = tr * tile_size
        r1 = min(r0 + tile_size, field.height)
        for tc in range(n_cols):
            c0 = tc * tile_size
            c1 = min(c0 + tile_size, field.width)
            if per_tile_norm:
                sub = field.values[r0:r1, c0:c1]
                t_min = float(sub.min())
                t_max = float(sub.max())
                t_unit = (
                    np.zeros_like(sub)
                    if t_max == t_min
                    else (sub - t_min) / (t_max - t_min)
                )
            else:
                t_min, t_max = g_min, g_max
                t_unit = unit[r0:r1, c0:c1]
            pixels = np.zeros((tile_size, tile_size), dtype=np.uint16)
            pixels[: r1 - r0, : c1 - c0] = quantize(t_unit)
            color_tile = None
            if color is not None:
                color_tile = np.zeros((tile_size, tile_size, 3), dtype=np.uint8)
                color_tile[: r1 - r0, : c1 - c0] = color[r0:r1, c0:c1]
            tiles.append(
                TerrainTile(
                    row=tr,
                    col=tc,
                    width=tile_size,
                    height=tile_size,
                    origin_x=field.origin_x + c0 * field.cell_size,
                    origin_y=field.origin_y + r0 * field.cell_size,
                    cell_size=field.cell_size,
                    norm_min=t_min,
                    norm_max=t_max,
                    pad_right=tile_size - (c1 - c0),
                    pad_top=tile_size - (r1 - r0),
                    height_image=pixels,
                    color_image=color_tile,
                )
            )
    return tiles


def build_tile_index(field: MergedField, tiles: list[TerrainTile]) -> TileIndex:
    """Index describing a freshly sliced tile set."""
    if not tiles:
        raise TilesetError("cannot index an empty tile set")
    tile_size = tiles[0].width
    return TileIndex(
        tile_size=tile_size,
        rows=math.ceil(field.height / tile_size),
        cols=math.ceil(field.width / tile_size),
        origin_x=field.origin_x,
        origin_y=field.origin_y,
        cell_size=field.cell_size,
        norm_min=min(t.norm_min for t in tiles),
        norm_max=max(t.norm_max for t in tiles),
        entries=[
            TileEntry(
                row=t.row,
                col=t.col,
                height_file=t.height_file,
                color_file=t.color_file if t.color_image is not None else None,
            )
            for t in tiles
        ],
    )


def _save_png(arr: np.ndarray, path: Path) -> None:
    # Internal rows run south to north; PNG rows run top-down.
    Image.fromarray(np.flipud(arr)).save(path, format="PNG")


def _load_png(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        img.load()
        arr = np.asarray(img)
    return np.flipud(arr).copy()


def load_color_image(path) -> np.ndarray:
    """Load co-registered aerial imagery as (height, width, 3) uint8.

    The PNG's top row is taken as the northernmost cell row and flipped into
    the internal bottom-up layout.
    """
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        arr = np.asarray(rgb, dtype=np.uint8)
    return np.flipud(arr).copy()


def write_sidecar(tile: TerrainTile, path) -> None:
    lines = [f"{key}={getattr(tile, key)!r}" for key in SIDECAR_KEYS]
    Path(path).write_text("\n".join(lines) + "\n")


def read_sidecar(path) -> dict:
    """Parse a tile sidecar; raises TilesetError on any missing key."""
    found = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        if "=" not in line:
            raise TilesetError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        found[key.strip()] = value.strip()
    meta = {}
    for key in SIDECAR_KEYS:
        if key not in found:
            raise TilesetError(f"{path}: missing key: {key}")
        try:
            meta[key] = int(found[key]) if key in _SIDECAR_INT_KEYS else float(found[key])
        except ValueError:
            raise TilesetError(f"{path}: non-numeric value for {key}") from None
    return meta


def write_tileset(tiles: list[TerrainTile], index: TileIndex, out_dir) -> list[str]:
    """Write PNGs and sidecars, then the index last; returns written names.

    Any failure removes the partially written files before re-raising.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        for tile in tiles:
            h_path = out_dir / tile.height_file
            _save_png(tile.height_image, h_path)
            written.append(h_path)
            if tile.color_image is not None:
                c_path = out_dir / tile.color_file
                _save_png(tile.color_image, c_path)
                written.append(c_path)
            s_path = out_dir / tile.sidecar_file
            write_sidecar(tile, s_path)
            written.append(s_path)
        idx_path = out_dir / INDEX_FILENAME
        _write_index(index, idx_path)
        written.append(idx_path)
    except Exception:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    return [p.name for p in written]


def _write_index(index: TileIndex, path: Path) -> None:
    lines = [f"{key}={getattr(index, key)!r}" for key in _INDEX_SCALAR_KEYS]
    for e in sorted(index.entries, key=lambda e: (e.row, e.col)):
        fields = [str(e.row), str(e.col), e.height_file]
        if e.color_file is not None:
            fields.append(e.color_file)
        lines.append("tile=" + ",".join(fields))
    path.write_text("\n".join(lines) + "\n")


def read_tile_index(path) -> TileIndex:
    path = Path(path)
    scalars = {}
    entries = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        if key == "tile":
            fields = value.split(",")
            if len(fields) not in (3, 4):
                raise TilesetError(f"{path}:{lineno}: bad tile entry {value!r}")
            entries.append(
                TileEntry(
                    row=int(fields[0]),
                    col=int(fields[1]),
                    height_file=fields[2],
                    color_file=fields[3] if len(fields) == 4 else None,
                )
            )
        else:
            scalars[key] = value.strip()
    kwargs = {}
    for key in _INDEX_SCALAR_KEYS:
        if key not in scalars:
            raise TilesetError(f"{path}: missing key: {key}")
        kwargs[key] = int(scalars[key]) if key in _INDEX_INT_KEYS else float(scalars[key])
    return TileIndex(entries=entries, **kwargs)


def read_tileset(tile_dir) -> tuple[list[TerrainTile], TileIndex]:
    """Load a written tile set back into memory."""
    tile_dir = Path(tile_dir)
    index = read_tile_index(tile_dir / INDEX_FILENAME)
    tiles = []
    for entry in index.entries:
        meta = read_sidecar(tile_dir / f"tile_{entry.row}_{entry.col}.txt")
        if (meta["row"], meta["col"]) != (entry.row, entry.col):
            raise TilesetError(
                f"sidecar row/col disagree with index for tile "
                f"({entry.row}, {entry.col})"
            )
        height_image = _load_png(tile_dir / entry.height_file).astype(np.uint16)
        color_image = None
        if entry.color_file is not None:
            color_image = _load_png(tile_dir / entry.color_file)
        tiles.append(
            TerrainTile(
                row=entry.row,
                col=entry.col,
                width=height_image.shape[1],
                height=height_image.shape[0],
                origin_x=meta["origin_x"],
                origin_y=meta["origin_y"],
                cell_size=meta["cell_size"],
                norm_min=meta["norm_min"],
                norm_max=meta["norm_max"],
                pad_right=meta["pad_right"],
                pad_top=meta["pad_top"],
                height_image=height_image,
                color_image=color_image,
            )
        )
    return tiles, index


def reassemble(tiles: list[TerrainTile], index: TileIndex) -> MergedField:
    """Dequantize and stitch a complete tile set back into a MergedField.

    The inverse of slice + quantize, used for verification; exact up to the
    16-bit quantization step of each tile.
    """
    by_coord: dict[tuple[int, int], TerrainTile] = {}
    for tile in tiles:
        key = (tile.row, tile.col)
        if key in by_coord:
            raise TilesetError(f"duplicate tile ({tile.row}, {tile.col})")
        by_coord[key] = tile
    for r in range(index.rows):
        for c in range(index.cols):
            if (r, c) not in by_coord:
                raise TilesetError(f"missing tile ({r}, {c})")

    ts = index.tile_size
    pad_right = by_coord[(0, index.cols - 1)].pad_right
    pad_top = by_coord[(index.rows - 1, 0)].pad_top
    width = index.cols * ts - pad_right
    height = index.rows * ts - pad_top
    values = np.empty((height, width), dtype=np.float64)
    for (tr, tc), tile in by_coord.items():
        rows = ts - tile.pad_top
        cols = ts - tile.pad_right
        values[tr * ts : tr * ts + rows, tc * ts : tc * ts + cols] = dequantize(
            tile.height_image[:rows, :cols], tile.norm_min, tile.norm_max
        )
    return MergedField(
        width=width,
        height=height,
        origin_x=index.origin_x,
        origin_y=index.origin_y,
        cell_size=index.cell_size,
        values=values,
    )
