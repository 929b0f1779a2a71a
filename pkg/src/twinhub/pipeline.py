"""End-to-end static terrain pipeline: files in, tile set out.

Deterministic: the same inputs and options always produce byte-identical
tiles, sidecars, and index.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

from twinhub.terrain import (
    build_depth_index,
    build_tile_index,
    load_color_image,
    load_contours,
    load_height_field,
    merge_bathymetry,
    ocean_mask,
    slice_tiles,
    write_tileset,
)
from twinhub.terrain.spatial import DEFAULT_K, DEFAULT_POWER
from twinhub.terrain.tiles import DEFAULT_TILE_SIZE


@dataclass
class BuildSummary:
    tile_count: int
    rows: int
    cols: int
    ocean_cells: int
    norm_min: float
    norm_max: float
    elapsed_s: float
    files: list[str]

    def lines(self) -> list[str]:
        return [
            f"tiles written: {self.tile_count} ({self.rows}x{self.cols} grid)",
            f"ocean cells interpolated: {self.ocean_cells}",
            f"elevation bounds: {self.norm_min:.3f} .. {self.norm_max:.3f} m",
            f"elapsed: {self.elapsed_s:.2f} s",
        ]


def build_terrain_tiles(
    raster_path,
    contours_path,
    out_dir,
    color_path=None,
    tile_size: int = DEFAULT_TILE_SIZE,
    sea_level: float = 0.0,
    k: int = DEFAULT_K,
    power: float = DEFAULT_POWER,
    per_tile_norm: bool = False,
) -> BuildSummary:
    """Load, fuse, slice, and write one tile set; returns a build summary."""
    start = time.perf_counter()
    field = load_height_field(raster_path)
    contours = load_contours(contours_path)
    mask = ocean_mask(field, sea_level=sea_level)
    index = build_depth_index(contours, k=k, power=power)
    merged = merge_bathymetry(field, mask, index, sea_level=sea_level)
    color = load_color_image(color_path) if color_path is not None else None
    tiles = slice_tiles(
        merged, color=color, tile_size=tile_size, per_tile_norm=per_tile_norm
    )
    tile_index = build_tile_index(merged, tiles)
    files = write_tileset(tiles, tile_index, Path(out_dir))
    return BuildSummary(
        tile_count=len(tiles),
        rows=tile_index.rows,
        cols=tile_index.cols,
        ocean_cells=mask.ocean_cell_count,
        norm_min=tile_index.norm_min,
        norm_max=tile_index.norm_max,
        elapsed_s=time.perf_counter() - start,
        files=files,
    )
