"""Static terrain processing: rasters, bathymetry interpolation, tiling."""

from twinhub.terrain.raster import (
    ContourSet,
    HeightField,
    MergedField,
    OceanMask,
    RasterFormatError,
    cell_center,
    load_contours,
    load_height_field,
    merge_bathymetry,
    ocean_mask,
    write_height_field,
)
from twinhub.terrain.spatial import (
    DepthIndex,
    KdTree,
    build_depth_index,
    interpolate_depth,
    interpolate_depth_many,
)
from twinhub.terrain.tiles import (
    TerrainTile,
    TileEntry,
    TileIndex,
    TilesetError,
    build_tile_index,
    load_color_image,
    normalize,
    read_tileset,
    reassemble,
    slice_tiles,
    write_tileset,
)

__all__ = [
    "ContourSet",
    "DepthIndex",
    "HeightField",
    "KdTree",
    "MergedField",
    "OceanMask",
    "RasterFormatError",
    "TerrainTile",
    "TileEntry",
    "TileIndex",
    "TilesetError",
    "build_depth_index",
    "build_tile_index",
    "cell_center",
    "interpolate_depth",
    "interpolate_depth_many",
    "load_color_image",
    "load_contours",
    "load_height_field",
    "merge_bathymetry",
    "normalize",
    "ocean_mask",
    "read_tileset",
    "reassemble",
    "slice_tiles",
    "write_height_field",
    "write_tileset",
]
