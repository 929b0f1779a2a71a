"""Tile pipeline tests: normalization, slicing, tileset io, reassembly."""

import numpy as np
import pytest

from twinhub.terrain.raster import MergedField
from twinhub.terrain.tiles import (
    QUANT_MAX,
    TilesetError,
    build_tile_index,
    dequantize,
    normalize,
    quantize,
    read_sidecar,
    read_tile_index,
    read_tileset,
    reassemble,
    slice_tiles,
    write_sidecar,
    write_tileset,
)


def make_field(values, cell_size=10.0, x0=1000.0, y0=-2000.0):
    values = np.asarray(values, dtype=float)
    return MergedField(
        width=values.shape[1], height=values.shape[0],
        origin_x=x0, origin_y=y0, cell_size=cell_size, values=values,
    )


def random_field(shape, seed=0, lo=-50.0, hi=400.0):
    rng = np.random.default_rng(seed)
    return make_field(rng.uniform(lo, hi, shape))


class TestNormalize:
    def test_three_value_field(self):
        vmin, vmax, unit = normalize(make_field([[-10.0, 40.0, 90.0]]))
        assert (vmin, vmax) == (-10.0, 90.0)
        assert unit.tolist() == [[0.0, 0.5, 1.0]]

    def test_constant_field_maps_to_zeros(self):
        vmin, vmax, unit = normalize(make_field([[7.0, 7.0], [7.0, 7.0]]))
        assert (vmin, vmax) == (7.0, 7.0)
        assert not unit.any()

    def test_monotone(self):
        rng = np.random.default_rng(4)
        values = rng.uniform(-100, 100, (1, 256))
        _, _, unit = normalize(make_field(values))
        order = np.argsort(values[0], kind="stable")
        assert (np.diff(unit[0][order]) >= 0).all()

    def test_quantized_round_trip_within_half_step(self):
        field = random_field((32, 32), seed=12)
        vmin, vmax, unit = normalize(field)
        recovered = dequantize(quantize(unit), vmin, vmax)
        tol = (vmax - vmin) / QUANT_MAX / 2 + 1e-12
        assert np.abs(recovered - field.values).max() <= tol


class TestSliceTiles:
    def test_512_grid_makes_four_unpadded_tiles(self):
        tiles = slice_tiles(random_field((512, 512), seed=1), tile_size=256)
        assert len(tiles) == 4
        assert all(t.pad_right == 0 and t.pad_top == 0 for t in tiles)
        assert {(t.row, t.col) for t in tiles} == {(0, 0), (0, 1), (1, 0), (1, 1)}

    def test_500_grid_pads_edge_tiles_by_12(self):
        tiles = slice_tiles(random_field((500, 500), seed=2), tile_size=256)
        assert len(tiles) == 4
        by_coord = {(t.row, t.col): t for t in tiles}
        assert by_coord[(0, 0)].pad_right == 0 and by_coord[(0, 0)].pad_top == 0
        assert by_coord[(0, 1)].pad_right == 12 and by_coord[(0, 1)].pad_top == 0
        assert by_coord[(1, 0)].pad_right == 0 and by_coord[(1, 0)].pad_top == 12
        assert by_coord[(1, 1)].pad_right == 12 and by_coord[(1, 1)].pad_top == 12
        assert all(t.width == 256 and t.height == 256 for t in tiles)

    def test_padded_cells_are_zero_pixels(self):
        tiles = slice_tiles(random_field((10, 10), seed=3, lo=10.0, hi=20.0), tile_size=8)
        by_coord = {(t.row, t.col): t for t in tiles}
        edge = by_coord[(1, 1)]
        assert not edge.height_image[:, -edge.pad_right :].any()
        assert not edge.height_image[-edge.pad_top :, :].any()

    def test_tile_origins_follow_grid(self):
        field = random_field((300, 200), seed=4)
        tiles = slice_tiles(field, tile_size=128)
        for t in tiles:
            assert t.origin_x == field.origin_x + t.col * 128 * field.cell_size
            assert t.origin_y == field.origin_y + t.row * 128 * field.cell_size

    def test_global_normalization_bounds_shared(self):
        field = random_field((300, 300), seed=5)
        tiles = slice_tiles(field, tile_size=128)
        assert {(t.norm_min, t.norm_max) for t in tiles} == {
            (field.values.min(), field.values.max())
        }

    def test_per_tile_normalization_override(self):
        field = random_field((16, 16), seed=6)
        tiles = slice_tiles(field, tile_size=8, per_tile_norm=True)
        for t in tiles:
            sub = field.values[t.row * 8 : (t.row + 1) * 8, t.col * 8 : (t.col + 1) * 8]
            assert (t.norm_min, t.norm_max) == (sub.min(), sub.max())

    def test_every_cell_lands_in_exactly_one_tile(self):
        field = random_field((70, 45), seed=7)
        tiles = slice_tiles(field, tile_size=32)
        coverage = np.zeros((70, 45), dtype=int)
        for t in tiles:
            rows = t.height - t.pad_top
            cols = t.width - t.pad_right
            coverage[t.row * 32 : t.row * 32 + rows, t.col * 32 : t.col * 32 + cols] += 1
        assert (coverage == 1).all()

    def test_color_geometry_mismatch_rejected(self):
        field = random_field((16, 16), seed=8)
        color = np.zeros((8, 8, 3), dtype=np.uint8)
        with pytest.raises(ValueError, match="color geometry"):
            slice_tiles(field, color=color)

    def test_color_slices_alongside_heights(self):
        field = random_field((10, 10), seed=9)
        rng = np.random.default_rng(9)
        color = rng.integers(0, 255, (10, 10, 3), dtype=np.uint8)
        tiles = slice_tiles(field, color=color, tile_size=8)
        by_coord = {(t.row, t.col): t for t in tiles}
        assert np.array_equal(by_coord[(0, 0)].color_image, color[:8, :8])
        edge = by_coord[(1, 1)]
        assert np.array_equal(edge.color_image[:2, :2], color[8:, 8:])
        assert not edge.color_image[2:, :].any()


class TestSidecars:
    def test_round_trip(self, tmp_path):
        field = random_field((20, 30), seed=10)
        tile = slice_tiles(field, tile_size=16)[3]
        path = tmp_path / tile.sidecar_file
        write_sidecar(tile, path)
        meta = read_sidecar(path)
        for key in ("row", "col", "origin_x", "origin_y", "cell_size",
                    "norm_min", "norm_max", "pad_right", "pad_top"):
            assert meta[key] == getattr(tile, key)

    def test_missing_key_rejected(self, tmp_path):
        field = random_field((8, 8), seed=11)
        tile = slice_tiles(field, tile_size=8)[0]
        path = tmp_path / "meta.txt"
        write_sidecar(tile, path)
        lines = [l for l in path.read_text().splitlines() if not l.startswith("norm_max=")]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(TilesetError, match="missing key: norm_max"):
            read_sidecar(path)


class TestWriteTileset:
    def test_single_tile_emits_three_files(self, tmp_path):
        field = random_field((8, 8), seed=13)
        tiles = slice_tiles(field, tile_size=8)
        index = build_tile_index(field, tiles)
        manifest = write_tileset(tiles, index, tmp_path)
        assert sorted(manifest) == ["index.txt", "tile_0_0.txt", "tile_0_0_h.png"]
        assert sorted(p.name for p in tmp_path.iterdir()) == sorted(manifest)

    def test_four_tile_index_matches_directory(self, tmp_path):
        field = random_field((16, 16), seed=14)
        tiles = slice_tiles(field, tile_size=8)
        index = build_tile_index(field, tiles)
        write_tileset(tiles, index, tmp_path)
        reread = read_tile_index(tmp_path / "index.txt")
        assert len(reread.entries) == 4
        on_disk = {p.name for p in tmp_path.iterdir()}
        for e in reread.entries:
            assert e.height_file in on_disk

    def test_written_set_reads_back_identically(self, tmp_path):
        field = random_field((20, 12), seed=15)
        rng = np.random.default_rng(15)
        color = rng.integers(0, 255, (20, 12, 3), dtype=np.uint8)
        tiles = slice_tiles(field, color=color, tile_size=8)
        index = build_tile_index(field, tiles)
        write_tileset(tiles, index, tmp_path)
        back_tiles, back_index = read_tileset(tmp_path)
        assert back_index == index
        by_coord = {(t.row, t.col): t for t in back_tiles}
        for t in tiles:
            b = by_coord[(t.row, t.col)]
            assert np.array_equal(b.height_image, t.height_image)
            assert np.array_equal(b.color_image, t.color_image)
            assert (b.norm_min, b.norm_max) == (t.norm_min, t.norm_max)
            assert (b.pad_right, b.pad_top) == (t.pad_right, t.pad_top)


class TestReassemble:
    def test_single_unpadded_tile_is_identity_within_quantization(self):
        field = random_field((64, 64), seed=16)
        tiles = slice_tiles(field, tile_size=64)
        index = build_tile_index(field, tiles)
        out = reassemble(tiles, index)
        step = (field.values.max() - field.values.min()) / QUANT_MAX
        assert np.abs(out.values - field.values).max() <= step

    def test_300_by_200_round_trip_within_quantization_step(self):
        field = random_field((200, 300), seed=17)
        tiles = slice_tiles(field, tile_size=128)
        index = build_tile_index(field, tiles)
        out = reassemble(tiles, index)
        assert (out.height, out.width) == (200, 300)
        assert (out.origin_x, out.origin_y) == (field.origin_x, field.origin_y)
        step = (field.values.max() - field.values.min()) / QUANT_MAX
        assert np.abs(out.values - field.values).max() <= step

    def test_missing_tile_rejected(self):
        field = random_field((16, 16), seed=18)
        tiles = slice_tiles(field, tile_size=8)
        index = build_tile_index(field, tiles)
        with pytest.raises(TilesetError, match=r"missing tile \(1, 1\)"):
            reassemble([t for t in tiles if (t.row, t.col) != (1, 1)], index)

    def test_duplicate_tile_rejected(self):
        field = random_field((16, 16), seed=19)
        tiles = slice_tiles(field, tile_size=8)
        index = build_tile_index(field, tiles)
        with pytest.raises(TilesetError, match="duplicate tile"):
            reassemble(tiles + [tiles[0]], index)

    def test_round_trip_through_disk(self, tmp_path):
        field = random_field((100, 90), seed=20)
        tiles = slice_tiles(field, tile_size=32)
        index = build_tile_index(field, tiles)
        write_tileset(tiles, index, tmp_path)
        back_tiles, back_index = read_tileset(tmp_path)
        out = reassemble(back_tiles, back_index)
        step = (field.values.max() - field.values.min()) / QUANT_MAX
        assert np.abs(out.values - field.values).max() <= step
