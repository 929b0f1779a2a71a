"""Deterministic synthetic datasets: coastal scene, telemetry, fixtures.

The terrain scene is analytic (no RNG), so regenerating at the same size is
bit-identical; telemetry uses a fixed-seed generator. These feed the shipped
sample directory, the verification run, and the test suite.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from twinhub.metocean import ForecastCycle, ForecastSeries, serialize_series
from twinhub.terrain.raster import HeightField, write_height_field

SAMPLE_NODATA = -9999.0
SAMPLE_CELL_SIZE = 10.0
SAMPLE_ORIGIN = (10000.0, 6950000.0)  # arbitrary planar map coordinates
_COAST = 0.359  # gradient value of the zero-elevation shoreline


def terrain_scene(size: int = 96) -> HeightField:
    """Coastal scene: sea in the south-west, hills inland, nodata speckle.

    Roughly a quarter of the cells sit at or below sea level.
    """
    if size < 8:
        raise ValueError("scene size must be >= 8")
    u = np.linspace(0.0, 1.0, size)[None, :]
    v = np.linspace(0.0, 1.0, size)[:, None]
    gradient = 0.55 * u + 0.45 * v
    hills = (
        55.0 * np.sin(4.7 * u + 0.9) * np.cos(3.9 * v - 0.4)
        + 270.0 * np.exp(-(((u - 0.7) ** 2 + (v - 0.75) ** 2) / 0.02))
    )
    elevation = 640.0 * (gradient - _COAST) + hills
    # Sparse missing-return cells near the waterline, as coastal LIDAR has.
    speckle = (np.sin(57.0 * u) * np.sin(43.0 * v) > 0.998) & (elevation < 12.0)
    elevation = np.where(speckle, SAMPLE_NODATA, elevation)
    return HeightField(
        width=size,
        height=size,
        origin_x=SAMPLE_ORIGIN[0],
        origin_y=SAMPLE_ORIGIN[1],
        cell_size=SAMPLE_CELL_SIZE,
        values=elevation,
        nodata=SAMPLE_NODATA,
    )


def contour_rows(size: int = 96) -> list[tuple[float, float, float]]:
    """Depth contour vertices on lines parallel to the shoreline."""
    extent = (size - 1) * SAMPLE_CELL_SIZE
    rows = []
    for offset, depth in ((0.015, 3.0), (0.05, 9.0), (0.10, 20.0),
                          (0.17, 38.0), (0.26, 70.0), (0.36, 120.0)):
        s = _COAST - offset
        for w in range(48):
            u = (w / 47.0) * min(1.0, s / 0.55)
            vv = (s - 0.55 * u) / 0.45
            if not (0.0 <= vv <= 1.0):
                continue
            rows.append(
                (
                    SAMPLE_ORIGIN[0] + u * extent,
                    SAMPLE_ORIGIN[1] + vv * extent,
                    depth,
                )
            )
    return rows


def write_contours_csv(rows, path) -> None:
    lines = ["x,y,depth"] + [f"{x!r},{y!r},{d!r}" for x, y, d in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def color_image(field: HeightField) -> np.ndarray:
    """Pseudo-aerial RGB derived from elevation; (height, width, 3) uint8."""
    e = field.values
    h, w = e.shape
    rgb = np.zeros((h, w, 3), dtype=np.float64)
    sea = (e <= 0.0) | (e == field.nodata)
    land = ~sea
    # Sea: deep blue shading toward the coast.
    rgb[sea] = [38.0, 70.0, 140.0]
    coastal = sea & (e > -15.0) & (e != field.nodata)
    rgb[coastal] = [64.0, 120.0, 170.0]
    # Land: green lowlands to grey-brown peaks.
    t = np.clip(e / max(float(e.max()), 1.0), 0.0, 1.0)
    rgb[land, 0] = 70.0 + 120.0 * t[land]
    rgb[land, 1] = 130.0 - 40.0 * t[land]
    rgb[land, 2] = 60.0 + 60.0 * t[land]
    return np.clip(rgb, 0, 255).astype(np.uint8)


def write_color_png(color: np.ndarray, path) -> None:
    from PIL import Image

    Image.fromarray(np.flipud(color)).save(path, format="PNG")


def telemetry_csv_text(
    n: int = 100, step_s: float = 0.1, seed: int = 7,
    start_iso: str = "2024-03-01T12:00:00",
) -> str:
    """Turbine-like channels: wind speed, power, rotor speed."""
    rng = np.random.default_rng(seed)
    lines = ["time,wind_speed,power,rotor_rpm"]
    from datetime import datetime, timedelta, timezone

    start = datetime.fromisoformat(start_iso).replace(tzinfo=timezone.utc)
    for i in range(n):
        stamp = start + timedelta(seconds=i * step_s)
        wind = 9.0 + 2.5 * math.sin(i / 9.0) + float(rng.normal(0.0, 0.3))
        power = max(0.0, 80.0 * wind**3 / 12.0**3 * 12.0)
        rpm = 11.0 + 0.4 * math.sin(i / 5.0) + float(rng.normal(0.0, 0.05))
        iso = stamp.isoformat().replace("+00:00", "Z")
        lines.append(f"{iso},{wind:.3f},{power:.1f},{rpm:.3f}")
    return "\n".join(lines) + "\n"


def forecast_fixture_series(
    params=("x_wind_10m", "y_wind_10m"),
    cycle: ForecastCycle | None = None,
) -> list[ForecastSeries]:
    cycle = cycle or ForecastCycle(2024, 3, 1, 6)
    out = []
    for p_idx, param in enumerate(params):
        values = [
            round(
                8.0
                + 3.0 * math.sin(2 * math.pi * h / 24.0 + p_idx)
                + 0.8 * math.sin(2 * math.pi * h / 6.1),
                3,
            )
            for h in range(61)
        ]
        out.append(
            ForecastSeries(
                param=param, cycle=cycle, lead_hours=range(61), values=values,
                units="m/s",
            )
        )
    return out


def manifest_text(field: HeightField, count: int = 5) -> str:
    """Place turbines on high ground along the inland ridge."""
    lines = ["# asset_id x y z yaw model_ref"]
    extent = (field.width - 1) * field.cell_size
    for i in range(count):
        u = 0.55 + 0.08 * i
        v = 0.80 - 0.06 * i
        x = field.origin_x + u * extent
        y = field.origin_y + v * extent
        yaw = (225.0 + 12.0 * i) % 360.0
        lines.append(f"T{i + 1:02d} {x:.1f} {y:.1f} 0.0 {yaw:.1f} turbine_generic")
    return "\n".join(lines) + "\n"


SERVE_CONFIG_TEMPLATE = """\
# gateway configuration for the shipped sample dataset
host=127.0.0.1
port=8750
tile_dir=tiles
forecast.params=x_wind_10m,y_wind_10m
forecast.fixture=forecast.txt
forecast.refresh_s=3600
source.turbine1.csv=telemetry.csv
source.turbine1.timestamp_column=time
source.turbine1.channels=wind_speed,power,rotor_rpm
source.turbine1.speed=10
source.turbine1.loop=true
"""

VERIFY_CONFIG_TEMPLATE = """\
# end-to-end verification against the shipped sample dataset
raster=terrain.grid
contours=contours.csv
color=aerial.png
telemetry_csv=telemetry.csv
forecast_fixture=forecast.txt
host=127.0.0.1
port=0
clients=4
poll_period_s=0.2
replay_speed=5
determinism_size=2048
tile_size=256
sea_level=0.0
knn_k=4
idw_power=2.0
"""


def write_sample_dataset(out_dir, size: int = 96, seed: int = 7) -> list[str]:
    """Write the full sample dataset; returns the file names written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    field = terrain_scene(size)
    write_height_field(field, out_dir / "terrain.grid")
    write_contours_csv(contour_rows(size), out_dir / "contours.csv")
    write_color_png(color_image(field), out_dir / "aerial.png")
    (out_dir / "telemetry.csv").write_text(telemetry_csv_text(seed=seed))
    (out_dir / "forecast.txt").write_text(
        serialize_series(forecast_fixture_series())
    )
    (out_dir / "assets.txt").write_text(manifest_text(field))
    (out_dir / "serve.config").write_text(SERVE_CONFIG_TEMPLATE)
    (out_dir / "verify.config").write_text(VERIFY_CONFIG_TEMPLATE)
    return [
        "terrain.grid", "contours.csv", "aerial.png", "telemetry.csv",
        "forecast.txt", "assets.txt", "serve.config", "verify.config",
    ]
