"""Acceptance criteria, one test per criterion, tolerances pinned.

Each test prints a single PASS line (visible with ``pytest -s`` or in
captured output); the ``verify`` CLI run in the final criterion prints the
same checks as a table.
"""

import hashlib
import subprocess
import sys
import threading
import time
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import pytest

from twinhub.cli import main
from twinhub.client import poll_client
from twinhub.gateway import EndpointRegistry, SnapshotStore, serve
from twinhub.metocean import (
    CYCLE_HOURS,
    DimRange,
    ForecastCycle,
    ParamRequest,
    build_url,
    infer_requests,
    latest_cycle,
    parse_ascii,
)
from twinhub.sampledata import contour_rows, terrain_scene, write_contours_csv
from twinhub.telemetry import (
    ReplaySchedule,
    ReplayWorker,
    TelemetryRecord,
    load_csv,
    mock_stream_adapter,
    replay,
    run_adapter_conformance,
)
from twinhub.terrain import (
    build_tile_index,
    merge_bathymetry,
    ocean_mask,
    reassemble,
    slice_tiles,
)
from twinhub.terrain.raster import HeightField, MergedField, write_height_field
from twinhub.terrain.spatial import KdTree
from twinhub.terrain.tiles import QUANT_MAX

SAMPLE_DIR = Path(__file__).resolve().parent.parent / "sample"
SAMPLE_CHANNELS = ["wind_speed", "power", "rotor_rpm"]


def ok(criterion, detail):
    print(f"ACCEPTANCE {criterion} PASS: {detail}")


def test_criterion_1_forecast_constants():
    start = time.perf_counter()
    body = (SAMPLE_DIR / "forecast.txt").read_text()
    series = parse_ascii(body, infer_requests(body))
    assert series, "fixture parses to at least one series"
    for s in series:
        assert s.lead_hours == tuple(range(61)), (
            f"{s.param}: expected 61 hourly leads 0..60"
        )
        assert len(s.values) == 61
    with pytest.raises(ValueError):
        ForecastCycle(2024, 1, 15, 5)
    base = datetime(2024, 5, 10, tzinfo=timezone.utc)
    for minutes in range(0, 3 * 24 * 60, 97):
        assert latest_cycle(base + timedelta(minutes=minutes)).hour in CYCLE_HOURS
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    ok(1, f"61 hourly leads per param; cycles confined to {CYCLE_HOURS} ({elapsed:.2f} s)")


def test_criterion_2_url_golden():
    start = time.perf_counter()
    param = ParamRequest(
        name="x_wind_10m",
        ranges=(
            DimRange(0, 1, 60),
            DimRange(0, 1, 0),
            DimRange(0, 1, 0),
            DimRange(100, 1, 100),
            DimRange(200, 1, 200),
        ),
    )
    expected = (
        "https://thredds.met.no/thredds/dodsC/mepslatest/meps_lagged_6_h_vc_2_5km_"
        "20240115T06Z.ncml.ascii?"
        "x_wind_10m%5B0:1:60%5D%5B0:1:0%5D%5B0:1:0%5D%5B100:1:100%5D%5B200:1:200%5D"
    )
    assert build_url(ForecastCycle(2024, 1, 15, 6), [param]) == expected
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    ok(2, "URL reproduces the reference concatenation byte-exactly")


def _scan_knn(px, py, qx, qy, k):
    dx = px - qx
    dy = py - qy
    d2 = dx * dx + dy * dy
    order = np.lexsort((np.arange(px.shape[0]), d2))[:k]
    return [(float(d2[i]), int(i)) for i in order]


def test_criterion_3_knn_oracle_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(1234)
    for trial in range(100):
        n = int(rng.integers(2, 2001))
        if trial % 9 == 0:
            px = rng.integers(0, 50, n).astype(np.float64)
            py = rng.integers(0, 50, n).astype(np.float64)
        else:
            px = rng.uniform(-5000, 5000, n)
            py = rng.uniform(-5000, 5000, n)
        tree = KdTree(px, py)
        k = int(rng.integers(1, 9))
        for _ in range(50):
            qx = float(rng.uniform(px.min() - 100, px.max() + 100))
            qy = float(rng.uniform(py.min() - 100, py.max() + 100))
            assert tree.query(qx, qy, k) == _scan_knn(px, py, qx, qy, min(k, n))
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    ok(3, f"100 sets x 50 queries equal the linear scan exactly ({elapsed:.1f} s)")


def test_criterion_4_terrain_round_trip():
    start = time.perf_counter()
    rng = np.random.default_rng(42)
    field = MergedField(
        width=300, height=200, origin_x=0.0, origin_y=0.0, cell_size=10.0,
        values=rng.uniform(-60.0, 700.0, (200, 300)),
    )
    tiles = slice_tiles(field, tile_size=128)
    out = reassemble(tiles, build_tile_index(field, tiles))
    step = (field.values.max() - field.values.min()) / QUANT_MAX
    worst = float(np.abs(out.values - field.values).max())
    assert worst <= step, f"per-cell error {worst} > {step}"

    land = HeightField(
        width=50, height=40, origin_x=0.0, origin_y=0.0, cell_size=5.0,
        values=rng.uniform(0.5, 400.0, (40, 50)), nodata=-9999.0,
    )
    merged = merge_bathymetry(land, ocean_mask(land, sea_level=0.0), index=None)
    assert np.array_equal(merged.values, land.values)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    ok(4, f"300x200 round-trip max error {worst:.4g} <= {step:.4g}; empty mask is identity")


def test_criterion_5_pipeline_determinism(tmp_path):
    start = time.perf_counter()
    write_height_field(terrain_scene(2048), tmp_path / "terrain.grid")
    write_contours_csv(contour_rows(2048), tmp_path / "contours.csv")
    args = [
        "terrain", "build",
        str(tmp_path / "terrain.grid"), str(tmp_path / "contours.csv"),
    ]
    assert main(args + ["-o", str(tmp_path / "run1")]) == 0
    assert main(args + ["-o", str(tmp_path / "run2")]) == 0

    def hashes(d):
        return {
            p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in Path(d).iterdir()
        }

    h1, h2 = hashes(tmp_path / "run1"), hashes(tmp_path / "run2")
    assert h1 == h2, "terrain build is not byte-deterministic"
    assert sum(1 for n in h1 if n.endswith("_h.png")) == 64
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    ok(5, f"two 2048x2048 builds byte-identical across {len(h1)} files ({elapsed:.1f} s)")


def test_criterion_6_realtime_round_trip():
    start = time.perf_counter()
    store = SnapshotStore()
    store.register("turbine1")
    server = serve(EndpointRegistry().add_snapshots(store), host="127.0.0.1", port=0)
    try:
        record = TelemetryRecord(
            source_id="turbine1",
            timestamp=datetime.now(timezone.utc),
            values={"wind_speed": 7.2},
        )
        published = time.monotonic()
        assert store.publish("turbine1", record) == 1
        poll_started = time.monotonic()
        report = poll_client(
            f"{server.base_url}/snapshot/turbine1", period_s=0.02, duration_s=1.0
        )
        assert report.successes >= 1
        doc = report.last_document
        assert doc["values"]["wind_speed"] == 7.2
        assert doc["sequence"] == 1
        delivery_ms = (
            (poll_started - published) + report.first_success_offset_s
        ) * 1000.0
        assert delivery_ms < 200.0, f"delivery took {delivery_ms:.0f} ms"
    finally:
        server.stop()
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    ok(6, f"wind_speed 7.2 at sequence 1 delivered in {delivery_ms:.0f} ms")


def test_criterion_7_multi_client_consistency():
    start = time.perf_counter()
    records = load_csv(SAMPLE_DIR / "telemetry.csv", "turbine1", "time", SAMPLE_CHANNELS)
    assert len(records) == 100
    schedule = ReplaySchedule(records=tuple(records), speed=5.0)
    store = SnapshotStore()
    store.register("turbine1")
    server = serve(EndpointRegistry().add_snapshots(store), host="127.0.0.1", port=0)
    try:
        url = f"{server.base_url}/snapshot/turbine1"
        duration = schedule.span_s / schedule.speed + 1.5
        reports = [None] * 4

        def client(slot):
            reports[slot] = poll_client(url, period_s=0.2, duration_s=duration)

        threads = [threading.Thread(target=client, args=(i,)) for i in range(4)]
        worker = ReplayWorker(schedule, store.sink("turbine1")).start()
        for t in threads:
            t.start()
        worker.join()
        for t in threads:
            t.join()
        finals = set()
        for report in reports:
            assert report.sequences == sorted(report.sequences), "sequence decreased"
            assert report.last_document is not None
            doc = report.last_document
            finals.add(
                (doc["sequence"], doc["timestamp"],
                 tuple(sorted(doc["values"].items())))
            )
        assert len(finals) == 1, f"clients disagree on the final snapshot: {finals}"
        assert next(iter(finals))[0] == 100
    finally:
        server.stop()
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    ok(7, f"4 clients saw monotone sequences and one final snapshot ({elapsed:.1f} s)")


def test_criterion_8_replay_timing():
    start = time.perf_counter()
    records = load_csv(SAMPLE_DIR / "telemetry.csv", "turbine1", "time", SAMPLE_CHANNELS)
    assert len(records) == 100
    schedule = ReplaySchedule(records=tuple(records), speed=10.0)
    expected = schedule.span_s / schedule.speed  # ~1 s for the 10 s archive
    seen = []
    t0 = time.monotonic()
    report = replay(schedule, seen.append)
    wall = time.monotonic() - t0
    assert report.completed and report.delivered == 100
    assert seen == list(records), "order or content changed"
    assert 0.9 <= wall <= 1.1, f"wall time {wall:.3f} s outside 1 s +-10%"
    assert abs(wall - expected) <= 0.1 * expected + 0.05
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    ok(8, f"100 records over {schedule.span_s:.1f} s at speed 10 took {wall:.3f} s")


def test_criterion_9_adapter_conformance():
    start = time.perf_counter()
    t0 = datetime(2024, 3, 1, tzinfo=timezone.utc)
    script = [
        TelemetryRecord(
            source_id="float1",
            timestamp=t0 + timedelta(seconds=i),
            values={"heave": 0.1 * i, "pitch": -0.05 * i if i else 0.01},
        )
        for i in range(5)
    ]
    count = run_adapter_conformance(
        lambda: (mock_stream_adapter("auth-code", script), "auth-code"),
        expect_records=5,
    )
    assert count == 5
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    ok(9, "mock adapter passes auth gating, ordering, and validity checks")


def test_criterion_10_end_to_end_verify():
    start = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "twinhub.cli", "verify",
         "--config", str(SAMPLE_DIR / "verify.config")],
        capture_output=True,
        text=True,
        timeout=180,
    )
    wall = time.perf_counter() - start
    assert proc.returncode == 0, f"verify failed:\n{proc.stdout}\n{proc.stderr}"
    assert "RESULT: 9/9 checks passed" in proc.stdout
    assert wall < 180.0, f"verify took {wall:.0f} s"
    ok(10, f"verify passed 9/9 on the shipped sample in {wall:.1f} s")
