"""End-to-end verification of the assembled backend on a sample dataset.

Runs every check in isolation (one failure does not stop the rest), prints
a pass/fail table, and reports an overall exit code: 0 all green, 1 any
failure.
"""

from __future__ import annotations

import hashlib
import tempfile
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from twinhub.client import poll_client
from twinhub.config import VerifyConfig
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
from twinhub.pipeline import build_terrain_tiles
from twinhub.sampledata import terrain_scene, contour_rows, write_contours_csv
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
from twinhub.terrain.raster import HeightField, MergedField
from twinhub.terrain.spatial import KdTree
from twinhub.terrain.tiles import QUANT_MAX

URL_GOLDEN_CYCLE = ForecastCycle(2024, 1, 15, 6)
URL_GOLDEN_PARAM = ParamRequest(
    name="x_wind_10m",
    ranges=(
        DimRange(0, 1, 60),
        DimRange(0, 1, 0),
        DimRange(0, 1, 0),
        DimRange(100, 1, 100),
        DimRange(200, 1, 200),
    ),
)
URL_GOLDEN = (
    "https://thredds.met.no/thredds/dodsC/mepslatest/meps_lagged_6_h_vc_2_5km_"
    "20240115T06Z.ncml.ascii?"
    "x_wind_10m%5B0:1:60%5D%5B0:1:0%5D%5B0:1:0%5D%5B100:1:100%5D%5B200:1:200%5D"
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed_s: float


def _scan_knn(px, py, qx, qy, k):
    """Independent linear-scan oracle with (distance, index) tie ordering."""
    dx = px - qx
    dy = py - qy
    d2 = dx * dx + dy * dy
    order = np.lexsort((np.arange(px.shape[0]), d2))[:k]
    return [(float(d2[i]), int(i)) for i in order]


def check_forecast_constants(cfg: VerifyConfig) -> str:
    body = cfg.forecast_fixture.read_text()
    series = parse_ascii(body, infer_requests(body))
    for s in series:
        if s.lead_hours != tuple(range(61)):
            raise AssertionError(
                f"{s.param}: expected hourly leads 0..60, got {len(s.lead_hours)}"
            )
    try:
        ForecastCycle(2024, 1, 15, 5)
    except ValueError:
        pass
    else:
        raise AssertionError("cycle hour 5 must be rejected")
    now = datetime(2024, 3, 1, tzinfo=timezone.utc)
    for minutes in range(0, 48 * 60, 173):
        cycle = latest_cycle(now + timedelta(minutes=minutes))
        if cycle.hour not in CYCLE_HOURS:
            raise AssertionError(f"latest_cycle produced hour {cycle.hour}")
    return f"{len(series)} params x 61 hourly leads; cycle hours confined to {CYCLE_HOURS}"


def check_url_golden(cfg: VerifyConfig) -> str:
    url = build_url(URL_GOLDEN_CYCLE, [URL_GOLDEN_PARAM])
    if url != URL_GOLDEN:
        raise AssertionError(f"URL mismatch:\n  built:    {url}\n  expected: {URL_GOLDEN}")
    return "request URL reproduces the reference concatenation byte-exactly"


def check_knn_oracle(cfg: VerifyConfig) -> str:
    rng = np.random.default_rng(20240115)
    sets = 100
    queries = 50
    for trial in range(sets):
        n = int(rng.integers(2, 2001))
        if trial % 7 == 0:
            # Gridded coordinates provoke exact distance ties.
            px = rng.integers(0, 40, n).astype(np.float64)
            py = rng.integers(0, 40, n).astype(np.float64)
        else:
            px = rng.uniform(-1e4, 1e4, n)
            py = rng.uniform(-1e4, 1e4, n)
        tree = KdTree(px, py)
        k = int(rng.integers(1, 9))
        for _ in range(queries):
            qx = float(rng.uniform(px.min() - 50, px.max() + 50))
            qy = float(rng.uniform(py.min() - 50, py.max() + 50))
            got = tree.query(qx, qy, k)
            want = _scan_knn(px, py, qx, qy, min(k, n))
            if got != want:
                raise AssertionError(
                    f"set {trial} (n={n}, k={k}) query ({qx}, {qy}): "
                    f"tree {got} != scan {want}"
                )
    return f"{sets} point sets x {queries} queries match the linear scan exactly"


def check_terrain_round_trip(cfg: VerifyConfig) -> str:
    rng = np.random.default_rng(300200)
    field = MergedField(
        width=300, height=200, origin_x=0.0, origin_y=0.0, cell_size=10.0,
        values=rng.uniform(-40.0, 620.0, (200, 300)),
    )
    tiles = slice_tiles(field, tile_size=128)
    out = reassemble(tiles, build_tile_index(field, tiles))
    step = (field.values.max() - field.values.min()) / QUANT_MAX
    worst = float(np.abs(out.values - field.values).max())
    if worst > step:
        raise AssertionError(f"round-trip error {worst} exceeds one step {step}")
    land = HeightField(
        width=40, height=30, origin_x=0.0, origin_y=0.0, cell_size=5.0,
        values=rng.uniform(1.0, 500.0, (30, 40)), nodata=-9999.0,
    )
    merged = merge_bathymetry(land, ocean_mask(land, sea_level=0.0), index=None)
    if not np.array_equal(merged.values, land.values):
        raise AssertionError("empty-mask merge is not the identity")
    return f"max round-trip error {worst:.4g} <= one 16-bit step {step:.4g}; empty-mask merge exact"


def _hash_dir(path: Path) -> dict[str, str]:
    return {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(path.iterdir())
    }


def check_pipeline_determinism(cfg: VerifyConfig) -> str:
    size = cfg.determinism_size
    with tempfile.TemporaryDirectory(prefix="twinhub-verify-") as tmp:
        tmp = Path(tmp)
        write_contours_csv(contour_rows(size), tmp / "contours.csv")
        from twinhub.terrain.raster import write_height_field

        write_height_field(terrain_scene(size), tmp / "terrain.grid")
        summaries = []
        for run in ("run1", "run2"):
            summaries.append(
                build_terrain_tiles(
                    tmp / "terrain.grid",
                    tmp / "contours.csv",
                    tmp / run,
                    tile_size=cfg.tile_size,
                    sea_level=cfg.sea_level,
                    k=cfg.knn_k,
                    power=cfg.idw_power,
                )
            )
        h1, h2 = _hash_dir(tmp / "run1"), _hash_dir(tmp / "run2")
        if h1 != h2:
            differing = [n for n in h1 if h1.get(n) != h2.get(n)]
            raise AssertionError(f"outputs differ between runs: {differing[:5]}")
        n_files = len(h1)
    return (
        f"two builds of a {size}x{size} scene agree on all {n_files} output files "
        f"({summaries[0].tile_count} tiles)"
    )


def check_realtime_round_trip(cfg: VerifyConfig) -> str:
    store = SnapshotStore()
    store.register("turbine1")
    server = serve(EndpointRegistry().add_snapshots(store), host=cfg.host, port=0)
    try:
        record = TelemetryRecord(
            source_id="turbine1",
            timestamp=datetime.now(timezone.utc),
            values={"wind_speed": 7.2},
        )
        published_at = time.monotonic()
        sequence = store.publish("turbine1", record)
        poll_started = time.monotonic()
        report = poll_client(
            f"{server.base_url}/snapshot/turbine1", period_s=0.02, duration_s=1.0
        )
        if report.successes < 1 or report.last_document is None:
            raise AssertionError(f"no successful poll: {report.errors[:2]}")
        doc = report.last_document
        if doc["values"].get("wind_speed") != 7.2 or doc["sequence"] != 1:
            raise AssertionError(f"unexpected document {doc}")
        elapsed = (poll_started - published_at) + (report.first_success_offset_s or 0.0)
        if elapsed > 0.2:
            raise AssertionError(f"first delivery took {elapsed * 1000:.0f} ms > 200 ms")
        if sequence != 1:
            raise AssertionError(f"first publish got sequence {sequence}")
    finally:
        server.stop()
    return f"wind_speed 7.2 @ sequence 1 delivered in {elapsed * 1000:.0f} ms"


def check_multi_client_consistency(cfg: VerifyConfig) -> str:
    records = load_csv(
        cfg.telemetry_csv, "turbine1", "time", ["wind_speed", "power", "rotor_rpm"]
    )
    schedule = ReplaySchedule(records=tuple(records), speed=cfg.replay_speed)
    store = SnapshotStore()
    store.register("turbine1")
    server = serve(EndpointRegistry().add_snapshots(store), host=cfg.host, port=0)
    try:
        duration = schedule.span_s / schedule.speed + 1.5
        url = f"{server.base_url}/snapshot/turbine1"
        reports = [None] * cfg.clients

        def run_client(slot):
            reports[slot] = poll_client(
                url, period_s=cfg.poll_period_s, duration_s=duration
            )

        threads = [
            threading.Thread(target=run_client, args=(i,)) for i in range(cfg.clients)
        ]
        worker = ReplayWorker(schedule, store.sink("turbine1")).start()
        for t in threads:
            t.start()
        worker.join()
        for t in threads:
            t.join()
        finals = []
        for i, report in enumerate(reports):
            if report.sequences != sorted(report.sequences):
                raise AssertionError(f"client {i} saw a sequence decrease")
            if report.last_document is None:
                raise AssertionError(f"client {i} never got a document")
            doc = report.last_document
            finals.append((doc["sequence"], doc["timestamp"], tuple(sorted(doc["values"].items()))))
        if len(set(finals)) != 1:
            raise AssertionError(f"final snapshots disagree: {set(finals)}")
        if finals[0][0] != len(records):
            raise AssertionError(
                f"final sequence {finals[0][0]} != published count {len(records)}"
            )
    finally:
        server.stop()
    return (
        f"{cfg.clients} clients: non-decreasing sequences, identical final snapshot "
        f"at sequence {finals[0][0]}"
    )


def check_replay_timing(cfg: VerifyConfig) -> str:
    records = load_csv(
        cfg.telemetry_csv, "turbine1", "time", ["wind_speed", "power", "rotor_rpm"]
    )
    if len(records) != 100:
        raise AssertionError(f"sample archive has {len(records)} records, want 100")
    schedule = ReplaySchedule(records=tuple(records), speed=10.0)
    expected = schedule.span_s / schedule.speed
    seen = []
    start = time.monotonic()
    report = replay(schedule, seen.append)
    elapsed = time.monotonic() - start
    if not report.completed or report.delivered != 100:
        raise AssertionError(f"replay incomplete: {report}")
    if seen != list(records):
        raise AssertionError("replay reordered or dropped records")
    if not (0.9 <= elapsed <= 1.1) or abs(elapsed - expected) > 0.1 * expected + 0.05:
        raise AssertionError(
            f"replay took {elapsed:.3f} s, expected {expected:.3f} s +-10%"
        )
    return f"100 records over {schedule.span_s:.1f} s replayed at speed 10 in {elapsed:.3f} s"


def check_adapter_conformance(cfg: VerifyConfig) -> str:
    t0 = datetime(2024, 3, 1, tzinfo=timezone.utc)
    script = [
        TelemetryRecord(
            source_id="float1",
            timestamp=t0 + timedelta(seconds=i),
            values={"heave": float(i)},
        )
        for i in range(5)
    ]
    count = run_adapter_conformance(
        lambda: (mock_stream_adapter("auth-code", script), "auth-code"),
        expect_records=5,
    )
    return f"mock adapter passed auth gating, ordering, validity ({count} records)"


CHECKS = [
    ("forecast-constants", check_forecast_constants),
    ("url-golden", check_url_golden),
    ("knn-oracle", check_knn_oracle),
    ("terrain-round-trip", check_terrain_round_trip),
    ("pipeline-determinism", check_pipeline_determinism),
    ("realtime-round-trip", check_realtime_round_trip),
    ("multi-client-consistency", check_multi_client_consistency),
    ("replay-timing", check_replay_timing),
    ("adapter-conformance", check_adapter_conformance),
]


def run_verify(cfg: VerifyConfig, out=print) -> list[CheckResult]:
    results = []
    out(f"verify: running {len(CHECKS)} checks")
    for i, (name, check) in enumerate(CHECKS, start=1):
        start = time.perf_counter()
        try:
            detail = check(cfg)
            passed = True
        except Exception as exc:
            detail = str(exc)
            passed = False
        elapsed = time.perf_counter() - start
        results.append(CheckResult(name=name, passed=passed, detail=detail, elapsed_s=elapsed))
        status = "PASS" if passed else "FAIL"
        out(f"[{i}/{len(CHECKS)}] {status} {name:<26} ({elapsed:6.2f} s)  {detail}")
    passed = sum(1 for r in results if r.passed)
    total_s = sum(r.elapsed_s for r in results)
    out(f"RESULT: {passed}/{len(results)} checks passed in {total_s:.1f} s")
    return results
