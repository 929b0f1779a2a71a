"""Poll client behavior and the assembled gateway runtime."""

import threading
import time
from datetime import datetime, timedelta, timezone

import pytest

from twinhub.client import poll_client
from twinhub.config import load_serve_config
from twinhub.gateway import EndpointRegistry, SnapshotStore, serve
from twinhub.runtime import GatewayRuntime
from twinhub.sampledata import (
    forecast_fixture_series,
    telemetry_csv_text,
)
from twinhub.metocean import serialize_series
from twinhub.telemetry import ReplaySchedule, ReplayWorker, TelemetryRecord


def rec(offset_s=0.0, **values):
    return TelemetryRecord(
        source_id="turbine1",
        timestamp=datetime(2024, 3, 1, 12, tzinfo=timezone.utc)
        + timedelta(seconds=offset_s),
        values=values or {"wind_speed": 7.2},
    )


@pytest.fixture
def snapshot_server():
    store = SnapshotStore()
    store.register("turbine1")
    server = serve(EndpointRegistry().add_snapshots(store), host="127.0.0.1", port=0)
    yield server, store
    server.stop()


class TestPollClient:
    def test_static_snapshot_ten_polls(self, snapshot_server):
        server, store = snapshot_server
        store.publish("turbine1", rec())
        report = poll_client(
            f"{server.base_url}/snapshot/turbine1", period_s=0.03, duration_s=0.32
        )
        assert report.polls >= 10
        assert report.successes == report.polls
        assert set(report.sequences) == {1}
        assert report.last_document["values"]["wind_speed"] == 7.2

    def test_sequences_track_replay(self, snapshot_server):
        server, store = snapshot_server
        records = tuple(rec(i, n=float(i)) for i in range(6))
        worker = ReplayWorker(
            ReplaySchedule(records=records, speed=1.0), store.sink("turbine1")
        ).start()
        report = poll_client(
            f"{server.base_url}/snapshot/turbine1", period_s=0.5, duration_s=5.5
        )
        worker.join()
        assert report.sequences == sorted(report.sequences)
        assert len(set(report.sequences)) >= 4

    def test_server_down_mid_run_records_failures(self):
        store = SnapshotStore()
        store.publish("turbine1", rec())
        server = serve(
            EndpointRegistry().add_snapshots(store), host="127.0.0.1", port=0
        )
        url = f"{server.base_url}/snapshot/turbine1"

        def stopper():
            time.sleep(0.3)
            server.stop()

        t = threading.Thread(target=stopper)
        t.start()
        report = poll_client(url, period_s=0.05, duration_s=0.8, timeout_s=0.5)
        t.join()
        assert report.successes > 0
        assert report.errors  # the window after shutdown
        assert report.polls == report.successes + len(report.errors)

    def test_slow_endpoint_delays_but_never_overlaps(self):
        registry = EndpointRegistry()
        in_flight = []
        overlaps = []
        lock = threading.Lock()

        def slow():
            with lock:
                in_flight.append(1)
                if len(in_flight) > 1:
                    overlaps.append(True)
            time.sleep(0.25)
            with lock:
                in_flight.pop()
            return {"ok": True}

        registry.add_custom("/slow", slow)
        server = serve(registry, host="127.0.0.1", port=0)
        try:
            report = poll_client(
                f"{server.base_url}/slow", period_s=0.05, duration_s=1.0
            )
        finally:
            server.stop()
        assert not overlaps
        # 0.25 s responses cap the rate well below the 0.05 s period.
        assert report.polls <= 5

    def test_bad_period_rejected(self):
        with pytest.raises(ValueError):
            poll_client("http://127.0.0.1:1/x", period_s=0.0, duration_s=0.1)


@pytest.fixture
def sample_runtime(tmp_path):
    (tmp_path / "telemetry.csv").write_text(telemetry_csv_text(n=20, step_s=0.05))
    (tmp_path / "forecast.txt").write_text(
        serialize_series(forecast_fixture_series())
    )
    config_path = tmp_path / "serve.config"
    config_path.write_text(
        "host=127.0.0.1\nport=0\n"
        "forecast.params=x_wind_10m,y_wind_10m\n"
        "forecast.fixture=forecast.txt\n"
        "source.turbine1.csv=telemetry.csv\n"
        "source.turbine1.timestamp_column=time\n"
        "source.turbine1.channels=wind_speed,power,rotor_rpm\n"
        "source.turbine1.speed=20\n"
    )
    runtime = GatewayRuntime(load_serve_config(config_path)).prepare().start()
    yield runtime
    runtime.stop()


class TestGatewayRuntime:
    def test_snapshot_live_after_first_record(self, sample_runtime):
        base = sample_runtime.server.base_url
        report = poll_client(f"{base}/snapshot/turbine1", period_s=0.05, duration_s=1.2)
        assert report.successes >= 1
        assert report.last_document["values"]["wind_speed"] > 0

    def test_tile_dir_config_serves_terrain_index(self, tmp_path):
        import numpy as np

        from twinhub.terrain import build_tile_index, slice_tiles, write_tileset
        from twinhub.terrain.raster import MergedField

        field = MergedField(
            width=16, height=16, origin_x=0.0, origin_y=0.0, cell_size=10.0,
            values=np.linspace(0, 100, 256).reshape(16, 16),
        )
        tiles = slice_tiles(field, tile_size=8)
        write_tileset(tiles, build_tile_index(field, tiles), tmp_path / "tiles")
        (tmp_path / "t.csv").write_text(telemetry_csv_text(n=3, step_s=0.01))
        config = tmp_path / "serve.config"
        config.write_text(
            "host=127.0.0.1\nport=0\ntile_dir=tiles\n"
            "source.t1.csv=t.csv\nsource.t1.timestamp_column=time\n"
            "source.t1.channels=wind_speed\n"
        )
        runtime = GatewayRuntime(load_serve_config(config)).prepare().start()
        try:
            report = poll_client(
                f"{runtime.server.base_url}/terrain/index",
                period_s=0.05, duration_s=0.15,
            )
            assert report.last_document is not None
            assert len(report.last_document["tiles"]) == 4
        finally:
            runtime.stop()

    def test_forecast_served_from_fixture(self, sample_runtime):
        base = sample_runtime.server.base_url
        report = poll_client(f"{base}/forecast/x_wind_10m", period_s=0.05, duration_s=0.2)
        assert report.last_document is not None
        assert len(report.last_document["values"]) == 61

    def test_replay_completes_with_all_records(self, sample_runtime):
        sample_runtime.wait_replays(timeout_s=10.0)
        snap = sample_runtime.store.get("turbine1")
        assert snap.sequence == 20
