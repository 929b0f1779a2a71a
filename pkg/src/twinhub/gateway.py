"""HTTP snapshot gateway: the serving edge of the backend.

Holds the latest telemetry snapshot per source (last writer wins, swapped
atomically), a per-parameter forecast cache, and an in-memory tile store,
and exposes them to any number of polling clients over plain GET endpoints:

    /health
    /endpoints
    /snapshot/{source_id}
    /forecast/{param}?horizon=H
    /terrain/index
    /terrain/tile/{row}/{col}/{kind}

Responses are UTF-8 JSON except tile bytes, which are served verbatim as
image/png. Readers never block on publishers beyond the snapshot swap, and
a served document always corresponds to exactly one publish call.
"""

from __future__ import annotations

import socket
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

import uvicorn
from fastapi import FastAPI, HTTPException, Response

from twinhub.metocean import ForecastSeries
from twinhub.telemetry import TelemetryRecord
from twinhub.terrain.tiles import TileIndex, read_tile_index

DEFAULT_HOST = "0.0.0.0"
DEFAULT_PORT = 8000


class UnknownSourceError(KeyError):
    """Source or parameter not registered with the gateway."""


class NotReadyError(Exception):
    """Registered source exists but has no data yet."""


@dataclass(frozen=True)
class Snapshot:
    """Latest complete record for one source plus its publish sequence."""

    source_id: str
    sequence: int
    server_time: datetime
    record: TelemetryRecord

    def document(self) -> dict:
        return {
            "source_id": self.source_id,
            "sequence": self.sequence,
            "server_time": self.server_time.isoformat(),
            "timestamp": self.record.timestamp.isoformat(),
            "values": dict(self.record.values),
        }


class SnapshotStore:
    """Last-writer-wins snapshot per source with atomic whole-document swap.

    Safe for many concurrent readers and multiple publishers; sequence
    numbers increase strictly per source.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._snapshots: dict[str, Snapshot] = {}
        self._registered: set[str] = set()

    def register(self, source_id: str) -> None:
        with self._lock:
            self._registered.add(source_id)

    def publish(self, source_id: str, record: TelemetryRecord) -> int:
        with self._lock:
            previous = self._snapshots.get(source_id)
            sequence = (previous.sequence if previous else 0) + 1
            self._snapshots[source_id] = Snapshot(
                source_id=source_id,
                sequence=sequence,
                server_time=datetime.now(timezone.utc),
                record=record,
            )
            self._registered.add(source_id)
            return sequence

    def sink(self, source_id: str) -> Callable[[TelemetryRecord], int]:
        """Publish callable bound to one source, usable as a replay sink."""
        return lambda record: self.publish(source_id, record)

    def get(self, source_id: str) -> Snapshot:
        with self._lock:
            snapshot = self._snapshots.get(source_id)
            if snapshot is not None:
                return snapshot
            if source_id in self._registered:
                raise NotReadyError(f"source {source_id!r} has no data yet")
        raise UnknownSourceError(source_id)

    def sources(self) -> list[str]:
        with self._lock:
            return sorted(self._registered)


class ForecastCache:
    """Latest ForecastSeries per configured parameter."""

    def __init__(self, params: list[str] | None = None):
        self._lock = threading.Lock()
        self._series: dict[str, ForecastSeries] = {}
        self._params: set[str] = set(params or [])

    def put(self, series: ForecastSeries) -> None:
        with self._lock:
            self._params.add(series.param)
            self._series[series.param] = series

    def get(self, param: str, horizon_hours: int | None = None) -> ForecastSeries:
        with self._lock:
            if param not in self._params:
                raise UnknownSourceError(param)
            series = self._series.get(param)
            if series is None:
                raise NotReadyError(f"forecast cache empty for {param!r}")
        if horizon_hours is None:
            return series
        return series.truncated(horizon_hours)

    def params(self) -> list[str]:
        with self._lock:
            return sorted(self._params)


class ForecastRefresher:
    """Background thread that reloads the forecast cache periodically."""

    def __init__(self, cache: ForecastCache, loader: Callable[[], list[ForecastSeries]],
                 period_s: float = 3600.0):
        self._cache = cache
        self._loader = loader
        self._period_s = period_s
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self.last_error: str | None = None

    def refresh_once(self) -> None:
        for series in self._loader():
            self._cache.put(series)

    def _run(self):
        while not self._stop.is_set():
            try:
                self.refresh_once()
                self.last_error = None
            except Exception as exc:  # keep serving stale data on failure
                self.last_error = str(exc)
            if self._stop.wait(self._period_s):
                return

    def start(self):
        self._thread.start()
        return self

    def stop(self):
        self._stop.set()
        self._thread.join(timeout=5.0)


class TileStore:
    """Tile set loaded into memory at startup and served byte-exact."""

    def __init__(self, tile_dir):
        tile_dir = Path(tile_dir)
        self.index: TileIndex = read_tile_index(tile_dir / "index.txt")
        self._bytes: dict[tuple[int, int, str], bytes] = {}
        for entry in self.index.entries:
            self._bytes[(entry.row, entry.col, "height")] = (
                tile_dir / entry.height_file
            ).read_bytes()
            if entry.color_file is not None:
                self._bytes[(entry.row, entry.col, "color")] = (
                    tile_dir / entry.color_file
                ).read_bytes()

    def tile_bytes(self, row: int, col: int, kind: str) -> bytes:
        if kind not in ("height", "color"):
            raise UnknownSourceError(kind)
        data = self._bytes.get((row, col, kind))
        if data is None:
            raise UnknownSourceError(f"tile ({row}, {col}, {kind})")
        return data

    def index_document(self) -> dict:
        return {
            "tile_size": self.index.tile_size,
            "rows": self.index.rows,
            "cols": self.index.cols,
            "origin_x": self.index.origin_x,
            "origin_y": self.index.origin_y,
            "cell_size": self.index.cell_size,
            "norm_min": self.index.norm_min,
            "norm_max": self.index.norm_max,
            "tiles": [
                {
                    "row": e.row,
                    "col": e.col,
                    "height_file": e.height_file,
                    "color_file": e.color_file,
                }
                for e in sorted(self.index.entries, key=lambda e: (e.row, e.col))
            ],
        }


class EndpointRegistry:
    """Endpoint paths and their providers; frozen once the app is built."""

    def __init__(self):
        self.snapshots: SnapshotStore | None = None
        self.forecasts: ForecastCache | None = None
        self.tiles: TileStore | None = None
        self._custom: list[tuple[str, Callable[[], dict]]] = []
        self._frozen = False

    def _check_mutable(self):
        if self._frozen:
            raise RuntimeError("registry is immutable after server start")

    def add_snapshots(self, store: SnapshotStore):
        self._check_mutable()
        self.snapshots = store
        return self

    def add_forecasts(self, cache: ForecastCache):
        self._check_mutable()
        self.forecasts = cache
        return self

    def add_tiles(self, store: TileStore):
        self._check_mutable()
        self.tiles = store
        return self

    def add_custom(self, path: str, provider: Callable[[], dict]):
        """Register an extra parameterless GET endpoint returning JSON."""
        self._check_mutable()
        if not path.startswith("/"):
            raise ValueError("endpoint paths start with '/'")
        if path in [p for p, _ in self._custom]:
            raise ValueError(f"duplicate endpoint path {path}")
        self._custom.append((path, provider))
        return self

    def freeze(self):
        self._frozen = True

    def paths(self) -> list[str]:
        paths = ["/health", "/endpoints"]
        if self.snapshots is not None:
            paths.append("/snapshot/{source_id}")
        if self.forecasts is not None:
            paths.append("/forecast/{param}")
        if self.tiles is not None:
            paths.extend(["/terrain/index", "/terrain/tile/{row}/{col}/{kind}"])
        paths.extend(p for p, _ in self._custom)
        return paths


def build_app(registry: EndpointRegistry) -> FastAPI:
    """Wire the registry into a FastAPI application."""
    registry.freeze()
    app = FastAPI(title="twinhub gateway", docs_url=None, redoc_url=None)

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/endpoints")
    def endpoints():
        return {"endpoints": registry.paths()}

    if registry.snapshots is not None:
        store = registry.snapshots

        @app.get("/snapshot/{source_id}")
        def get_snapshot(source_id: str):
            try:
                return store.get(source_id).document()
            except NotReadyError as exc:
                raise HTTPException(status_code=503, detail=str(exc)) from None
            except UnknownSourceError:
                raise HTTPException(
                    status_code=404, detail=f"unknown source {source_id!r}"
                ) from None

    if registry.forecasts is not None:
        cache = registry.forecasts

        @app.get("/forecast/{param}")
        def get_forecast(param: str, horizon: int | None = None):
            try:
                series = cache.get(param, horizon_hours=horizon)
            except NotReadyError as exc:
                raise HTTPException(status_code=503, detail=str(exc)) from None
            except UnknownSourceError:
                raise HTTPException(
                    status_code=404, detail=f"unknown parameter {param!r}"
                ) from None
            return {
                "param": series.param,
                "cycle": series.cycle.stamp() if series.cycle else None,
                "lead_hours": list(series.lead_hours),
                "values": list(series.values),
                "units": series.units,
            }

    if registry.tiles is not None:
        tiles = registry.tiles

        @app.get("/terrain/index")
        def get_tile_index():
            return tiles.index_document()

        @app.get("/terrain/tile/{row}/{col}/{kind}")
        def get_tile(row: int, col: int, kind: str):
            try:
                data = tiles.tile_bytes(row, col, kind)
            except UnknownSourceError as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from None
            return Response(content=data, media_type="image/png")

    for path, provider in registry._custom:
        app.add_api_route(path, provider, methods=["GET"])

    return app


class GatewayServer:
    """uvicorn server running in a background thread.

    The listening socket is bound before the thread starts so bind errors
    surface synchronously; stop() performs a graceful shutdown that drains
    in-flight responses.
    """

    def __init__(self, app: FastAPI, host: str = DEFAULT_HOST, port: int = DEFAULT_PORT):
        self.app = app
        self.host = host
        try:
            self._socket = socket.create_server((host, port))
        except OSError as exc:
            raise OSError(f"cannot bind {host}:{port}: {exc}") from exc
        self.port = self._socket.getsockname()[1]
        config = uvicorn.Config(app, log_level="warning", access_log=False)
        self._server = uvicorn.Server(config)
        self._thread = threading.Thread(
            target=self._server.run, kwargs={"sockets": [self._socket]}, daemon=True
        )

    @property
    def base_url(self) -> str:
        host = "127.0.0.1" if self.host == "0.0.0.0" else self.host
        return f"http://{host}:{self.port}"

    def start(self, ready_timeout_s: float = 10.0):
        self._thread.start()
        deadline = time.monotonic() + ready_timeout_s
        while time.monotonic() < deadline:
            if self._server.started:
                return self
            if not self._thread.is_alive():
                raise RuntimeError("gateway server exited during startup")
            time.sleep(0.01)
        raise TimeoutError("gateway server did not start in time")

    def stop(self, timeout_s: float = 10.0):
        self._server.should_exit = True
        self._thread.join(timeout=timeout_s)
        if self._thread.is_alive():
            raise TimeoutError("gateway server did not stop in time")


def serve(registry: EndpointRegistry, host: str = DEFAULT_HOST,
          port: int = DEFAULT_PORT) -> GatewayServer:
    """Build the app, bind, and start serving; returns the running handle."""
    return GatewayServer(build_app(registry), host=host, port=port).start()
