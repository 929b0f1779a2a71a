"""Assemble the configured backend: stores, replays, refresher, server."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

from twinhub.config import ServeConfig
from twinhub.gateway import (
    EndpointRegistry,
    ForecastCache,
    ForecastRefresher,
    GatewayServer,
    SnapshotStore,
    TileStore,
    serve,
)
from twinhub.metocean import (
    ParamRequest,
    build_url,
    fetch,
    infer_requests,
    latest_cycle,
    parse_ascii,
)
from twinhub.telemetry import ReplaySchedule, ReplayWorker, load_csv


def fixture_loader(cfg):
    """Forecast loader reading the configured fixture file."""

    def load():
        body = cfg.fixture.read_text()
        return parse_ascii(body, infer_requests(body))

    return load


def live_loader(cfg, transport=None):
    """Forecast loader hitting the remote service for the latest cycle."""

    def load():
        cycle = latest_cycle(dt.datetime.now(dt.timezone.utc), cfg.delay_hours)
        requests = [ParamRequest(name=p, ranges=cfg.ranges) for p in cfg.params]
        url = build_url(cycle, requests, base_url=cfg.base_url)
        result = fetch(url, transport=transport)
        used = cycle.previous() if result.fell_back else cycle
        return parse_ascii(result.body, requests, cycle=used)

    return load


@dataclass
class GatewayRuntime:
    """Everything a `serve` invocation runs: call start(), then stop()."""

    config: ServeConfig
    store: SnapshotStore = field(default_factory=SnapshotStore)
    cache: ForecastCache | None = None
    tiles: TileStore | None = None
    server: GatewayServer | None = None
    workers: list[ReplayWorker] = field(default_factory=list)
    refresher: ForecastRefresher | None = None
    _schedules: list[tuple[str, ReplaySchedule]] = field(default_factory=list)

    def prepare(self) -> "GatewayRuntime":
        """Load archives and tile sets; raises before anything starts."""
        cfg = self.config
        for source in cfg.sources:
            records = load_csv(
                source.csv_path,
                source.source_id,
                source.timestamp_column,
                source.channels,
            )
            self.store.register(source.source_id)
            self._schedules.append(
                (
                    source.source_id,
                    ReplaySchedule(
                        records=tuple(records), speed=source.speed, loop=source.loop
                    ),
                )
            )
        if cfg.forecast is not None:
            self.cache = ForecastCache(params=cfg.forecast.params)
            loader = (
                fixture_loader(cfg.forecast)
                if cfg.forecast.fixture is not None
                else live_loader(cfg.forecast)
            )
            self.refresher = ForecastRefresher(
                self.cache, loader, period_s=cfg.forecast.refresh_s
            )
        if cfg.tile_dir is not None:
            self.tiles = TileStore(cfg.tile_dir)
        return self

    def registry(self) -> EndpointRegistry:
        registry = EndpointRegistry().add_snapshots(self.store)
        if self.cache is not None:
            registry.add_forecasts(self.cache)
        if self.tiles is not None:
            registry.add_tiles(self.tiles)
        return registry

    def start(self) -> "GatewayRuntime":
        self.server = serve(self.registry(), host=self.config.host, port=self.config.port)
        if self.refresher is not None:
            try:
                self.refresher.refresh_once()  # fixture mode: live immediately
            except Exception as exc:
                self.refresher.last_error = str(exc)
            self.refresher.start()
        for source_id, schedule in self._schedules:
            self.workers.append(
                ReplayWorker(schedule, self.store.sink(source_id)).start()
            )
        return self

    def stop(self) -> None:
        for worker in self.workers:
            worker.stop()
        if self.refresher is not None:
            self.refresher.stop()
        if self.server is not None:
            self.server.stop()

    def wait_replays(self, timeout_s: float | None = None) -> None:
        for worker in self.workers:
            worker.join(timeout=timeout_s)
