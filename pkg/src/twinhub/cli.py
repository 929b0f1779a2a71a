"""Command-line entry points.

Commands: ``terrain build``, ``serve``, ``fetch-forecast``, ``poll``,
``verify``, ``sample``. Exit codes: 0 success, 1 verification failure,
2 input error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import sys
import time
from pathlib import Path

from twinhub import __version__

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INPUT_ERROR = 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twinhub",
        description="Data-integration backend for digital twins.",
    )
    parser.add_argument("--version", action="version", version=f"twinhub {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    terrain = sub.add_parser("terrain", help="static terrain pipeline")
    terrain_sub = terrain.add_subparsers(dest="terrain_command", required=True)
    build = terrain_sub.add_parser("build", help="fuse raster + contours into PNG tiles")
    build.add_argument("raster", type=Path, help="height raster (text grid format)")
    build.add_argument("contours", type=Path, help="bathymetry contour CSV (x,y,depth)")
    build.add_argument("-o", "--out", type=Path, required=True, help="output tile directory")
    build.add_argument("--color", type=Path, default=None, help="co-registered aerial PNG")
    build.add_argument("--tile-size", type=int, default=256)
    build.add_argument("--sea-level", type=float, default=0.0)
    build.add_argument("--knn", type=int, default=4, help="neighbors for depth interpolation")
    build.add_argument("--power", type=float, default=2.0, help="inverse-distance exponent")
    build.add_argument("--per-tile-norm", action="store_true",
                       help="normalize each tile separately instead of globally")

    serve_p = sub.add_parser("serve", help="run the snapshot gateway")
    serve_p.add_argument("--config", type=Path, required=True)

    fetch_p = sub.add_parser("fetch-forecast", help="fetch and print a forecast series")
    fetch_p.add_argument("--param", action="append", default=None,
                         help="forecast variable name (repeatable)")
    fetch_p.add_argument("--at", default=None,
                         help="wall-clock time for cycle selection (ISO-8601, default now)")
    fetch_p.add_argument("--delay", type=float, default=None,
                         help="publication delay in hours (default 0: pick the "
                              "cycle as of the given time)")
    fetch_p.add_argument("--offline-fixture", type=Path, default=None,
                         help="parse this file instead of fetching")
    fetch_p.add_argument("--base-url", default=None)
    fetch_p.add_argument("--ranges", default=None,
                         help="semicolon-separated start:step:end triplets "
                              "(time;member;height;grid-y;grid-x)")
    fetch_p.add_argument("--config", type=Path, default=None,
                         help="read forecast.* defaults from a config file")

    poll_p = sub.add_parser("poll", help="headless polling client")
    poll_p.add_argument("url", help="endpoint URL to poll")
    poll_p.add_argument("--period", type=float, default=1.0)
    poll_p.add_argument("--duration", type=float, default=5.0)

    verify_p = sub.add_parser("verify", help="run the end-to-end verification suite")
    verify_p.add_argument("--config", type=Path, required=True)

    sample_p = sub.add_parser("sample", help="regenerate the sample dataset")
    sample_p.add_argument("--out", type=Path, required=True)
    sample_p.add_argument("--size", type=int, default=96)
    sample_p.add_argument("--seed", type=int, default=7)

    return parser


def _cmd_terrain_build(args) -> int:
    from twinhub.pipeline import build_terrain_tiles

    for path, label in ((args.raster, "raster"), (args.contours, "contours")):
        if not path.exists():
            print(f"error: {label} file not found: {path}", file=sys.stderr)
            return EXIT_INPUT_ERROR
    if args.color is not None and not args.color.exists():
        print(f"error: color file not found: {args.color}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    summary = build_terrain_tiles(
        args.raster,
        args.contours,
        args.out,
        color_path=args.color,
        tile_size=args.tile_size,
        sea_level=args.sea_level,
        k=args.knn,
        power=args.power,
        per_tile_norm=args.per_tile_norm,
    )
    for line in summary.lines():
        print(line)
    return EXIT_OK


def _cmd_serve(args) -> int:
    from twinhub.config import load_serve_config
    from twinhub.runtime import GatewayRuntime

    cfg = load_serve_config(args.config)
    runtime = GatewayRuntime(cfg).prepare().start()
    server = runtime.server
    print(f"listening on {server.base_url}")
    for path in runtime.registry().paths():
        print(f"  {server.base_url}{path}")
    if runtime.refresher is not None and runtime.refresher.last_error:
        print(f"forecast refresh pending: {runtime.refresher.last_error}", file=sys.stderr)
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        print("shutting down")
    finally:
        runtime.stop()
    return EXIT_OK


def _cmd_fetch_forecast(args) -> int:
    from twinhub.config import DEFAULT_FORECAST_RANGES, load_serve_config
    from twinhub.metocean import (
        BASE_URL,
        DimRange,
        ParamRequest,
        build_url,
        fetch,
        latest_cycle,
        parse_ascii,
    )

    base_url = BASE_URL
    delay = 0.0  # manual tool: pick the cycle as of the requested instant
    ranges = DEFAULT_FORECAST_RANGES
    params = args.param
    if args.config is not None:
        cfg = load_serve_config(args.config)
        if cfg.forecast is not None:
            base_url = cfg.forecast.base_url
            delay = cfg.forecast.delay_hours
            ranges = cfg.forecast.ranges
            params = params or cfg.forecast.params
    if args.base_url is not None:
        base_url = args.base_url
    if args.delay is not None:
        delay = args.delay
    if args.ranges is not None:
        ranges = tuple(DimRange.parse(part.strip()) for part in args.ranges.split(";"))
    if not params:
        print("error: no forecast parameters given (--param or config)", file=sys.stderr)
        return EXIT_INPUT_ERROR

    at = (
        dt.datetime.fromisoformat(args.at.replace("Z", "+00:00"))
        if args.at
        else dt.datetime.now(dt.timezone.utc)
    )
    cycle = latest_cycle(at, publication_delay_hours=delay)
    requests = [ParamRequest(name=p, ranges=ranges) for p in params]
    url = build_url(cycle, requests, base_url=base_url)
    print(url)
    if args.offline_fixture is not None:
        body = args.offline_fixture.read_text()
        used_cycle = cycle
    else:
        result = fetch(url)
        body = result.body
        used_cycle = cycle.previous() if result.fell_back else cycle
        if result.fell_back:
            print(f"# fell back to previous cycle {used_cycle.stamp()}", file=sys.stderr)
    series = parse_ascii(body, requests, cycle=used_cycle)
    for s in series:
        if len(series) > 1:
            print(f"# {s.param}")
        for hour, value in zip(s.lead_hours, s.values):
            print(f"{hour},{value}")
    return EXIT_OK


def _cmd_poll(args) -> int:
    from twinhub.client import poll_client

    report = poll_client(args.url, period_s=args.period, duration_s=args.duration)
    print(report.summary())
    return EXIT_OK


def _cmd_verify(args) -> int:
    from twinhub.config import load_verify_config
    from twinhub.verify import run_verify

    cfg = load_verify_config(args.config)
    results = run_verify(cfg)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY_FAILED


def _cmd_sample(args) -> int:
    from twinhub.sampledata import write_sample_dataset

    files = write_sample_dataset(args.out, size=args.size, seed=args.seed)
    print(f"wrote {len(files)} files to {args.out}")
    return EXIT_OK


_DISPATCH = {
    "serve": _cmd_serve,
    "fetch-forecast": _cmd_fetch_forecast,
    "poll": _cmd_poll,
    "verify": _cmd_verify,
    "sample": _cmd_sample,
}


def main(argv=None) -> int:
    from twinhub.metocean import ForecastError

    args = _parser().parse_args(argv)
    try:
        if args.command == "terrain":
            return _cmd_terrain_build(args)
        return _DISPATCH[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (ValueError, OSError, ForecastError) as exc:
        # Domain errors (format, config, transport, bind) derive from these.
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
