"""Flat key=value configuration files.

One ``key=value`` pair per line, ``#`` comments, no sections. Telemetry
sources repeat under a ``source.<id>.`` prefix::

    host=127.0.0.1
    port=8000
    tile_dir=tiles
    forecast.params=x_wind_10m,y_wind_10m
    forecast.fixture=forecast.txt
    source.turbine1.csv=telemetry.csv
    source.turbine1.channels=wind_speed,power

Relative paths resolve against the config file's directory. Schema
violations are collected and reported all at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from twinhub.metocean import BASE_URL, DimRange

DEFAULT_FORECAST_RANGES = (
    DimRange(0, 1, 60),
    DimRange(0, 1, 0),
    DimRange(0, 1, 0),
    DimRange(0, 1, 0),
    DimRange(0, 1, 0),
)


class ConfigError(ValueError):
    """One or more configuration problems; carries the full list."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def parse_kv(text: str, origin: str = "<config>") -> dict[str, str]:
    """Parse flat key=value lines; duplicate keys are errors."""
    out: dict[str, str] = {}
    problems = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{origin}:{lineno}: expected key=value, got {line!r}")
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        if key in out:
            problems.append(f"{origin}:{lineno}: duplicate key {key!r}")
            continue
        out[key] = value.strip()
    if problems:
        raise ConfigError(problems)
    return out


def _parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_ranges(value: str) -> tuple[DimRange, ...]:
    return tuple(DimRange.parse(part.strip()) for part in value.split(";"))


@dataclass
class SourceConfig:
    source_id: str
    csv_path: Path
    channels: list[str]
    timestamp_column: str = "timestamp"
    speed: float = 1.0
    loop: bool = False


@dataclass
class ForecastConfig:
    params: list[str] = field(default_factory=list)
    fixture: Path | None = None
    refresh_s: float = 3600.0
    base_url: str = BASE_URL
    delay_hours: float = 3.0
    ranges: tuple[DimRange, ...] = DEFAULT_FORECAST_RANGES


@dataclass
class ServeConfig:
    host: str = "0.0.0.0"
    port: int = 8000
    tile_dir: Path | None = None
    sources: list[SourceConfig] = field(default_factory=list)
    forecast: ForecastConfig | None = None


_SERVE_TOP_KEYS = {"host", "port", "tile_dir"}
_FORECAST_KEYS = {"params", "fixture", "refresh_s", "base_url", "delay_hours", "ranges"}
_SOURCE_KEYS = {"csv", "channels", "timestamp_column", "speed", "loop"}


def load_serve_config(path) -> ServeConfig:
    """Parse and validate a gateway config file, reporting every problem."""
    path = Path(path)
    base_dir = path.parent
    pairs = parse_kv(path.read_text(), origin=str(path))
    problems: list[str] = []

    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base_dir / candidate

    cfg = ServeConfig()
    forecast_pairs: dict[str, str] = {}
    source_pairs: dict[str, dict[str, str]] = {}

    for key, value in pairs.items():
        if key in _SERVE_TOP_KEYS:
            continue
        if key.startswith("forecast."):
            sub = key[len("forecast.") :]
            if sub in _FORECAST_KEYS:
                forecast_pairs[sub] = value
            else:
                problems.append(f"unknown forecast key {key!r}")
        elif key.startswith("source."):
            parts = key.split(".")
            if len(parts) != 3 or parts[2] not in _SOURCE_KEYS:
                problems.append(f"unknown source key {key!r}")
            else:
                source_pairs.setdefault(parts[1], {})[parts[2]] = value
        else:
            problems.append(f"unknown key {key!r}")

    cfg.host = pairs.get("host", cfg.host)
    if "port" in pairs:
        try:
            cfg.port = int(pairs["port"])
        except ValueError:
            problems.append(f"port must be an integer, got {pairs['port']!r}")
    if "tile_dir" in pairs:
        cfg.tile_dir = resolve(pairs["tile_dir"])
        if not (cfg.tile_dir / "index.txt").exists():
            problems.append(f"tile_dir {cfg.tile_dir} has no index.txt")

    if forecast_pairs:
        forecast = ForecastConfig()
        if "params" in forecast_pairs:
            forecast.params = [
                p.strip() for p in forecast_pairs["params"].split(",") if p.strip()
            ]
        if not forecast.params:
            problems.append("forecast.params must list at least one parameter")
        if "fixture" in forecast_pairs:
            forecast.fixture = resolve(forecast_pairs["fixture"])
            if not forecast.fixture.exists():
                problems.append(f"forecast fixture {forecast.fixture} does not exist")
        if "refresh_s" in forecast_pairs:
            try:
                forecast.refresh_s = float(forecast_pairs["refresh_s"])
            except ValueError:
                problems.append("forecast.refresh_s must be a number")
        if "base_url" in forecast_pairs:
            forecast.base_url = forecast_pairs["base_url"]
        if "delay_hours" in forecast_pairs:
            try:
                forecast.delay_hours = float(forecast_pairs["delay_hours"])
            except ValueError:
                problems.append("forecast.delay_hours must be a number")
        if "ranges" in forecast_pairs:
            try:
                forecast.ranges = _parse_ranges(forecast_pairs["ranges"])
            except ValueError as exc:
                problems.append(f"forecast.ranges: {exc}")
        cfg.forecast = forecast

    for source_id, fields in sorted(source_pairs.items()):
        missing = [k for k in ("csv", "channels") if k not in fields]
        if missing:
            problems.append(
                f"source {source_id!r} missing key(s): {', '.join(missing)}"
            )
            continue
        source = SourceConfig(
            source_id=source_id,
            csv_path=resolve(fields["csv"]),
            channels=[c.strip() for c in fields["channels"].split(",") if c.strip()],
        )
        if not source.csv_path.exists():
            problems.append(f"source {source_id!r}: csv {source.csv_path} does not exist")
        if not source.channels:
            problems.append(f"source {source_id!r}: channels must be non-empty")
        source.timestamp_column = fields.get("timestamp_column", source.timestamp_column)
        if "speed" in fields:
            try:
                source.speed = float(fields["speed"])
                if source.speed <= 0:
                    problems.append(f"source {source_id!r}: speed must be > 0")
            except ValueError:
                problems.append(f"source {source_id!r}: speed must be a number")
        if "loop" in fields:
            try:
                source.loop = _parse_bool(fields["loop"])
            except ValueError as exc:
                problems.append(f"source {source_id!r}: {exc}")
        cfg.sources.append(source)

    if problems:
        raise ConfigError(problems)
    return cfg


@dataclass
class VerifyConfig:
    """Inputs and knobs for the end-to-end verification run."""

    raster: Path
    contours: Path
    telemetry_csv: Path
    forecast_fixture: Path
    color: Path | None = None
    host: str = "127.0.0.1"
    port: int = 0  # 0 = ephemeral
    clients: int = 4
    poll_period_s: float = 0.2
    replay_speed: float = 5.0
    determinism_size: int = 2048
    tile_size: int = 256
    sea_level: float = 0.0
    knn_k: int = 4
    idw_power: float = 2.0


_VERIFY_REQUIRED = ("raster", "contours", "telemetry_csv", "forecast_fixture")
_VERIFY_TYPES = {
    "host": str,
    "port": int,
    "clients": int,
    "poll_period_s": float,
    "replay_speed": float,
    "determinism_size": int,
    "tile_size": int,
    "sea_level": float,
    "knn_k": int,
    "idw_power": float,
}


def load_verify_config(path) -> VerifyConfig:
    path = Path(path)
    base_dir = path.parent
    pairs = parse_kv(path.read_text(), origin=str(path))
    problems = []

    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base_dir / candidate

    kwargs = {}
    for key in _VERIFY_REQUIRED:
        if key not in pairs:
            problems.append(f"missing required key {key!r}")
            continue
        resolved = resolve(pairs[key])
        if not resolved.exists():
            problems.append(f"{key} file {resolved} does not exist")
        kwargs[key] = resolved
    if "color" in pairs:
        resolved = resolve(pairs["color"])
        if not resolved.exists():
            problems.append(f"color file {resolved} does not exist")
        kwargs["color"] = resolved
    for key, cast in _VERIFY_TYPES.items():
        if key not in pairs:
            continue
        try:
            kwargs[key] = cast(pairs[key])
        except ValueError:
            problems.append(f"{key} must be {cast.__name__}, got {pairs[key]!r}")
    known = set(_VERIFY_REQUIRED) | set(_VERIFY_TYPES) | {"color"}
    for key in pairs:
        if key not in known:
            problems.append(f"unknown key {key!r}")
    if problems:
        raise ConfigError(problems)
    return VerifyConfig(**kwargs)
