"""Gridded weather-forecast retrieval over an OPeNDAP-style ASCII interface.

The remote service publishes a new forecast cycle every 6 hours (00, 06, 12,
18 UTC) with hourly leads out to a 61-hour horizon. A subset of one cycle is
requested by URL concatenation::

    base + yyyymmdd + "T" + hh + "Z.ncml.ascii?" + param[,param...]

where each param is a variable name followed by one URL-encoded index range
``%5Bstart:stepsize:end%5D`` per dimension, ordered time, ensemble member,
height, grid-y, grid-x.

Responses come back as ASCII blocks separated by blank lines: a header line
``name, [d1][d2]...`` (a dotted ``name.name[d1]...`` form is also accepted)
followed by rows of comma-separated numbers, optionally prefixed with
bracketed indices.

All HTTP goes through an injectable transport so tests never touch the live
service; cycles are assumed published ``publication_delay_hours`` after their
nominal time, with a single fallback to the previous cycle on fetch failure.
"""

from __future__ import annotations

import datetime as dt
import re
import urllib.error
import urllib.request
from dataclasses import dataclass

BASE_URL = "https://thredds.met.no/thredds/dodsC/mepslatest/meps_lagged_6_h_vc_2_5km_"
CYCLE_HOURS = (0, 6, 12, 18)
HORIZON_SAMPLES = 61  # hourly leads 0..60
DEFAULT_PUBLICATION_DELAY_HOURS = 3.0
DEFAULT_TIMEOUT_S = 20.0

_PARAM_NAME_RE = re.compile(r"^[A-Za-z0-9_]+$")
_URL_STAMP_RE = re.compile(r"(\d{8})T(\d{2})Z")
_DIM_RE = re.compile(r"\[(\d+)\]")


class ForecastError(Exception):
    """Base error for forecast retrieval and parsing."""


class TransportError(ForecastError):
    """Network-level failure; carries the URL for context."""


class ParseError(ForecastError):
    """Response body does not match the expected ASCII grammar."""


@dataclass(frozen=True)
class ForecastCycle:
    """One scheduled model run: a date plus an hour in {0, 6, 12, 18}."""

    year: int
    month: int
    day: int
    hour: int

    def __post_init__(self):
        if self.hour not in CYCLE_HOURS:
            raise ValueError(f"cycle hour must be one of {CYCLE_HOURS}, got {self.hour}")
        dt.date(self.year, self.month, self.day)  # validates the date

    def stamp(self) -> str:
        return f"{self.year:04d}{self.month:02d}{self.day:02d}T{self.hour:02d}Z"

    def as_datetime(self) -> dt.datetime:
        return dt.datetime(
            self.year, self.month, self.day, self.hour, tzinfo=dt.timezone.utc
        )

    def previous(self) -> "ForecastCycle":
        prev = self.as_datetime() - dt.timedelta(hours=6)
        return ForecastCycle(prev.year, prev.month, prev.day, prev.hour)


@dataclass(frozen=True)
class DimRange:
    """Inclusive index range start:stepsize:end along one dimension."""

    start: int
    stepsize: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < 0:
            raise ValueError("range indices must be non-negative")
        if self.start > self.end:
            raise ValueError(f"range start {self.start} > end {self.end}")
        if self.stepsize < 1:
            raise ValueError("stepsize must be >= 1")

    @property
    def count(self) -> int:
        return (self.end - self.start) // self.stepsize + 1

    def indices(self) -> list[int]:
        return list(range(self.start, self.end + 1, self.stepsize))

    def encoded(self) -> str:
        return f"%5B{self.start}:{self.stepsize}:{self.end}%5D"

    @classmethod
    def parse(cls, text: str) -> "DimRange":
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected start:stepsize:end, got {text!r}")
        return cls(int(parts[0]), int(parts[1]), int(parts[2]))


def singleton(index: int) -> DimRange:
    """Single-sample range rendered as the full index:1:index triplet."""
    return DimRange(index, 1, index)


@dataclass(frozen=True)
class ParamRequest:
    """A forecast variable plus its per-dimension index ranges.

    Dimension order follows the service: time, ensemble member, height,
    grid-y, grid-x.
    """

    name: str
    ranges: tuple[DimRange, ...]

    def __post_init__(self):
        if not _PARAM_NAME_RE.match(self.name):
            raise ValueError(f"invalid parameter name {self.name!r}")
        if not self.ranges:
            raise ValueError("parameter request needs at least one range")
        object.__setattr__(self, "ranges", tuple(self.ranges))

    @property
    def sample_count(self) -> int:
        n = 1
        for r in self.ranges:
            n *= r.count
        return n

    def encoded(self) -> str:
        return self.name + "".join(r.encoded() for r in self.ranges)


def point_request(
    name: str,
    grid_y: int,
    grid_x: int,
    lead_end: int = HORIZON_SAMPLES - 1,
    member: int = 0,
    height: int = 0,
) -> ParamRequest:
    """Full-horizon request for a single grid point."""
    return ParamRequest(
        name=name,
        ranges=(
            DimRange(0, 1, lead_end),
            singleton(member),
            singleton(height),
            singleton(grid_y),
            singleton(grid_x),
        ),
    )


@dataclass(frozen=True)
class ForecastSeries:
    """Per-parameter forecast time series for one cycle."""

    param: str
    cycle: ForecastCycle | None
    lead_hours: tuple[int, ...]
    values: tuple[float, ...]
    units: str = ""

    def __post_init__(self):
        object.__setattr__(self, "lead_hours", tuple(self.lead_hours))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.lead_hours) != len(self.values):
            raise ValueError("lead_hours and values differ in length")
        if any(b <= a for a, b in zip(self.lead_hours, self.lead_hours[1:])):
            raise ValueError("lead_hours must be strictly increasing")
        if len(self.lead_hours) > HORIZON_SAMPLES:
            raise ValueError(
                f"series exceeds the {HORIZON_SAMPLES}-sample forecast horizon"
            )

    def truncated(self, horizon_hours: int) -> "ForecastSeries":
        """Keep leads at or below horizon_hours (inclusive)."""
        keep = [i for i, h in enumerate(self.lead_hours) if h <= horizon_hours]
        return ForecastSeries(
            param=self.param,
            cycle=self.cycle,
            lead_hours=[self.lead_hours[i] for i in keep],
            values=[self.values[i] for i in keep],
            units=self.units,
        )


def latest_cycle(
    now: dt.datetime,
    publication_delay_hours: float = DEFAULT_PUBLICATION_DELAY_HOURS,
) -> ForecastCycle:
    """Most recent cycle whose nominal time plus delay has passed.

    Rolls to the previous date across midnight. Naive datetimes are taken as
    UTC.
    """
    if publication_delay_hours < 0:
        raise ValueError("publication delay must be >= 0")
    if now.tzinfo is None:
        now = now.replace(tzinfo=dt.timezone.utc)
    effective = now.astimezone(dt.timezone.utc) - dt.timedelta(
        hours=publication_delay_hours
    )
    hour = (effective.hour // 6) * 6
    return ForecastCycle(effective.year, effective.month, effective.day, hour)


def build_url(
    cycle: ForecastCycle, params: list[ParamRequest], base_url: str = BASE_URL
) -> str:
    """Concatenate the request URL for a parameter subset of one cycle."""
    if not params:
        raise ValueError("at least one parameter request is required")
    return (
        base_url
        + cycle.stamp()
        + ".ncml.ascii?"
        + ",".join(p.encoded() for p in params)
    )


def previous_cycle_url(url: str) -> str:
    """Rewrite the embedded cycle stamp to the cycle 6 hours earlier."""
    m = _URL_STAMP_RE.search(url)
    if not m:
        raise ValueError(f"no cycle stamp found in {url!r}")
    date, hour = m.group(1), int(m.group(2))
    cycle = ForecastCycle(int(date[:4]), int(date[4:6]), int(date[6:8]), hour)
    return url[: m.start()] + cycle.previous().stamp() + url[m.end() :]


def urllib_transport(url: str, timeout: float = DEFAULT_TIMEOUT_S) -> tuple[int, str]:
    """Default transport: GET the URL, return (status, body text)."""
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            return resp.status, resp.read().decode("utf-8", errors="replace")
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read().decode("utf-8", errors="replace")
    except (urllib.error.URLError, TimeoutError, OSError) as exc:
        raise TransportError(f"request failed for {url}: {exc}") from exc


@dataclass(frozen=True)
class FetchResult:
    body: str
    url: str
    fell_back: bool


def fetch(url: str, transport=None) -> FetchResult:
    """GET the URL; on failure retry once against the previous cycle.

    The fallback rewrites the cycle stamp embedded in the URL. A fallback
    response is flagged in the result.
    """
    transport = transport or urllib_transport
    first_error: str
    try:
        status, body = transport(url)
        if status == 200:
            return FetchResult(body=body, url=url, fell_back=False)
        first_error = f"status {status}"
    except TransportError as exc:
        first_error = str(exc)
    prev_url = previous_cycle_url(url)
    try:
        status, body = transport(prev_url)
    except TransportError as exc:
        raise TransportError(
            f"fetch failed for {url} ({first_error}) and previous cycle "
            f"{prev_url} ({exc})"
        ) from exc
    if status == 200:
        return FetchResult(body=body, url=prev_url, fell_back=True)
    raise TransportError(
        f"fetch failed for {url} ({first_error}) and previous cycle "
        f"{prev_url} (status {status})"
    )


def _parse_block_header(line: str) -> tuple[str, list[int]]:
    # The variable name runs up to the first '[' or ','.
    name_end = len(line)
    for stop in ("[", ","):
        pos = line.find(stop)
        if pos != -1:
            name_end = min(name_end, pos)
    name = line[:name_end].strip()
    dims = [int(d) for d in _DIM_RE.findall(line[name_end:])]
    return name, dims


def _block_matches(block_name: str, param: str) -> bool:
    return block_name == param or param in block_name.split(".")


def parse_ascii(
    body: str,
    requests: list[ParamRequest],
    cycle: ForecastCycle | None = None,
) -> list[ForecastSeries]:
    """Parse an ASCII response into one series per requested parameter.

    The value count of each block must equal the product of the request's
    range sample counts, and every non-time range must be a singleton so the
    block collapses to a time series.
    """
    if not body.strip():
        raise ParseError("empty response body")
    blocks: list[tuple[str, list[int], list[float]]] = []
    for raw in re.split(r"\n\s*\n", body.strip()):
        lines = [l for l in raw.strip().splitlines() if l.strip()]
        if not lines:
            continue
        name, dims = _parse_block_header(lines[0])
        if not name or name[0].isdigit():
            continue  # dataset banner or separator text, not a variable block
        values: list[float] = []
        for line in lines[1:]:
            data = re.sub(r"^\s*(\[\d+\])+\s*,?", "", line)
            for tok in data.split(","):
                tok = tok.strip()
                if not tok:
                    continue
                try:
                    values.append(float(tok))
                except ValueError:
                    raise ParseError(
                        f"non-numeric value {tok!r} in block {name!r}"
                    ) from None
        blocks.append((name, dims, values))

    series: list[ForecastSeries] = []
    for req in requests:
        match = next(
            (b for b in blocks if _block_matches(b[0], req.name)),
            None,
        )
        if match is None:
            raise ParseError(f"no block found for parameter {req.name!r}")
        _, dims, values = match
        if len(values) != req.sample_count:
            raise ParseError(
                f"count mismatch for {req.name!r}: request wants "
                f"{req.sample_count} values, block has {len(values)}"
            )
        if any(r.count != 1 for r in req.ranges[1:]):
            raise ParseError(
                f"parameter {req.name!r} has non-singleton non-time ranges; "
                "cannot collapse to a time series"
            )
        series.append(
            ForecastSeries(
                param=req.name,
                cycle=cycle,
                lead_hours=req.ranges[0].indices(),
                values=values,
            )
        )
    return series


def serialize_series(series_list: list[ForecastSeries]) -> str:
    """Render series as an ASCII body in the grammar parse_ascii accepts.

    Used for offline fixtures and round-trip tests.
    """
    blocks = []
    for s in series_list:
        dims = f"[{len(s.values)}][1][1][1][1]"
        rows = [f"{s.param}, {dims}"]
        rows.append(", ".join(repr(v) for v in s.values))
        blocks.append("\n".join(rows))
    return "\n\n".join(blocks) + "\n"


def infer_requests(body: str) -> list[ParamRequest]:
    """Derive point requests from the block headers of an ASCII body.

    The first header dimension is taken as the time axis (leads 0..d1-1);
    remaining dimensions must be singletons. Lets fixtures be parsed without
    knowing their parameter list up front.
    """
    requests = []
    for raw in re.split(r"\n\s*\n", body.strip()):
        lines = [l for l in raw.strip().splitlines() if l.strip()]
        if not lines:
            continue
        name, dims = _parse_block_header(lines[0])
        if not name or not dims or not _PARAM_NAME_RE.match(name.split(".")[0]):
            continue
        ranges = [DimRange(0, 1, dims[0] - 1)]
        ranges.extend(singleton(0) for _ in dims[1:])
        requests.append(
            ParamRequest(name=name.split(".")[0], ranges=tuple(ranges))
        )
    if not requests:
        raise ParseError("no parameter blocks found in body")
    return requests


def fixture_requests(series_list: list[ForecastSeries]) -> list[ParamRequest]:
    """Requests matching a serialized fixture, one per series."""
    reqs = []
    for s in series_list:
        step = s.lead_hours[1] - s.lead_hours[0] if len(s.lead_hours) > 1 else 1
        reqs.append(
            ParamRequest(
                name=s.param,
                ranges=(
                    DimRange(s.lead_hours[0], step, s.lead_hours[-1]),
                    singleton(0),
                    singleton(0),
                    singleton(0),
                    singleton(0),
                ),
            )
        )
    return reqs
