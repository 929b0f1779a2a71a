"""Asset manifests, CSV telemetry archives, and real-time replay.

Archives arrive as CSV with a header row; each data row becomes one
TelemetryRecord with its timestamp normalized to UTC. Replay re-emits the
records on a wall-clock schedule (inter-record spacing divided by a speed
multiplier) so downstream consumers treat them as live. Third-party streams
plug in through the StreamAdapter contract: authenticate first, then
subscribe.
"""

from __future__ import annotations

import csv
import math
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Iterator

DEFAULT_SCHEDULING_TOLERANCE_S = 0.05  # per-emission, at speed 1


class ManifestError(ValueError):
    """Malformed asset placement manifest."""


class TelemetryFormatError(ValueError):
    """Malformed telemetry CSV archive."""


class AdapterError(Exception):
    """Base error for stream adapters."""


class AdapterAuthError(AdapterError):
    """Credential rejected."""


class AdapterStateError(AdapterError):
    """Contract violation, e.g. subscribe before authenticate."""


@dataclass(frozen=True)
class AssetEntry:
    """One placeable asset: position, heading, and a model reference."""

    asset_id: str
    x: float
    y: float
    z: float
    yaw: float
    model_ref: str


@dataclass(frozen=True)
class AssetManifest:
    entries: tuple[AssetEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        ids = [e.asset_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ManifestError("duplicate asset_id in manifest")

    def __len__(self):
        return len(self.entries)

    def ids(self) -> list[str]:
        return [e.asset_id for e in self.entries]


def parse_manifest(path) -> AssetManifest:
    """Parse whitespace-separated ``asset_id x y z yaw model_ref`` lines.

    ``#`` starts a comment; yaw is normalized into [0, 360).
    """
    path = Path(path)
    entries = []
    seen = set()
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ManifestError(
                f"{path}:{lineno}: expected 6 columns "
                f"(asset_id x y z yaw model_ref), got {len(parts)}"
            )
        asset_id, xs, ys, zs, yaws, model_ref = parts
        if asset_id in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate asset_id {asset_id!r}")
        seen.add(asset_id)
        try:
            x, y, z, yaw = float(xs), float(ys), float(zs), float(yaws)
        except ValueError:
            raise ManifestError(f"{path}:{lineno}: non-numeric coordinate") from None
        if not all(math.isfinite(v) for v in (x, y, z, yaw)):
            raise ManifestError(f"{path}:{lineno}: non-finite coordinate")
        entries.append(
            AssetEntry(
                asset_id=asset_id, x=x, y=y, z=z, yaw=yaw % 360.0, model_ref=model_ref
            )
        )
    return AssetManifest(entries=tuple(entries))


@dataclass(frozen=True)
class TelemetryRecord:
    """One timestamped sample from one source: a flat channel -> value map."""

    source_id: str
    timestamp: datetime
    values: dict[str, float]

    def __post_init__(self):
        if self.timestamp.tzinfo is None:
            raise ValueError("record timestamps must be timezone-aware")
        if not self.values:
            raise ValueError("record must carry at least one channel")
        if any(not name for name in self.values):
            raise ValueError("channel names must be non-empty")


def parse_timestamp(text: str) -> datetime:
    """ISO-8601 (Z or offset, naive taken as UTC) or epoch seconds, to UTC."""
    text = text.strip()
    try:
        stamp = datetime.fromisoformat(text.replace("Z", "+00:00"))
        if stamp.tzinfo is None:
            stamp = stamp.replace(tzinfo=timezone.utc)
        return stamp.astimezone(timezone.utc)
    except ValueError:
        pass
    try:
        return datetime.fromtimestamp(float(text), tz=timezone.utc)
    except (ValueError, OverflowError, OSError):
        raise TelemetryFormatError(f"unparseable timestamp {text!r}") from None


def load_csv(
    path,
    source_id: str,
    timestamp_column: str,
    channel_columns: list[str],
) -> list[TelemetryRecord]:
    """Load a telemetry archive, one record per row, stably time-sorted.

    Undeclared columns are ignored. Non-numeric channel cells drop that
    channel from the record; rows left with no channels are skipped.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise TelemetryFormatError(f"{path}: empty file")
        missing = [
            col
            for col in [timestamp_column, *channel_columns]
            if col not in reader.fieldnames
        ]
        if missing:
            raise TelemetryFormatError(
                f"{path}: missing column(s): {', '.join(missing)}"
            )
        records = []
        for lineno, row in enumerate(reader, start=2):
            cell = row.get(timestamp_column)
            if cell is None or not cell.strip():
                raise TelemetryFormatError(f"{path}:{lineno}: missing timestamp")
            try:
                stamp = parse_timestamp(cell)
            except TelemetryFormatError as exc:
                raise TelemetryFormatError(f"{path}:{lineno}: {exc}") from None
            values = {}
            for col in channel_columns:
                raw = row.get(col)
                if raw is None or not raw.strip():
                    continue
                try:
                    value = float(raw)
                except ValueError:
                    continue  # gaps in exports drop the cell, not the row
                if math.isfinite(value):
                    values[col] = value
            if values:
                records.append(
                    TelemetryRecord(source_id=source_id, timestamp=stamp, values=values)
                )
    if not records:
        raise TelemetryFormatError(f"{path}: empty file (no usable records)")
    records.sort(key=lambda r: r.timestamp)  # stable: equal stamps keep file order
    return records


@dataclass(frozen=True)
class ReplaySchedule:
    """Time-ordered records plus playback speed; speed divides the gaps."""

    records: tuple[TelemetryRecord, ...]
    speed: float = 1.0
    loop: bool = False

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise ValueError("schedule needs at least one record")
        if not (self.speed > 0):
            raise ValueError("replay speed must be > 0")
        stamps = [r.timestamp for r in self.records]
        if any(b < a for a, b in zip(stamps, stamps[1:])):
            raise ValueError("records must be sorted by timestamp")

    @property
    def span_s(self) -> float:
        return (self.records[-1].timestamp - self.records[0].timestamp).total_seconds()

    @property
    def restart_gap_s(self) -> float:
        """Source-time gap inserted between loop iterations.

        The mean inter-record gap keeps the emission rhythm across the seam;
        a single-record schedule falls back to 1 s.
        """
        n = len(self.records)
        return self.span_s / (n - 1) if n > 1 and self.span_s > 0 else 1.0

    def offsets_s(self) -> list[float]:
        t0 = self.records[0].timestamp
        return [(r.timestamp - t0).total_seconds() for r in self.records]


@dataclass
class ReplayReport:
    delivered: int
    loops: int
    elapsed_s: float
    completed: bool
    error: str | None = None


def replay(
    schedule: ReplaySchedule,
    sink: Callable[[TelemetryRecord], object],
    stop: threading.Event | None = None,
    clock: Callable[[], float] = time.monotonic,
    sleep: Callable[[float], None] = time.sleep,
) -> ReplayReport:
    """Deliver records to the sink on the schedule's wall clock.

    Deadlines are absolute (start + cumulative offset / speed) so timing
    error does not accumulate. A sink exception aborts the replay; the
    report carries the delivered count and the error. With ``loop`` set the
    replay runs until ``stop`` fires.
    """
    offsets = schedule.offsets_s()
    period = schedule.span_s + schedule.restart_gap_s
    start = clock()
    delivered = 0
    loops = 0
    while True:
        base = loops * period
        for record, offset in zip(schedule.records, offsets):
            if stop is not None and stop.is_set():
                return ReplayReport(
                    delivered=delivered, loops=loops,
                    elapsed_s=clock() - start, completed=False,
                )
            deadline = start + (base + offset) / schedule.speed
            wait = deadline - clock()
            if wait > 0:
                if stop is not None:
                    if stop.wait(wait):
                        return ReplayReport(
                            delivered=delivered, loops=loops,
                            elapsed_s=clock() - start, completed=False,
                        )
                else:
                    sleep(wait)
            try:
                sink(record)
            except Exception as exc:
                return ReplayReport(
                    delivered=delivered, loops=loops,
                    elapsed_s=clock() - start, completed=False,
                    error=f"sink failed after {delivered} records: {exc}",
                )
            delivered += 1
        loops += 1
        if not schedule.loop:
            return ReplayReport(
                delivered=delivered, loops=loops,
                elapsed_s=clock() - start, completed=True,
            )


class ReplayWorker:
    """Background thread running one replay into a sink."""

    def __init__(self, schedule: ReplaySchedule, sink):
        self._schedule = schedule
        self._sink = sink
        self._stop = threading.Event()
        self.report: ReplayReport | None = None
        self._thread = threading.Thread(target=self._run, daemon=True)

    def _run(self):
        self.report = replay(self._schedule, self._sink, stop=self._stop)

    def start(self):
        self._thread.start()
        return self

    def stop(self, timeout: float = 5.0):
        self._stop.set()
        self._thread.join(timeout=timeout)

    def join(self, timeout: float | None = None):
        self._thread.join(timeout=timeout)

    @property
    def running(self) -> bool:
        return self._thread.is_alive()


class StreamAdapter(ABC):
    """Contract for authenticated third-party record streams.

    ``authenticate`` must succeed before ``subscribe``; implementations
    reject the reverse order. Every delivered record satisfies the
    TelemetryRecord invariants, in non-decreasing timestamp order.
    """

    @abstractmethod
    def authenticate(self, credential: str) -> None:
        """Validate the credential and open a session."""

    @abstractmethod
    def subscribe(self, channels: list[str] | None = None) -> Iterator[TelemetryRecord]:
        """Stream records, filtered to the requested channels if given."""


class MockStreamAdapter(StreamAdapter):
    """Scripted adapter realizing the stream contract for tests and demos.

    Yields the scripted records in order, either as a burst or paced by
    ``interval_s``.
    """

    def __init__(
        self,
        credential: str,
        script: Iterable[TelemetryRecord],
        interval_s: float = 0.0,
    ):
        self._credential = credential
        self._script = list(script)
        self._interval_s = interval_s
        self._authenticated = False

    def authenticate(self, credential: str) -> None:
        if credential != self._credential:
            raise AdapterAuthError("authentication code rejected")
        self._authenticated = True

    def subscribe(self, channels=None) -> Iterator[TelemetryRecord]:
        if not self._authenticated:
            raise AdapterStateError("subscribe requires a prior authenticate")
        return self._stream(channels)

    def _stream(self, channels):
        for record in self._script:
            if self._interval_s > 0:
                time.sleep(self._interval_s)
            if channels is None:
                yield record
                continue
            kept = {k: v for k, v in record.values.items() if k in channels}
            if kept:
                yield TelemetryRecord(
                    source_id=record.source_id,
                    timestamp=record.timestamp,
                    values=kept,
                )


def mock_stream_adapter(
    credential: str, script: Iterable[TelemetryRecord], interval_s: float = 0.0
) -> MockStreamAdapter:
    return MockStreamAdapter(credential, script, interval_s=interval_s)


def run_adapter_conformance(
    make_adapter: Callable[[], tuple[StreamAdapter, str]],
    expect_records: int | None = None,
) -> int:
    """Shared conformance suite for StreamAdapter implementations.

    ``make_adapter`` returns a fresh adapter plus its valid credential.
    Checks auth gating, subscribe ordering, record validity, and timestamp
    ordering; returns the number of records consumed. Raises AssertionError
    on any contract violation.
    """
    adapter, credential = make_adapter()
    try:
        adapter.subscribe(None)
    except AdapterStateError:
        pass
    else:
        raise AssertionError("subscribe before authenticate must be rejected")

    adapter, credential = make_adapter()
    try:
        adapter.authenticate(credential + "-wrong")
    except AdapterAuthError:
        pass
    else:
        raise AssertionError("wrong credential must be rejected")

    adapter, credential = make_adapter()
    adapter.authenticate(credential)
    last_stamp = None
    count = 0
    for record in adapter.subscribe(None):
        if not isinstance(record, TelemetryRecord):
            raise AssertionError("adapter must deliver TelemetryRecord instances")
        if last_stamp is not None and record.timestamp < last_stamp:
            raise AssertionError("records must arrive in non-decreasing time order")
        last_stamp = record.timestamp
        count += 1
    if expect_records is not None and count != expect_records:
        raise AssertionError(f"expected {expect_records} records, got {count}")
    return count
