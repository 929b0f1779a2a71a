"""Headless polling client standing in for the rendering frontends.

Plays the role a game-engine client would: issue a GET per period, decode
the JSON document, record the observed sequence. Requests never overlap; a
slow response delays the next poll instead of stacking requests, mirroring
the coroutine-per-request pattern real clients use to keep their frame rate.
"""

from __future__ import annotations

import json
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field

DEFAULT_PERIOD_S = 1.0
DEFAULT_TIMEOUT_S = 5.0


@dataclass
class PollReport:
    """What one polling client observed over its run."""

    endpoint: str
    polls: int = 0
    successes: int = 0
    sequences: list[int] = field(default_factory=list)
    latencies_ms: list[float] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    last_document: dict | None = None
    first_success_offset_s: float | None = None

    def summary(self) -> str:
        seq = f"{self.sequences[0]}..{self.sequences[-1]}" if self.sequences else "-"
        mean_ms = (
            sum(self.latencies_ms) / len(self.latencies_ms)
            if self.latencies_ms
            else 0.0
        )
        return (
            f"{self.endpoint}: {self.successes}/{self.polls} ok, "
            f"sequences {seq}, mean latency {mean_ms:.1f} ms, "
            f"{len(self.errors)} errors"
        )


def poll_client(
    endpoint: str,
    period_s: float = DEFAULT_PERIOD_S,
    duration_s: float = 5.0,
    timeout_s: float = DEFAULT_TIMEOUT_S,
) -> PollReport:
    """Poll one endpoint for a duration and report what was observed.

    At most one request is in flight at any time. Per-poll failures are
    recorded, never raised.
    """
    if period_s <= 0:
        raise ValueError("poll period must be > 0")
    report = PollReport(endpoint=endpoint)
    start = time.monotonic()
    next_deadline = start
    while True:
        now = time.monotonic()
        if now - start >= duration_s:
            return report
        if now < next_deadline:
            time.sleep(min(next_deadline - now, duration_s - (now - start)))
            continue
        report.polls += 1
        sent = time.monotonic()
        try:
            with urllib.request.urlopen(endpoint, timeout=timeout_s) as resp:
                body = resp.read()
            document = json.loads(body.decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            report.errors.append(f"poll {report.polls}: {exc}")
        else:
            received = time.monotonic()
            report.successes += 1
            report.latencies_ms.append((received - sent) * 1000.0)
            report.last_document = document
            if report.first_success_offset_s is None:
                report.first_success_offset_s = received - start
            if isinstance(document, dict) and "sequence" in document:
                report.sequences.append(int(document["sequence"]))
        # A slow response pushes the next poll out; requests never stack.
        next_deadline = max(next_deadline + period_s, time.monotonic())
