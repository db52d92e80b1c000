"""ONE-compatible report writers: connectivity trace, delivered messages, message stats."""
from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import TextIO

CONNECTIVITY = "ConnectivityDtnsim2Report"
DELIVERED = "DeliveredMessagesReport"
MESSAGE_STATS = "MessageStatsReport"

DELIVERED_HEADER = "# time  ID  size  hopcount  deliveryTime  fromHost  toHost  remainingTtl  isResponse  path"

STATS_KEYS = (
    "created", "started", "relayed", "aborted", "dropped", "delivered",
    "delivery_prob", "overhead_ratio", "latency_avg", "latency_med", "hopcount_avg", "buffertime_avg",
)
_COUNT_KEYS = STATS_KEYS[:6]


def fmt_time(t: float) -> str:
    """Shortest round-tripping decimal with at least one fractional digit."""
    s = repr(float(t))
    if "e" in s or "E" in s:
        s = f"{float(t):.17f}".rstrip("0")
        if s.endswith("."):
            s += "0"
    return s


def fmt_ratio(v: float) -> str:
    return "NaN" if math.isnan(v) else f"{v:.4f}"


@dataclass(frozen=True)
class ContactEvent:
    time: float
    host1: str
    host2: str
    state: str  # "up" | "down"

    def __post_init__(self):
        if self.host1 == self.host2:
            raise ValueError(f"contact of {self.host1} with itself")
        if self.state not in ("up", "down"):
            raise ValueError(f"bad contact state {self.state!r}")

    def pair(self) -> tuple[str, str]:
        return (self.host1, self.host2) if self.host1 <= self.host2 else (self.host2, self.host1)


@dataclass(frozen=True)
class DeliveryRecord:
    time: float
    message_id: str
    size: int
    hopcount: int
    latency: float
    from_host: str
    to_host: str
    remaining_ttl: float
    path: tuple[str, ...]

    def __post_init__(self):
        if self.hopcount != len(self.path) - 1:
            raise ValueError(f"{self.message_id}: hopcount {self.hopcount} does not match path {'->'.join(self.path)}")
        if self.path[0] != self.from_host or self.path[-1] != self.to_host:
            raise ValueError(f"{self.message_id}: path does not run {self.from_host} -> {self.to_host}")


@dataclass
class Counters:
    created: int = 0
    started: int = 0
    relayed: int = 0
    aborted: int = 0
    dropped: int = 0
    delivered: int = 0


@dataclass
class MessageStats:
    created: int
    started: int
    relayed: int
    aborted: int
    dropped: int
    delivered: int
    delivery_prob: float
    overhead_ratio: float
    latency_avg: float
    latency_med: float
    hopcount_avg: float
    buffertime_avg: float
    degenerate: bool = field(default=False, compare=False)


def connectivity_line(ev: ContactEvent) -> str:
    h1, h2 = ev.pair()
    return f"{fmt_time(ev.time)} CONN {h1} {h2} {ev.state}"


def delivered_line(rec: DeliveryRecord) -> str:
    return " ".join((
        fmt_time(rec.time), rec.message_id, str(rec.size), str(rec.hopcount), fmt_time(rec.latency),
        rec.from_host, rec.to_host, fmt_time(rec.remaining_ttl), "N", "->".join(rec.path),
    ))


def write_connectivity(events) -> str:
    out = []
    last = -math.inf
    for ev in events:
        if ev.time < last:
            raise RuntimeError(f"connectivity event at {ev.time} after {last}")
        last = ev.time
        out.append(connectivity_line(ev) + "\n")
    return "".join(out)


def write_delivered(records) -> str:
    return DELIVERED_HEADER + "\n" + "".join(delivered_line(r) + "\n" for r in records)


def finalize_stats(counters: Counters, deliveries: list[DeliveryRecord], buffer_times: list[float]) -> MessageStats:
    """Summary statistics; undefined averages become NaN and the run is flagged degenerate."""
    c = counters
    nan = math.nan
    latencies = [d.latency for d in deliveries]
    degenerate = c.delivered == 0
    return MessageStats(
        created=c.created, started=c.started, relayed=c.relayed, aborted=c.aborted,
        dropped=c.dropped, delivered=c.delivered,
        delivery_prob=c.delivered / c.created if c.created else 0.0,
        overhead_ratio=(c.relayed - c.delivered) / c.delivered if c.delivered else nan,
        latency_avg=statistics.fmean(latencies) if latencies else nan,
        latency_med=statistics.median(latencies) if latencies else nan,
        hopcount_avg=statistics.fmean(d.hopcount for d in deliveries) if deliveries else nan,
        buffertime_avg=statistics.fmean(buffer_times) if buffer_times else nan,
        degenerate=degenerate,
    )


def write_stats(stats: MessageStats) -> str:
    lines = []
    for key in STATS_KEYS:
        v = getattr(stats, key)
        lines.append(f"{key}: {v}" if key in _COUNT_KEYS else f"{key}: {fmt_ratio(v)}")
    return "\n".join(lines) + "\n"


class ReportSink:
    """Receives simulation events; subclasses write one report type."""

    def contact(self, event: ContactEvent) -> None:
        pass

    def delivered(self, record: DeliveryRecord) -> None:
        pass

    def finish(self, stats: MessageStats) -> None:
        pass


class ConnectivityReport(ReportSink):
    def __init__(self, stream: TextIO):
        self.stream = stream
        self._last = -math.inf

    def contact(self, event):
        if event.time < self._last:
            raise RuntimeError(f"connectivity event at {event.time} after {self._last}")
        self._last = event.time
        self.stream.write(connectivity_line(event) + "\n")

    def finish(self, stats):
        self.stream.flush()


class DeliveredMessagesReport(ReportSink):
    def __init__(self, stream: TextIO):
        self.stream = stream
        stream.write(DELIVERED_HEADER + "\n")

    def delivered(self, record):
        self.stream.write(delivered_line(record) + "\n")

    def finish(self, stats):
        self.stream.flush()


class MessageStatsReport(ReportSink):
    def __init__(self, stream: TextIO):
        self.stream = stream

    def finish(self, stats):
        self.stream.write(write_stats(stats))
        self.stream.flush()


def report_filename(scenario: str, kind: str) -> str:
    return f"{scenario}_{kind}.txt"
