"""Report parsers, per-node contact features and the high-quality labelling rule."""
from __future__ import annotations

import csv
import io
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .forest import FEATURE_NAMES, Dataset
from .reports import DELIVERED_HEADER, STATS_KEYS, ContactEvent, DeliveryRecord, MessageStats


class ReportParseError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    node: str
    contact_frequency: int
    degree: int
    duration: float

    def values(self) -> tuple[float, float, float]:
        return float(self.contact_frequency), float(self.degree), self.duration


@dataclass(frozen=True)
class LabeledNode:
    node: str
    label: int


@dataclass(frozen=True)
class LabelRule:
    max_hopcount: int = 2
    min_deliveries: int = 8  # strictly more than this many qualifying deliveries
    sample_fraction: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.sample_fraction <= 1:
            raise ValueError("sample_fraction must be in (0, 1]")


def parse_connectivity(text: str) -> list[ContactEvent]:
    events = []
    open_at: dict[tuple[str, str], float] = {}
    last = -math.inf
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5 or parts[1] != "CONN" or parts[4] not in ("up", "down"):
            raise ReportParseError(f"line {no}: malformed connectivity record {line!r}")
        try:
            t = float(parts[0])
        except ValueError:
            raise ReportParseError(f"line {no}: bad time {parts[0]!r}") from None
        if t < 0 or t < last:
            raise ReportParseError(f"line {no}: time {t} out of order")
        last = t
        try:
            ev = ContactEvent(t, parts[2], parts[3], parts[4])
        except ValueError as exc:
            raise ReportParseError(f"line {no}: {exc}") from None
        pair = ev.pair()
        if ev.state == "up":
            if pair in open_at:
                raise ReportParseError(f"line {no}: contact {pair[0]}-{pair[1]} already up")
            open_at[pair] = t
        else:
            if pair not in open_at:
                raise ReportParseError(f"line {no}: down before up for contact {pair[0]}-{pair[1]}")
            del open_at[pair]
        events.append(ev)
    if open_at:
        a, b = sorted(open_at)[0]
        raise ReportParseError(f"unmatched contact {a}-{b}")
    return events


def compute_features(events: list[ContactEvent]) -> list[FeatureVector]:
    """Contact count, distinct peers and mean contact duration for each node that had contacts."""
    open_at: dict[tuple[str, str], float] = {}
    freq: dict[str, int] = defaultdict(int)
    peers: dict[str, set[str]] = defaultdict(set)
    total: dict[str, float] = defaultdict(float)
    for ev in events:
        pair = ev.pair()
        if ev.state == "up":
            open_at[pair] = ev.time
            for me, other in (pair, pair[::-1]):
                freq[me] += 1
                peers[me].add(other)
        else:
            d = ev.time - open_at.pop(pair)
            total[pair[0]] += d
            total[pair[1]] += d
    return [FeatureVector(n, freq[n], len(peers[n]), total[n] / freq[n]) for n in sorted(freq)]


def parse_delivered(text: str) -> list[DeliveryRecord]:
    out = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 10:
            raise ReportParseError(f"line {no}: expected 10 fields, got {len(parts)}")
        try:
            rec = DeliveryRecord(
                time=float(parts[0]), message_id=parts[1], size=int(parts[2]), hopcount=int(parts[3]),
                latency=float(parts[4]), from_host=parts[5], to_host=parts[6], remaining_ttl=float(parts[7]),
                path=tuple(parts[9].split("->")),
            )
        except ValueError as exc:
            raise ReportParseError(f"line {no}: {exc}") from None
        out.append(rec)
    return out


def parse_stats(text: str) -> MessageStats:
    values = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        key, sep, value = raw.partition(":")
        if not sep or key.strip() not in STATS_KEYS:
            raise ReportParseError(f"line {no}: unexpected stats line {raw!r}")
        key = key.strip()
        values[key] = int(value) if key in STATS_KEYS[:6] else float(value)
    missing = [k for k in STATS_KEYS if k not in values]
    if missing:
        raise ReportParseError(f"stats report missing {missing}")
    return MessageStats(**values, degenerate=values["delivered"] == 0)


def label_high_quality(records: list[DeliveryRecord], rule: LabelRule = LabelRule()) -> list[LabeledNode]:
    """Label a seeded random share of the short-path, high-delivery source nodes as 1."""
    counts: dict[str, int] = defaultdict(int)
    seen: set[str] = set()
    for r in records:
        seen.update(r.path)
        seen.update((r.from_host, r.to_host))
        if r.hopcount <= rule.max_hopcount:
            counts[r.from_host] += 1
    candidates = sorted(n for n, c in counts.items() if c > rule.min_deliveries)
    chosen: set[str] = set()
    if not candidates:
        warnings.warn("no high-quality candidates; every node labelled 0", stacklevel=2)
    else:
        k = math.ceil(rule.sample_fraction * len(candidates) - 1e-12)
        g = rngmod.stream(rule.rng_seed, rngmod.LABELS)
        chosen = {candidates[i] for i in g.choice(len(candidates), size=k, replace=False)}
    return [LabeledNode(n, int(n in chosen)) for n in sorted(seen)]


def build_dataset(features: list[list[FeatureVector]], labels: list[list[LabeledNode]]) -> Dataset:
    """Join per-day features and labels by node name; unlabelled feature rows get label 0."""
    if len(features) != len(labels):
        raise ValueError(f"{len(features)} feature days but {len(labels)} label days")
    X, y, nodes, days = [], [], [], []
    for day, (fv, lab) in enumerate(zip(features, labels), start=1):
        by_node = {f.node: f for f in fv}
        lab_map = {}
        for ln in lab:
            if ln.node not in by_node:
                raise ValueError(f"day {day}: label for {ln.node} which has no contact features")
            lab_map[ln.node] = ln.label
        for name in sorted(by_node):
            X.append(by_node[name].values())
            y.append(lab_map.get(name, 0))
            nodes.append(name)
            days.append(day)
    return Dataset(np.array(X, dtype=np.float64).reshape(-1, 3), np.array(y, dtype=np.int64), nodes, days)


# ---- CSV interchange ----------------------------------------------------

def features_csv(features: list[FeatureVector]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node", *FEATURE_NAMES])
    for f in features:
        w.writerow([f.node, f.contact_frequency, f.degree, repr(f.duration)])
    return buf.getvalue()


def labels_csv(labels: list[LabeledNode]) -> str:
    return "node,label\n" + "".join(f"{ln.node},{ln.label}\n" for ln in labels)


def dataset_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["day", "node", *FEATURE_NAMES, "label"])
    for i in range(len(ds)):
        cf, deg, dur = ds.X[i]
        w.writerow([ds.days[i], ds.nodes[i], int(cf), int(deg), repr(float(dur)), int(ds.y[i])])
    return buf.getvalue()


def _rows(text: str, source: str, header: list[str]):
    reader = csv.reader(io.StringIO(text))
    try:
        first = next(reader)
    except StopIteration:
        raise ReportParseError(f"{source}:1: empty file") from None
    if first != header:
        raise ReportParseError(f"{source}:1: expected header {','.join(header)}")
    for row in reader:
        if row:
            yield reader.line_num, row


def read_features_csv(text: str, source: str = "<features>") -> list[FeatureVector]:
    out = []
    for no, row in _rows(text, source, ["node", *FEATURE_NAMES]):
        try:
            if len(row) != 4:
                raise ValueError(f"expected 4 fields, got {len(row)}")
            out.append(FeatureVector(row[0], int(row[1]), int(row[2]), float(row[3])))
        except ValueError as exc:
            raise ReportParseError(f"{source}:{no}: {exc}") from None
    return out


def read_labels_csv(text: str, source: str = "<labels>") -> list[LabeledNode]:
    out = []
    for no, row in _rows(text, source, ["node", "label"]):
        try:
            if len(row) != 2 or row[1] not in ("0", "1"):
                raise ValueError(f"bad label row {row}")
            out.append(LabeledNode(row[0], int(row[1])))
        except ValueError as exc:
            raise ReportParseError(f"{source}:{no}: {exc}") from None
    return out


def read_dataset_csv(text: str, source: str = "<dataset>") -> Dataset:
    X, y, nodes, days = [], [], [], []
    for no, row in _rows(text, source, ["day", "node", *FEATURE_NAMES, "label"]):
        try:
            if len(row) != 6:
                raise ValueError(f"expected 6 fields, got {len(row)}")
            vals = (float(row[2]), float(row[3]), float(row[4]))
            if not all(math.isfinite(v) for v in vals):
                raise ValueError("non-finite feature value")
            if row[5] not in ("0", "1"):
                raise ValueError(f"label must be 0 or 1, got {row[5]!r}")
            days.append(int(row[0]))
        except ValueError as exc:
            raise ReportParseError(f"{source}:{no}: {exc}") from None
        nodes.append(row[1])
        X.append(vals)
        y.append(int(row[5]))
    return Dataset(np.array(X, dtype=np.float64).reshape(-1, 3), np.array(y, dtype=np.int64), nodes, days)


__all__ = [
    "FeatureVector", "LabelRule", "LabeledNode", "ReportParseError", "DELIVERED_HEADER", "build_dataset",
    "compute_features", "dataset_csv", "features_csv", "label_high_quality", "labels_csv", "parse_connectivity",
    "parse_delivered", "parse_stats", "read_dataset_csv", "read_features_csv", "read_labels_csv",
]
