"""Fixed-step discrete-event engine.

Each tick moves the nodes, finishes due transfers, updates links (firing
contact events and aborting transfers on broken links), injects traffic,
purges expired messages and finally lets idle links start new transfers.
"""
from __future__ import annotations

import heapq
import io
import os
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, rng
from .config import SimConfig, validate
from .mobility import MovementField, build_map
from .reports import (
    CONNECTIVITY, DELIVERED, MESSAGE_STATS, ConnectivityReport, ContactEvent, Counters,
    DeliveredMessagesReport, DeliveryRecord, MessageStats, MessageStatsReport, ReportSink,
    finalize_stats, report_filename,
)
from .routing import (
    CopyState, Message, NodeRecord, RouterConfig, TransferIntent, on_contact, on_create, on_receive,
)


@dataclass
class Transfer:
    link: int
    sender: int
    receiver: int
    message_id: str
    granted: int
    delivery: bool
    size: int
    start: float
    completion: float
    seq: int


@dataclass
class RunSummary:
    counters: Counters
    stats: MessageStats
    hosts: list[str]
    end_time: float
    deliveries: list[DeliveryRecord] = field(repr=False, default_factory=list)


def transfer_duration(size: int, speed: float) -> float:
    return size / speed


def transfer_schedule(now: float, size: int, speed: float) -> float:
    """Completion time of a transfer of ``size`` bytes started at ``now``."""
    return now + transfer_duration(size, speed)


def _resolve_pool(pool: str, names: list[str], groups: list[str]) -> list[int]:
    if pool.strip().lower() == "all":
        return list(range(len(names)))
    wanted = [s.strip() for s in pool.split(",") if s.strip()]
    index = {n: i for i, n in enumerate(names)}
    out = set()
    for w in wanted:
        if w in index:
            out.add(index[w])
            continue
        members = [i for i, g in enumerate(groups) if g == w]
        if not members:
            raise ValueError(f"traffic host selector {w!r} matches no host or group")
        out.update(members)
    return sorted(out)


class Simulation:
    """World state of one run plus the tick that advances it."""

    def __init__(self, config: SimConfig, sinks: list[ReportSink] | tuple = ()):
        validate(config)
        self.config = config
        self.sinks = list(sinks)
        self.graph = build_map(config.map)
        self.groups = [g for g in config.groups for _ in range(g.count)]
        self.names = config.node_names()
        self.n = len(self.names)
        seed = config.rng_seed
        self.field = MovementField.place(self.graph, self.groups,
                                         [rng.stream(seed, rng.MOBILITY, i) for i in range(self.n)])
        self.traffic_rng = rng.stream(seed, rng.TRAFFIC)
        self.router = RouterConfig(config.nrof_copies, config.binary_mode, config.high_quality_nodes,
                                   config.hq_multiplier, config.hq_on_create)
        self.nodes = [NodeRecord(i, name, g.buffer_size) for i, (name, g) in enumerate(zip(self.names, self.groups))]
        gids = [g.group_id for g in self.groups]
        self.sources = _resolve_pool(config.traffic.source_pool, self.names, gids)
        self.dests = _resolve_pool(config.traffic.dest_pool, self.names, gids)
        if not self.sources or not self.dests or (len(self.sources) == 1 and self.sources == self.dests):
            raise ValueError("traffic pools cannot produce a message with source != destination")

        self.tick = 0
        self.now = 0.0
        self.counters = Counters()
        self.deliveries: list[DeliveryRecord] = []
        self.buffer_times: list[float] = []
        self.messages: dict[str, Message] = {}
        self.holders: dict[str, set[int]] = {}
        self.delivered_ids: set[str] = set()
        self.damaged: set[str] = set()  # messages that lost a copy to a buffer drop
        self.transfers: dict[tuple[int, int], Transfer] = {}
        self._due: list[tuple[float, int, tuple[int, int]]] = []
        self._expiry: list[tuple[float, int, str]] = []
        self._eval_cache: dict[tuple[int, int], tuple[int, int]] = {}
        self._transfer_seq = 0
        self._msg_seq = 0
        self.contact_log: list[ContactEvent] | None = None
        self.next_message_at = self._draw_interval()

        self.links: list[int] = []
        self._codes = np.empty(0, dtype=np.int64)
        self._update_links()

    # ---- helpers -------------------------------------------------------
    def _draw_interval(self) -> float:
        t = self.config.traffic
        return float(self.traffic_rng.uniform(t.interval_min, t.interval_max))

    def _emit_contact(self, code: int, state: str) -> None:
        i, j = divmod(code, self.n)
        ev = ContactEvent(self.now, self.names[i], self.names[j], state)
        if self.contact_log is not None:
            self.contact_log.append(ev)
        for s in self.sinks:
            s.contact(ev)

    def _touch(self, *idx: int) -> None:
        for i in idx:
            self.nodes[i].version += 1

    def _remove(self, node: NodeRecord, msg_id: str, *, dropped: bool) -> None:
        entry = node.buffer.pop(msg_id)
        node.used -= entry.message.size
        holders = self.holders.get(msg_id)
        if holders is not None:
            holders.discard(node.index)
        if dropped:
            self.counters.dropped += 1
            self.buffer_times.append(self.now - entry.received_at)
        node.version += 1

    def _room_possible(self, node: NodeRecord, size: int) -> bool:
        if node.free >= size:
            return True
        droppable = sum(e.message.size for k, e in node.buffer.items() if k not in node.sending)
        return node.free + droppable >= size

    def _make_room(self, node: NodeRecord, size: int) -> bool:
        """Drop oldest-received messages not being sent until ``size`` bytes are free."""
        if not self._room_possible(node, size):
            return False
        while node.free < size:
            victim = next(k for k in node.buffer if k not in node.sending)
            self.damaged.add(victim)
            self._remove(node, victim, dropped=True)
        return True

    def _store(self, node: NodeRecord, entry: CopyState) -> None:
        node.buffer[entry.message.id] = entry
        node.used += entry.message.size
        self.holders.setdefault(entry.message.id, set()).add(node.index)
        node.version += 1

    def _abort(self, key: tuple[int, int]) -> None:
        tr = self.transfers.pop(key)
        s, r = self.nodes[tr.sender], self.nodes[tr.receiver]
        s.sending.discard(tr.message_id)
        r.incoming.discard(tr.message_id)
        if not tr.delivery:
            r.reserved -= tr.size
        self.counters.aborted += 1
        self._touch(tr.sender, tr.receiver)

    # ---- tick phases ---------------------------------------------------
    def _finish_transfers(self) -> None:
        due = self._due
        while due and due[0][0] <= self.now:
            _, seq, key = heapq.heappop(due)
            tr = self.transfers.get(key)
            if tr is None or tr.seq != seq:
                continue  # aborted earlier
            del self.transfers[key]
            self._complete(tr)

    def _complete(self, tr: Transfer) -> None:
        s, r = self.nodes[tr.sender], self.nodes[tr.receiver]
        s.sending.discard(tr.message_id)
        r.incoming.discard(tr.message_id)
        entry = s.buffer[tr.message_id]
        msg = entry.message
        path = entry.path + (r.name,)
        self.counters.relayed += 1
        if tr.delivery:
            r.delivered.add(msg.id)
            if msg.id not in self.delivered_ids:
                self.delivered_ids.add(msg.id)
                self.counters.delivered += 1
                latency = self.now - msg.created_at
                rec = DeliveryRecord(self.now, msg.id, msg.size, len(path) - 1, latency, msg.source,
                                     msg.destination, msg.ttl - latency, path)
                self.deliveries.append(rec)
                for sink in self.sinks:
                    sink.delivered(rec)
            # the sender saw the destination take it; its copies are spent
            self._remove(s, msg.id, dropped=False)
        else:
            r.reserved -= tr.size
            self._store(r, on_receive(r.name, msg, tr.granted, self.router, self.now, path))
            entry.copies -= tr.granted
        self._touch(tr.sender, tr.receiver)

    def _update_links(self) -> None:
        codes = _kernels.range_pairs(self.field.x, self.field.y, self.config.transmit_range)
        if codes.shape == self._codes.shape and np.array_equal(codes, self._codes):
            return
        old = set(self.links)
        new_list = codes.tolist()
        new = set(new_list)
        for code in sorted(old - new):
            for key in ((code, code // self.n), (code, code % self.n)):
                if key in self.transfers:
                    self._abort(key)
                self._eval_cache.pop(key, None)
            self._emit_contact(code, "down")
        for code in new_list:
            if code not in old:
                self._emit_contact(code, "up")
        self.links = new_list
        self._codes = codes

    def _generate_traffic(self) -> None:
        t = self.config.traffic
        r = self.traffic_rng
        while self.next_message_at <= self.now:
            src = self.sources[int(r.integers(len(self.sources)))]
            dst = src
            while dst == src:
                dst = self.dests[int(r.integers(len(self.dests)))]
            size = int(r.integers(t.size_min, t.size_max + 1))
            self._msg_seq += 1
            node = self.nodes[src]
            msg = Message(f"{t.prefix}{self._msg_seq}", self._msg_seq, node.name, self.names[dst], size,
                          self.now, self.groups[src].ttl)
            self.messages[msg.id] = msg
            self.counters.created += 1
            heapq.heappush(self._expiry, (msg.expires_at, msg.seq, msg.id))
            if size <= node.buffer_size and self._make_room(node, size):
                self._store(node, on_create(node.name, msg, self.router, self.now))
            else:
                self.counters.dropped += 1
                self.damaged.add(msg.id)
            self.next_message_at += self._draw_interval()

    def _purge_expired(self) -> None:
        exp = self._expiry
        while exp and self.now - self.messages[exp[0][2]].created_at > self.messages[exp[0][2]].ttl:
            _, _, msg_id = heapq.heappop(exp)
            for key in [k for k, tr in self.transfers.items() if tr.message_id == msg_id]:
                self._abort(key)
            for i in sorted(self.holders.pop(msg_id, ())):
                self._remove(self.nodes[i], msg_id, dropped=True)

    def _start_transfers(self) -> None:
        n = self.n
        cache = self._eval_cache
        for code in self.links:
            i, j = divmod(code, n)
            for s, r in ((i, j), (j, i)):
                key = (code, s)
                if key in self.transfers:
                    continue
                sn, rn = self.nodes[s], self.nodes[r]
                stamp = (sn.version, rn.version)
                if cache.get(key) == stamp:
                    continue
                for intent in on_contact(sn, rn, self.router):
                    if self._try_start(code, intent):
                        break
                else:
                    cache[key] = (sn.version, rn.version)

    def _try_start(self, code: int, it: TransferIntent) -> bool:
        s, r = self.nodes[it.sender], self.nodes[it.receiver]
        msg = s.buffer[it.message_id].message
        if not it.delivery:
            if msg.size > r.buffer_size or not self._make_room(r, msg.size):
                return False
            r.reserved += msg.size
        self._transfer_seq += 1
        tr = Transfer(code, it.sender, it.receiver, msg.id, it.granted, it.delivery, msg.size, self.now,
                      transfer_schedule(self.now, msg.size, self.config.transmit_speed), self._transfer_seq)
        key = (code, it.sender)
        self.transfers[key] = tr
        heapq.heappush(self._due, (tr.completion, tr.seq, key))
        s.sending.add(msg.id)
        r.incoming.add(msg.id)
        self.counters.started += 1
        self._touch(it.sender, it.receiver)
        return True

    # ---- public --------------------------------------------------------
    @property
    def done(self) -> bool:
        return (self.tick + 1) * self.config.update_interval > self.config.end_time + 1e-9

    def step(self) -> None:
        if self.done:
            raise RuntimeError("simulation already reached end_time")
        dt = self.config.update_interval
        t0 = self.now
        self.tick += 1
        self.now = self.tick * dt
        self.field.advance(t0, dt)
        self._finish_transfers()
        self._update_links()
        self._generate_traffic()
        self._purge_expired()
        self._start_transfers()

    def finish(self) -> RunSummary:
        """Close open contacts at the current time and emit final statistics."""
        for code in self.links:
            self._emit_contact(code, "down")
        self.links = []
        self._codes = np.empty(0, dtype=np.int64)
        stats = finalize_stats(self.counters, self.deliveries, self.buffer_times)
        for s in self.sinks:
            s.finish(stats)
        return RunSummary(self.counters, stats, list(self.names), self.now, self.deliveries)

    def custodial_copies(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for node in self.nodes:
            for mid, e in node.buffer.items():
                out[mid] = out.get(mid, 0) + e.copies
        return out

    def check_invariants(self) -> None:
        for node in self.nodes:
            if node.used + node.reserved > node.buffer_size:
                raise AssertionError(f"{node.name}: buffer overflow {node.used}+{node.reserved}")
            if node.used != sum(e.message.size for e in node.buffer.values()):
                raise AssertionError(f"{node.name}: buffer accounting drift")
            for e in node.buffer.values():
                if self.now - e.message.created_at > e.message.ttl:
                    raise AssertionError(f"{node.name}: expired {e.message.id} still buffered")
                if e.copies < 1:
                    raise AssertionError(f"{node.name}: {e.message.id} with {e.copies} copies")
        live = set(self.links)
        for tr in self.transfers.values():
            if tr.link not in live:
                raise AssertionError(f"transfer {tr} on inactive link")


def run(config: SimConfig, report_sinks=()) -> RunSummary:
    sim = Simulation(config, report_sinks)
    while not sim.done:
        sim.step()
    return sim.finish()


def run_reports(config: SimConfig) -> tuple[RunSummary, dict[str, str]]:
    """Run and return the three report texts keyed by report type."""
    bufs = {CONNECTIVITY: io.StringIO(), DELIVERED: io.StringIO(), MESSAGE_STATS: io.StringIO()}
    sinks = [ConnectivityReport(bufs[CONNECTIVITY]), DeliveredMessagesReport(bufs[DELIVERED]),
             MessageStatsReport(bufs[MESSAGE_STATS])]
    summary = run(config, sinks)
    return summary, {k: b.getvalue() for k, b in bufs.items()}


def run_to_dir(config: SimConfig, out_dir: str, scenario: str | None = None) -> RunSummary:
    """Run and write ``<scenario>_<Report>.txt`` files into ``out_dir``."""
    scenario = scenario or config.name
    os.makedirs(out_dir, exist_ok=True)
    paths = {k: os.path.join(out_dir, report_filename(scenario, k)) for k in (CONNECTIVITY, DELIVERED, MESSAGE_STATS)}
    with open(paths[CONNECTIVITY], "w", encoding="utf-8", newline="\n") as fc, \
            open(paths[DELIVERED], "w", encoding="utf-8", newline="\n") as fd, \
            open(paths[MESSAGE_STATS], "w", encoding="utf-8", newline="\n") as fs:
        return run(config, [ConnectivityReport(fc), DeliveredMessagesReport(fd), MessageStatsReport(fs)])
