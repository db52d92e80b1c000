"""Spray-and-Wait (vanilla and binary) with the high-quality replica multiplier.

Router state lives in the engine's node records; the functions here decide
what a node holds after creating or receiving a message and which transfers
it wants when a link is available.
"""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class RouterConfig:
    initial_copies: int = 6
    binary: bool = True
    hq_set: frozenset[str] = frozenset()
    hq_multiplier: int = 2
    hq_on_create: bool = True

    def __post_init__(self):
        if self.initial_copies < 1:
            raise ValueError("initial_copies must be >= 1")
        if self.hq_multiplier < 1:
            raise ValueError("hq_multiplier must be >= 1")

    def boost(self, node: str) -> int:
        return self.hq_multiplier if node in self.hq_set else 1


@dataclass(frozen=True)
class Message:
    id: str
    seq: int
    source: str
    destination: str
    size: int
    created_at: float
    ttl: float

    @property
    def expires_at(self) -> float:
        return self.created_at + self.ttl


@dataclass
class CopyState:
    """A buffered message and the replica budget this node holds for it."""
    message: Message
    copies: int
    received_at: float = 0.0
    path: tuple[str, ...] = ()

    @property
    def waiting(self) -> bool:
        return self.copies == 1


@dataclass
class NodeRecord:
    index: int
    name: str
    buffer_size: int
    buffer: dict[str, CopyState] = field(default_factory=dict)  # in order of receipt
    used: int = 0
    reserved: int = 0
    sending: set[str] = field(default_factory=set)
    incoming: set[str] = field(default_factory=set)
    delivered: set[str] = field(default_factory=set)  # messages received as final destination
    version: int = 0

    @property
    def free(self) -> int:
        return self.buffer_size - self.used - self.reserved

    def holds(self, msg_id: str) -> bool:
        return msg_id in self.buffer or msg_id in self.incoming or msg_id in self.delivered


@dataclass(frozen=True)
class TransferIntent:
    sender: int
    receiver: int
    message_id: str
    granted: int
    delivery: bool


def on_create(node: str, msg: Message, cfg: RouterConfig, now: float | None = None) -> CopyState:
    if msg.source != node:
        raise ValueError(f"{node} is not the source of {msg.id}")
    copies = cfg.initial_copies * (cfg.boost(node) if cfg.hq_on_create else 1)
    return CopyState(msg, copies, msg.created_at if now is None else now, (node,))


def split(copies: int, cfg: RouterConfig) -> tuple[int, int]:
    """``(given, kept)`` for a spray hand-over from a holder of ``copies``."""
    given = copies // 2 if cfg.binary else 1
    return given, copies - given


def on_contact(sender: NodeRecord, peer: NodeRecord, cfg: RouterConfig) -> list[TransferIntent]:
    """Ordered transfers ``sender`` wants to make to ``peer``.

    Direct deliveries come first, then spray hand-overs; within each kind
    messages go oldest-created first. Single-copy holders only deliver.
    """
    direct, spray = [], []
    entries = sorted(sender.buffer.values(), key=lambda e: (e.message.created_at, e.message.seq))
    for e in entries:
        m = e.message
        if m.id in sender.sending:
            continue
        if m.destination == peer.name:
            if not peer.holds(m.id):
                direct.append(TransferIntent(sender.index, peer.index, m.id, e.copies, True))
        elif e.copies > 1 and not peer.holds(m.id):
            given, _ = split(e.copies, cfg)
            spray.append(TransferIntent(sender.index, peer.index, m.id, given, False))
    return direct + spray


def on_contact_both(a: NodeRecord, b: NodeRecord, cfg: RouterConfig) -> list[TransferIntent]:
    return on_contact(a, b, cfg) + on_contact(b, a, cfg)


def on_receive(node: str, msg: Message, granted: int, cfg: RouterConfig, now: float = 0.0,
               path: tuple[str, ...] = ()) -> CopyState | None:
    """Copy state kept by ``node`` after a completed transfer; ``None`` at the destination."""
    if granted < 1:
        raise ValueError("granted copies must be >= 1")
    if node == msg.destination:
        return None
    return CopyState(msg, granted * cfg.boost(node), now, path)
