import pytest
from hypothesis import given, strategies as st

from hqspray.routing import (
    CopyState, Message, NodeRecord, RouterConfig, on_contact, on_contact_both, on_create, on_receive, split,
)


def msg(i=1, src="p1", dst="r0", t=0.0):
    return Message(f"M{i}", i, src, dst, 500_000, t, 18000.0)


def test_create_plain_and_hq():
    assert on_create("p1", msg(), RouterConfig()).copies == 6
    assert on_create("p1", msg(), RouterConfig(hq_set=frozenset({"p1"}))).copies == 12
    assert on_create("p1", msg(), RouterConfig(hq_set=frozenset({"p1"}), hq_on_create=False)).copies == 6


def test_single_copy_is_wait_phase():
    assert on_create("p1", msg(), RouterConfig(initial_copies=1)).waiting


def test_create_by_non_source_rejected():
    with pytest.raises(ValueError):
        on_create("c1", msg(), RouterConfig())


def test_binary_and_vanilla_split():
    assert split(8, RouterConfig()) == (4, 4)
    assert split(7, RouterConfig()) == (3, 4)
    assert split(6, RouterConfig(binary=False)) == (1, 5)


def test_receive_doubling_and_destination():
    cfg = RouterConfig(hq_set=frozenset({"c2"}))
    assert on_receive("c2", msg(), 4, cfg).copies == 8
    assert on_receive("p9", msg(), 1, cfg).copies == 1
    assert on_receive("r0", msg(), 4, cfg) is None


def node(i, name, *entries):
    n = NodeRecord(i, name, 50_000_000)
    for e in entries:
        n.buffer[e.message.id] = e
    return n


def test_contact_order_direct_first_then_oldest():
    a = node(0, "p1",
             CopyState(msg(3, t=30.0, dst="x"), 4),
             CopyState(msg(1, t=10.0, dst="x"), 2),
             CopyState(msg(2, t=20.0, dst="c5"), 1))
    b = node(1, "c5")
    intents = on_contact(a, b, RouterConfig())
    assert [(t.message_id, t.delivery, t.granted) for t in intents] == [("M2", True, 1), ("M1", False, 1),
                                                                        ("M3", False, 2)]


def test_wait_phase_only_delivers():
    a = node(0, "p1", CopyState(msg(1, dst="x"), 1))
    assert on_contact(a, node(1, "c5"), RouterConfig()) == []


def test_dedup_skips_held_and_delivered():
    m = msg(1, dst="x")
    a = node(0, "p1", CopyState(m, 6))
    b = node(1, "c5", CopyState(m, 2))
    assert on_contact(a, b, RouterConfig()) == []
    c = node(2, "x")
    c.delivered.add("M1")
    assert on_contact(a, c, RouterConfig()) == []


def test_both_directions():
    a = node(0, "p1", CopyState(msg(1, src="p1", dst="z"), 4))
    b = node(1, "c5", CopyState(msg(2, src="c5", dst="z"), 4))
    assert {t.message_id for t in on_contact_both(a, b, RouterConfig())} == {"M1", "M2"}


@given(st.integers(2, 1000), st.booleans())
def test_split_conserves(copies, binary):
    given_, kept = split(copies, RouterConfig(binary=binary))
    assert given_ + kept == copies and given_ >= 1 and kept >= 1


@given(st.integers(1, 64), st.integers(1, 4), st.booleans())
def test_hq_receive_multiplies_exactly(granted, mult, is_hq):
    cfg = RouterConfig(hq_set=frozenset({"c1"}) if is_hq else frozenset(), hq_multiplier=mult)
    assert on_receive("c1", msg(), granted, cfg).copies == granted * (mult if is_hq else 1)
