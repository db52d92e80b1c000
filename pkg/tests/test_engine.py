import hashlib
import io
import os
import subprocess
import sys

import pytest

from conftest import run_script, scripted_config
from hqspray import _kernels
from hqspray.config import accident_scenario, scale_config
from hqspray.engine import Simulation, run, run_reports, run_to_dir, transfer_schedule
from hqspray.reports import CONNECTIVITY, DELIVERED, MESSAGE_STATS, ConnectivityReport


def test_transfer_schedule_durations():
    assert transfer_schedule(0.0, 500_000, 250_000) == 2.0
    assert transfer_schedule(10.0, 1_000_000, 250_000) == 14.0


@pytest.mark.parametrize("dist,up", [(25.0, True), (31.0, False), (30.0, True)])
def test_static_link_by_distance(dist, up):
    cfg = scripted_config({"a0": (0.0, 0.0), "b0": (dist, 0.0)}, end_time=2.0, interval=(100.0, 100.0))
    sim = Simulation(cfg)
    sim.step()
    assert bool(sim.links) is up


def test_moving_node_leaves_range_after_one_tick():
    cfg = scripted_config({"a0": (29.5, 0.0), "b0": (0.0, 0.0)}, end_time=3.0, interval=(100.0, 100.0))
    buf = io.StringIO()
    sim = Simulation(cfg, [ConnectivityReport(buf)])
    # one metre per tick away from b0
    run_script(sim, {1.0: {"a0": (30.5, 0.0)}, 2.0: {"a0": (31.5, 0.0)}, 3.0: {"a0": (32.5, 0.0)}})
    assert buf.getvalue() == "0.0 CONN a0 b0 up\n1.0 CONN a0 b0 down\n"


def three_node_trace(copies=2):
    cfg = scripted_config({"s0": (0.0, 0.0), "x0": (500.0, 500.0), "d0": (1000.0, 1000.0)},
                          end_time=25.0, sources="s", dests="d", copies=copies)
    sim = Simulation(cfg)
    moves = {10.0: {"x0": (10.0, 0.0)}, 14.0: {"x0": (500.0, 500.0)},
             20.0: {"x0": (1000.0, 1010.0)}, 23.0: {"x0": (500.0, 500.0)}}
    return sim, run_script(sim, moves)


def test_three_node_relay_delivery():
    _, summary = three_node_trace()
    assert summary.counters.delivered == 1
    rec = summary.deliveries[0]
    assert rec.message_id == "M1"
    assert rec.hopcount == 2
    assert rec.path == ("s0", "x0", "d0")
    # created at 8, sprayed 10-12, delivered 20-22
    assert rec.time == 22.0 and rec.latency == 14.0


def test_abort_when_link_drops_mid_transfer():
    cfg = scripted_config({"s0": (0.0, 0.0), "x0": (500.0, 500.0), "d0": (1000.0, 1000.0)},
                          end_time=14.0, sources="s", dests="d", copies=2)
    sim = Simulation(cfg)
    summary = run_script(sim, {10.0: {"x0": (10.0, 0.0)}, 11.0: {"x0": (500.0, 500.0)}})
    x0 = sim.nodes[sim.names.index("x0")]
    assert summary.counters.started == 1
    assert summary.counters.aborted == 1
    assert summary.counters.relayed == 0
    assert not x0.buffer and not x0.incoming and x0.reserved == 0
    assert sim.nodes[0].buffer["M1"].copies == 2


def test_zero_traffic():
    cfg = scripted_config({"a0": (0.0, 0.0), "b0": (10.0, 0.0)}, end_time=20.0, interval=(1000.0, 1000.0))
    s = run(cfg)
    assert s.counters.created == 0 and s.counters.delivered == 0
    assert s.stats.degenerate


def test_drop_oldest_on_full_buffer():
    cfg = scripted_config({"s0": (0.0, 0.0), "d0": (1000.0, 1000.0)}, end_time=25.0, sources="s", dests="d",
                          buffer=1_200_000)
    sim = Simulation(cfg)
    summary = run_script(sim, {})
    assert summary.counters.created == 3
    assert summary.counters.dropped == 1
    assert list(sim.nodes[0].buffer) == ["M2", "M3"]
    assert summary.stats.buffertime_avg == 16.0  # M1 held from 8 to 24


def test_ttl_purge():
    cfg = scripted_config({"s0": (0.0, 0.0), "d0": (1000.0, 1000.0)}, end_time=20.0, sources="s", dests="d",
                          ttl=5.0)
    sim = Simulation(cfg)
    while not sim.done:
        sim.step()
        for node in sim.nodes:
            for e in node.buffer.values():
                assert sim.now - e.message.created_at <= e.message.ttl
    # M1 (created 8) is gone after t=13; M2 (created 16) lives past the end
    assert sim.counters.dropped == 1
    assert list(sim.nodes[0].buffer) == ["M2"]


def desk(seed=1):
    return scale_config(accident_scenario(60, 70, seed=seed), 0.33).replace(end_time=1800.0)


def test_same_seed_same_bytes():
    _, a = run_reports(desk(3))
    _, b = run_reports(desk(3))
    assert a == b
    _, c = run_reports(desk(4))
    assert c[CONNECTIVITY] != a[CONNECTIVITY]


def test_invariants_hold_every_tick():
    sim = Simulation(desk(2).replace(high_quality_nodes=frozenset({"c1", "p2"})))
    while not sim.done:
        sim.step()
        sim.check_invariants()
    s = sim.finish()
    assert s.counters.delivered <= s.counters.relayed
    assert s.stats.delivered <= s.stats.created


def test_run_to_dir_writes_three_files(tmp_path):
    run_to_dir(desk().replace(end_time=300.0), str(tmp_path), "day1")
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == [f"day1_{k}.txt" for k in sorted((CONNECTIVITY, DELIVERED, MESSAGE_STATS))]


@pytest.mark.skipif(_kernels.BACKEND != "cython", reason="compiled kernels not built")
def test_backends_give_identical_reports():
    code = (
        "import hashlib, sys\n"
        "from hqspray.config import accident_scenario, scale_config\n"
        "from hqspray.engine import run_reports\n"
        "from hqspray import _kernels\n"
        "assert _kernels.BACKEND == 'python'\n"
        "cfg = scale_config(accident_scenario(60, 70, seed=5), 0.33).replace(end_time=1800.0)\n"
        "_, r = run_reports(cfg)\n"
        "print(hashlib.sha256(''.join(r[k] for k in sorted(r)).encode()).hexdigest())\n"
    )
    env = dict(os.environ, HQSPRAY_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    _, r = run_reports(desk(5))
    assert out.stdout.strip() == hashlib.sha256("".join(r[k] for k in sorted(r)).encode()).hexdigest()
