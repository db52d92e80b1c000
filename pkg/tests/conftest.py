import os

import pytest
from hypothesis import HealthCheck, settings

from hqspray.config import GroupConfig, MapConfig, SimConfig, STATIONARY, TrafficConfig
from hqspray.engine import Simulation

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def scripted_config(positions: dict[str, tuple[float, float]], *, end_time=30.0, interval=(8.0, 8.0),
                    sources="all", dests="all", size=500_000, copies=2, hq=(), multiplier=2, buffer=50_000_000,
                    transmit_range=30.0, ttl=18000.0):
    """Stationary hosts at given spots; each host is its own one-node group named ``<id>0``."""
    groups = tuple(
        GroupConfig(name[:-1], 1, movement=STATIONARY, fixed_position=pos, buffer_size=buffer, ttl=ttl)
        for name, pos in positions.items()
    )
    return SimConfig(
        end_time=end_time, groups=groups, transmit_range=transmit_range,
        traffic=TrafficConfig(interval[0], interval[1], size, size, sources, dests),
        nrof_copies=copies, high_quality_nodes=frozenset(hq), hq_multiplier=multiplier,
        map=MapConfig(grid_rows=10, grid_cols=10, grid_spacing=200.0),
    )


def run_script(sim: Simulation, moves: dict[float, dict[str, tuple[float, float]]]):
    """Step ``sim`` to the end, teleporting hosts to ``moves[t]`` just before the tick that reaches ``t``."""
    index = {n: i for i, n in enumerate(sim.names)}
    while not sim.done:
        nxt = (sim.tick + 1) * sim.config.update_interval
        for name, (x, y) in moves.get(nxt, {}).items():
            sim.field.x[index[name]] = x
            sim.field.y[index[name]] = y
        sim.step()
    return sim.finish()


@pytest.fixture
def record_criterion(capsys):
    def _record(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return _record
