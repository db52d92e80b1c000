"""Scenario settings: ONE-style ``key = value`` text to :class:`SimConfig`."""
from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field

STATIONARY = "StationaryMovement"
SHORTEST_PATH = "ShortestPathMapBasedMovement"
RANDOM_WAYPOINT = "RandomWaypoint"
MOVEMENT_MODELS = (STATIONARY, SHORTEST_PATH, RANDOM_WAYPOINT)

_UNITS = {"k": 1_000, "M": 1_000_000, "G": 1_000_000_000}


class ConfigError(ValueError):
    """Malformed or inconsistent scenario settings."""


@dataclass(frozen=True)
class GroupConfig:
    group_id: str
    count: int
    movement: str = SHORTEST_PATH
    speed_min: float = 0.5
    speed_max: float = 1.5
    wait_min: float = 0.0
    wait_max: float = 120.0
    buffer_size: int = 50_000_000
    ttl: float = 18_000.0
    router: str = "SprayAndWaitRouter"
    fixed_position: tuple[float, float] | None = None

    def node_names(self) -> list[str]:
        return [f"{self.group_id}{i}" for i in range(self.count)]


@dataclass(frozen=True)
class TrafficConfig:
    interval_min: float = 25.0
    interval_max: float = 35.0
    size_min: int = 500_000
    size_max: int = 1_000_000
    # "all", or comma separated group ids / node names
    source_pool: str = "all"
    dest_pool: str = "all"
    prefix: str = "M"


@dataclass(frozen=True)
class MapConfig:
    map_file: str | None = None
    grid_rows: int = 10
    grid_cols: int = 10
    grid_spacing: float = 200.0


@dataclass(frozen=True)
class SimConfig:
    end_time: float
    groups: tuple[GroupConfig, ...]
    update_interval: float = 1.0
    transmit_speed: float = 250_000.0
    transmit_range: float = 30.0
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    rng_seed: int = 1
    high_quality_nodes: frozenset[str] = frozenset()
    hq_multiplier: int = 2
    hq_on_create: bool = True
    nrof_copies: int = 6
    binary_mode: bool = True
    map: MapConfig = field(default_factory=MapConfig)
    name: str = "scenario"

    def node_names(self) -> list[str]:
        return [n for g in self.groups for n in g.node_names()]

    def replace(self, **changes) -> SimConfig:
        return dataclasses.replace(self, **changes)


def parse_quantity(text: str) -> float:
    """``"250k"`` -> 250000.0, ``"50M"`` -> 5e7 (ONE uses decimal multipliers)."""
    text = text.strip()
    if text and text[-1] in _UNITS:
        return float(text[:-1]) * _UNITS[text[-1]]
    return float(text)


def _pair(text: str) -> tuple[float, float]:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    if len(parts) == 1:
        v = parse_quantity(parts[0])
        return v, v
    if len(parts) != 2:
        raise ValueError(f"expected one or two values, got {text!r}")
    return parse_quantity(parts[0]), parse_quantity(parts[1])


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_settings(text: str) -> dict[str, tuple[str, int]]:
    """Split settings text into ``{key: (value, line_no)}``; later lines win."""
    out: dict[str, tuple[str, int]] = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {no}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {no}: expected 'key = value', got {raw.strip()!r}")
        out[key] = (value, no)
    return out


def default_groups(pedestrians: int = 60, cars: int = 70) -> tuple[GroupConfig, ...]:
    """The four host groups of the accident scenario."""
    return (
        GroupConfig("p", pedestrians),
        GroupConfig("c", cars, speed_min=2.7, speed_max=13.9),
        GroupConfig("a", 1, movement=STATIONARY),
        GroupConfig("r", 2, movement=STATIONARY),
    )


def accident_scenario(pedestrians: int = 60, cars: int = 70, *, end_time: float = 43_200.0,
                   seed: int = 1, name: str = "scenario") -> SimConfig:
    return SimConfig(end_time=end_time, groups=default_groups(pedestrians, cars), rng_seed=seed, name=name)


def scale_config(cfg: SimConfig, scale: float) -> SimConfig:
    """Shrink node counts and duration for desk-size runs.

    Mobile group counts are rounded half-up; single-instance groups (the
    accident and the rescue centres) keep their size. ``end_time`` is rounded
    to whole hours so that ``scale=0.33`` maps 12 h onto exactly 4 h.
    """
    if not 0 < scale <= 1:
        raise ConfigError(f"scale must be in (0, 1], got {scale}")
    if scale == 1:
        return cfg
    groups = tuple(
        g if g.movement == STATIONARY else dataclasses.replace(g, count=max(1, math.floor(g.count * scale + 0.5)))
        for g in cfg.groups
    )
    end = max(3600.0, round(cfg.end_time * scale / 3600.0) * 3600.0)
    return cfg.replace(groups=groups, end_time=end)


def _pinned_fields(base: GroupConfig) -> set[str]:
    """Settings a built-in group fixes for itself, so ``Group.*`` cannot override them."""
    generic = GroupConfig("", 1)
    pinned = {"groupID", "nrofHosts"}
    if (base.speed_min, base.speed_max) != (generic.speed_min, generic.speed_max):
        pinned.add("speed")
    if base.movement != generic.movement:
        pinned.add("movementModel")
    return pinned


def load_config(text: str) -> SimConfig:
    settings = parse_settings(text)

    def get(key, conv, default):
        if key not in settings:
            return default
        value, no = settings[key]
        try:
            return conv(value)
        except ValueError as exc:
            raise ConfigError(f"line {no}: bad value for {key}: {exc}") from None

    if "Scenario.endTime" not in settings:
        raise ConfigError("missing Scenario.endTime")
    end_time = get("Scenario.endTime", parse_quantity, None)
    ttl_unit = get("Scenario.ttlUnit", str.strip, "minutes")
    if ttl_unit not in ("minutes", "seconds"):
        raise ConfigError(f"Scenario.ttlUnit must be minutes or seconds, got {ttl_unit!r}")
    ttl_scale = 60.0 if ttl_unit == "minutes" else 1.0

    group_keys = sorted(
        {m.group(1) for k in settings if (m := re.match(r"^(Group\d+)\.", k))},
        key=lambda g: int(g[5:]),
    )
    n_groups = get("Scenario.nrofHostGroups", int, None)
    # without any GroupN section the four built-in accident-scenario groups are used
    base = () if group_keys else default_groups()
    count = n_groups if n_groups is not None else (len(group_keys) or len(base))
    groups = []

    for i in range(count):
        gk = f"Group{i + 1}"
        d = base[i] if i < len(base) else GroupConfig(f"g{i + 1}", 1)
        pinned = _pinned_fields(d) if base else set()

        def gval(name, conv, default, _gk=gk, _pinned=pinned):
            key = f"{_gk}.{name}"
            if key not in settings and name not in _pinned:
                key = f"Group.{name}"
            if key not in settings:
                return default
            value, no = settings[key]
            try:
                return conv(value)
            except ValueError as exc:
                raise ConfigError(f"line {no}: bad value for {key}: {exc}") from None

        gid = gval("groupID", str.strip, d.group_id)
        movement = gval("movementModel", str.strip, d.movement)
        if movement not in MOVEMENT_MODELS:
            raise ConfigError(f"{gk}.movementModel: unknown model {movement!r}")
        speed = gval("speed", _pair, (d.speed_min, d.speed_max))
        wait = gval("waitTime", _pair, (d.wait_min, d.wait_max))
        ttl = gval("msgTtl", parse_quantity, d.ttl / ttl_scale) * ttl_scale
        fixed = gval("fixedPosition", _pair, d.fixed_position)
        g = GroupConfig(
            group_id=gid,
            count=gval("nrofHosts", int, d.count),
            movement=movement,
            speed_min=speed[0], speed_max=speed[1],
            wait_min=wait[0], wait_max=wait[1],
            buffer_size=int(gval("bufferSize", parse_quantity, d.buffer_size)),
            ttl=ttl,
            router=gval("router", str.strip, d.router),
            fixed_position=fixed,
        )
        _check_group(g, gk)
        groups.append(g)

    interval = get("Events1.interval", _pair, (25.0, 35.0))
    size = get("Events1.size", _pair, (500_000.0, 1_000_000.0))
    hosts = get("Events1.hosts", str.strip, "all")
    traffic = TrafficConfig(
        interval_min=interval[0], interval_max=interval[1],
        size_min=int(size[0]), size_max=int(size[1]),
        source_pool=get("Events1.fromHosts", str.strip, hosts),
        dest_pool=get("Events1.toHosts", str.strip, hosts),
        prefix=get("Events1.prefix", str.strip, "M"),
    )
    if traffic.interval_min > traffic.interval_max:
        raise ConfigError("Events1.interval: min > max")
    if traffic.size_min > traffic.size_max:
        raise ConfigError("Events1.size: min > max")
    if traffic.interval_min <= 0:
        raise ConfigError("Events1.interval: must be positive")

    hq_text = get("Group.highQualityNodes", str.strip, "")
    hq = frozenset(n.strip() for n in hq_text.split(",") if n.strip())

    map_cfg = MapConfig(
        map_file=get("MovementModel.mapFile", str.strip, None),
        grid_rows=get("MovementModel.gridRows", int, 10),
        grid_cols=get("MovementModel.gridCols", int, 10),
        grid_spacing=get("MovementModel.gridSpacing", parse_quantity, 200.0),
    )
    cfg = SimConfig(
        end_time=end_time,
        groups=tuple(groups),
        update_interval=get("Scenario.updateInterval", float, 1.0),
        transmit_speed=get("btInterface.transmitSpeed", parse_quantity, 250_000.0),
        transmit_range=get("btInterface.transmitRange", parse_quantity, 30.0),
        traffic=traffic,
        rng_seed=get("Scenario.rngSeed", int, 1),
        high_quality_nodes=hq,
        hq_multiplier=get("SprayAndWaitRouter.hqMultiplier", int, 2),
        hq_on_create=get("SprayAndWaitRouter.hqOnCreate", _bool, True),
        nrof_copies=get("SprayAndWaitRouter.nrofCopies", int, 6),
        binary_mode=get("SprayAndWaitRouter.binaryMode", _bool, True),
        map=map_cfg,
        name=get("Scenario.name", str.strip, "scenario"),
    )
    validate(cfg)
    return cfg


def _check_group(g: GroupConfig, key: str) -> None:
    if g.count < 1:
        raise ConfigError(f"{key}.nrofHosts must be >= 1")
    if g.speed_min > g.speed_max:
        raise ConfigError(f"{key}.speed: min > max")
    if g.speed_min < 0:
        raise ConfigError(f"{key}.speed: negative speed")
    if g.movement != STATIONARY and g.speed_max <= 0:
        raise ConfigError(f"{key}.speed: mobile group needs a positive speed")
    if g.wait_min > g.wait_max:
        raise ConfigError(f"{key}.waitTime: min > max")
    if g.buffer_size <= 0:
        raise ConfigError(f"{key}.bufferSize must be positive")
    if g.ttl <= 0:
        raise ConfigError(f"{key}.msgTtl must be positive")


def validate(cfg: SimConfig) -> None:
    if not cfg.end_time > 0:
        raise ConfigError("Scenario.endTime must be > 0")
    if not cfg.update_interval > 0:
        raise ConfigError("Scenario.updateInterval must be > 0")
    if not cfg.transmit_range > 0:
        raise ConfigError("btInterface.transmitRange must be > 0")
    if not cfg.transmit_speed > 0:
        raise ConfigError("btInterface.transmitSpeed must be > 0")
    if not cfg.groups:
        raise ConfigError("no host groups")
    if cfg.nrof_copies < 1:
        raise ConfigError("SprayAndWaitRouter.nrofCopies must be >= 1")
    if cfg.hq_multiplier < 1:
        raise ConfigError("SprayAndWaitRouter.hqMultiplier must be >= 1")
    ids = [g.group_id for g in cfg.groups]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate groupID in {ids}")
    names = cfg.node_names()
    if len(set(names)) != len(names):
        raise ConfigError("host names collide across groups")
    if len(names) < 2:
        raise ConfigError("need at least two hosts")
    for g in cfg.groups:
        _check_group(g, f"group {g.group_id}")
    unknown = cfg.high_quality_nodes - set(names)
    if unknown:
        raise ConfigError(f"Group.highQualityNodes: unknown hosts {sorted(unknown)}")


def dump_config(cfg: SimConfig) -> str:
    """Render a config back to settings text (``load_config`` inverse)."""
    lines = [
        f"Scenario.name = {cfg.name}",
        f"Scenario.endTime = {cfg.end_time:g}",
        f"Scenario.updateInterval = {cfg.update_interval!r}",
        f"Scenario.rngSeed = {cfg.rng_seed}",
        "Scenario.ttlUnit = seconds",
        f"Scenario.nrofHostGroups = {len(cfg.groups)}",
        f"btInterface.transmitSpeed = {cfg.transmit_speed!r}",
        f"btInterface.transmitRange = {cfg.transmit_range!r}",
        f"SprayAndWaitRouter.nrofCopies = {cfg.nrof_copies}",
        f"SprayAndWaitRouter.binaryMode = {str(cfg.binary_mode).lower()}",
        f"SprayAndWaitRouter.hqMultiplier = {cfg.hq_multiplier}",
        f"SprayAndWaitRouter.hqOnCreate = {str(cfg.hq_on_create).lower()}",
        f"Events1.interval = {cfg.traffic.interval_min!r}, {cfg.traffic.interval_max!r}",
        f"Events1.size = {cfg.traffic.size_min}, {cfg.traffic.size_max}",
        f"Events1.fromHosts = {cfg.traffic.source_pool}",
        f"Events1.toHosts = {cfg.traffic.dest_pool}",
        f"Events1.prefix = {cfg.traffic.prefix}",
    ]
    if cfg.map.map_file:
        lines.append(f"MovementModel.mapFile = {cfg.map.map_file}")
    lines += [
        f"MovementModel.gridRows = {cfg.map.grid_rows}",
        f"MovementModel.gridCols = {cfg.map.grid_cols}",
        f"MovementModel.gridSpacing = {cfg.map.grid_spacing!r}",
    ]
    for i, g in enumerate(cfg.groups, start=1):
        k = f"Group{i}"
        lines += [
            f"{k}.groupID = {g.group_id}",
            f"{k}.nrofHosts = {g.count}",
            f"{k}.movementModel = {g.movement}",
            f"{k}.speed = {g.speed_min!r}, {g.speed_max!r}",
            f"{k}.waitTime = {g.wait_min!r}, {g.wait_max!r}",
            f"{k}.bufferSize = {g.buffer_size}",
            f"{k}.msgTtl = {g.ttl!r}",
            f"{k}.router = {g.router}",
        ]
        if g.fixed_position is not None:
            lines.append(f"{k}.fixedPosition = {g.fixed_position[0]!r}, {g.fixed_position[1]!r}")
    if cfg.high_quality_nodes:
        lines.append("Group.highQualityNodes = " + ",".join(sorted(cfg.high_quality_nodes)))
    return "\n".join(lines) + "\n"
