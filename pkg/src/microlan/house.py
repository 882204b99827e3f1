"""House configuration: the JSON file that describes a simulated site, and
the builder that turns it into live objects.

Schema (all sensor fields except identity are optional):

    {
      "topology": {"radius_m": 100, "bit_error_rate": 0.0, "seed": 42},
      "sensors": [
        {"id": "10.5F7B8D020800",      // or "seed": <int>, or neither
         "ambient": 15.0, "initial_room": 20.0,
         "k_loss": 0.04, "q_heater": 0.4, "dt": 0.1,
         "th": 30, "tl": 15, "parasite": false}
      ],
      "actuators": [{"color": "red", "sensor": "10.5F7B8D020800", "role": "heater"}],
      "state_dir": "state"             // threshold persistence, relative to this file
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from random import Random

from .bridge import Bridge, HostLink
from .bus import Bus, Topology
from .core import OneWireError, RomCode, parse_rom_text
from .firmware import COLORS, Firmware, LedClient
from .sensor import SimClock, TemperatureSensor, ThermalModel


class ConfigError(OneWireError, ValueError):
    pass


@dataclass(frozen=True)
class SensorConfig:
    rom: RomCode
    ambient: float = 20.0
    initial_room: float | None = None  # defaults to ambient
    k_loss: float = 0.02
    q_heater: float = 0.3
    dt: float = 0.1
    th: int = 30
    tl: int = 15
    parasite: bool = False


@dataclass(frozen=True)
class ActuatorBinding:
    color: str
    sensor_id: str
    role: str = "heater"


@dataclass(frozen=True)
class HouseConfig:
    sensors: tuple[SensorConfig, ...]
    topology: Topology
    bindings: tuple[ActuatorBinding, ...] = ()
    state_dir: Path | None = None


def _sensor_rom(entry: dict, index: int, site_seed: int) -> RomCode:
    if "id" in entry:
        return parse_rom_text(entry["id"])
    if "seed" in entry:
        return RomCode.random(Random(entry["seed"]))
    return RomCode.random(Random(f"{site_seed}:{index}"))


def load_house(path: str | Path, seed_override: int | None = None) -> HouseConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load house config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("house config must be a JSON object")

    topo_raw = raw.get("topology", {})
    seed = seed_override if seed_override is not None else topo_raw.get("seed", 0)
    topology = Topology(
        radius_m=float(topo_raw.get("radius_m", 100.0)),
        bit_error_rate=float(topo_raw.get("bit_error_rate", 0.0)),
        rng_seed=int(seed),
    )

    sensors = []
    for index, entry in enumerate(raw.get("sensors", [])):
        if not isinstance(entry, dict):
            raise ConfigError(f"sensor entry {index} must be an object")
        try:
            rom = _sensor_rom(entry, index, topology.rng_seed)
            sensors.append(
                SensorConfig(
                    rom=rom,
                    ambient=float(entry.get("ambient", 20.0)),
                    initial_room=(
                        float(entry["initial_room"]) if "initial_room" in entry else None
                    ),
                    k_loss=float(entry.get("k_loss", 0.02)),
                    q_heater=float(entry.get("q_heater", 0.3)),
                    dt=float(entry.get("dt", 0.1)),
                    th=int(entry.get("th", 30)),
                    tl=int(entry.get("tl", 15)),
                    parasite=bool(entry.get("parasite", False)),
                )
            )
        except (OneWireError, ValueError) as exc:
            raise ConfigError(f"sensor entry {index}: {exc}") from exc

    ids = {s.rom.text for s in sensors}
    bindings = []
    for entry in raw.get("actuators", []):
        color = entry.get("color")
        sensor_id = entry.get("sensor")
        if color not in COLORS:
            raise ConfigError(f"unknown actuator color: {color!r}")
        if sensor_id not in ids:
            raise ConfigError(f"actuator bound to unknown sensor: {sensor_id!r}")
        bindings.append(ActuatorBinding(color, sensor_id, entry.get("role", "heater")))

    state_dir = None
    if "state_dir" in raw:
        state_dir = Path(raw["state_dir"])
        if not state_dir.is_absolute():
            state_dir = path.parent / state_dir

    return HouseConfig(tuple(sensors), topology, tuple(bindings), state_dir)


@dataclass
class World:
    """Everything that exists on the simulated desk."""

    config: HouseConfig
    clock: SimClock
    bus: Bus
    sensors: dict[str, TemperatureSensor]
    bridge: Bridge
    link: HostLink
    firmware: Firmware
    led_client: LedClient


def build_world(config: HouseConfig, state_dir: Path | None = None) -> World:
    """Wire up bus, sensors, bridge and firmware from a house description.

    `state_dir`, when given, overrides the config's persistence directory;
    None falls back to the config value, and a world without either keeps
    thresholds in memory only.
    """
    effective_state = state_dir if state_dir is not None else config.state_dir
    if effective_state is not None:
        effective_state = Path(effective_state)
        effective_state.mkdir(parents=True, exist_ok=True)

    clock = SimClock()
    bus = Bus(config.topology)
    sensors: dict[str, TemperatureSensor] = {}
    for entry in config.sensors:
        initial = entry.ambient if entry.initial_room is None else entry.initial_room
        try:
            thermal = ThermalModel(
                t_room=initial,
                t_ambient=entry.ambient,
                k_loss=entry.k_loss,
                q_heater=entry.q_heater,
                dt=entry.dt,
            )
        except ValueError as exc:
            raise ConfigError(f"sensor {entry.rom.text}: {exc}") from exc
        eeprom = (
            effective_state / f"{entry.rom.text}.eeprom" if effective_state is not None else None
        )
        sensor = TemperatureSensor(
            entry.rom,
            clock,
            thermal,
            th=entry.th,
            tl=entry.tl,
            parasite_powered=entry.parasite,
            eeprom_path=eeprom,
        )
        bus.attach(sensor)
        sensors[entry.rom.text] = sensor

    bridge = Bridge(bus)
    link = HostLink(bridge)
    firmware = Firmware()
    return World(
        config=config,
        clock=clock,
        bus=bus,
        sensors=sensors,
        bridge=bridge,
        link=link,
        firmware=firmware,
        led_client=LedClient(firmware),
    )
