"""The bus-owning service: poll loop, virtual device tree, write queue,
thermostat relay and actuator integration.

Exactly one poll-loop context talks to the bridge, the bus and the firmware
link. Readers get an immutable snapshot that is swapped atomically at the
end of each cycle; writers go through a thread-safe command queue and are
applied at the start of the next cycle. HTTP handlers therefore never touch
the bus.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass

from .bus import SearchError
from .core import (
    CrcError,
    FormatError,
    OneWireError,
    half_degrees_text,
)
from .firmware import COLORS
from .house import World
from .sensor import (
    CONVERSION_MS,
    convert_temperature,
    copy_scratchpad,
    read_scratchpad,
    write_thresholds,
)

DEFAULT_HTTP_PORT = 8888
DEFAULT_CONTROL_PORT = 4304  # accepted for config fidelity, never served


class GatewayError(OneWireError):
    pass


class VfsError(GatewayError):
    """Path-level failure; `status` mirrors the HTTP class it maps to."""

    status = 500


class VfsNotFound(VfsError):
    status = 404


class VfsReadOnly(VfsError):
    status = 405


class VfsBadValue(VfsError):
    status = 400


class VfsUnavailable(VfsError):
    status = 503


@dataclass(frozen=True)
class GatewayConfig:
    http_port: int = DEFAULT_HTTP_PORT
    control_port: int = DEFAULT_CONTROL_PORT
    poll_interval_ms: int = 1000
    retry_limit: int = 3

    def __post_init__(self):
        if self.http_port == self.control_port:
            raise FormatError("http and control ports must differ")
        if self.poll_interval_ms < CONVERSION_MS:
            raise FormatError(
                f"poll interval must cover the {CONVERSION_MS} ms conversion latency"
            )
        if self.retry_limit < 0:
            raise FormatError("retry limit cannot be negative")


@dataclass(frozen=True)
class ThermostatRule:
    sensor: str
    actuator: str
    setpoint: float
    hysteresis: float
    enabled: bool = True

    def __post_init__(self):
        if self.actuator not in COLORS:
            raise FormatError(f"unknown actuator: {self.actuator!r}")
        if self.hysteresis < 0.5:
            raise FormatError("hysteresis must be at least 0.5 degrees")


def thermostat_eval(
    rule: ThermostatRule, reading_half: int | None, heater_on: bool
) -> bool:
    """Hysteresis relay: on below the band, off above it, hold inside.

    A missing or stale reading holds the current state (fail safe).
    """
    if not rule.enabled or reading_half is None:
        return heater_on
    celsius = reading_half / 2
    if celsius < rule.setpoint - rule.hysteresis:
        return True
    if celsius > rule.setpoint + rule.hysteresis:
        return False
    return heater_on


@dataclass(frozen=True)
class DeviceSnapshot:
    id: str
    temperature_half: int | None
    temphigh: int | None
    templow: int | None
    stale: bool
    in_alarm: bool
    last_cycle: int


@dataclass(frozen=True)
class StatusSnapshot:
    devices: tuple[DeviceSnapshot, ...] = ()
    alarm: tuple[str, ...] = ()
    actuators: tuple[tuple[str, bool], ...] = (("red", False), ("green", False))
    thermostat: ThermostatRule | None = None
    cycle: int = 0
    clock_ms: int = 0
    rooms: tuple[tuple[str, float], ...] = ()
    running: bool = False

    def device(self, device_id: str) -> DeviceSnapshot | None:
        for dev in self.devices:
            if dev.id == device_id:
                return dev
        return None

    def actuator(self, color: str) -> bool:
        return dict(self.actuators)[color]


class _Node:
    """Mutable poll-loop-private cache entry behind one device path."""

    def __init__(self, device_id):
        self.id = device_id
        self.temperature_half = None
        self.temphigh = None
        self.templow = None
        self.stale = False
        self.in_alarm = False
        self.last_cycle = -1


class Gateway:
    """Owns the world; steps it one poll cycle at a time.

    `run_cycle` may be driven by a background thread (service mode) or
    manually (scenarios, tests); either way it is the only code path that
    issues bus or firmware traffic.
    """

    def __init__(self, world: World, config: GatewayConfig | None = None):
        self.world = world
        self.config = config or GatewayConfig()
        self._commands: queue.Queue = queue.Queue()
        self._nodes: dict[str, _Node] = {}
        self._actuators = {color: False for color in COLORS}
        self._thermostat: ThermostatRule | None = None
        self._cycle = 0
        self._started = False
        self._cycle_lock = threading.Lock()
        self.snapshot = StatusSnapshot()

    # -- lifecycle ---------------------------------------------------------------

    def start(self) -> None:
        """Enumerate the bus and begin accepting writes."""
        with self._cycle_lock:
            found = self.world.link.search()
            self._nodes = {rom.text: _Node(rom.text) for rom in found}
            for color in COLORS:
                self._actuators[color] = self.world.led_client.query_led(color)
            self._started = True
            self._publish()

    def stop(self) -> None:
        with self._cycle_lock:
            self._started = False
            self._publish()

    @property
    def started(self) -> bool:
        return self._started

    # -- write queue (any thread) ---------------------------------------------------

    def _enqueue(self, command) -> None:
        if not self._started:
            raise VfsUnavailable("poll loop is not running")
        self._commands.put(command)

    def enqueue_threshold(self, device_id: str, prop: str, value: int) -> None:
        self._enqueue(("threshold", device_id, prop, value))

    def enqueue_actuator(self, color: str, on: bool) -> None:
        self._enqueue(("actuator", color, on))

    def enqueue_thermostat(self, rule: ThermostatRule | None) -> None:
        self._enqueue(("thermostat", rule))

    # -- the poll cycle (single writer) ------------------------------------------------

    def run_cycle(self) -> None:
        with self._cycle_lock:
            self._apply_pending_writes()
            for node in self._nodes.values():
                self._poll_device(node)
            self._update_alarms()
            self._run_thermostat()
            self._refresh_actuator_truth()
            self._advance_models()
            self._cycle += 1
            self._publish()

    def _apply_pending_writes(self) -> None:
        while True:
            try:
                command = self._commands.get_nowait()
            except queue.Empty:
                return
            kind = command[0]
            if kind == "threshold":
                _, device_id, prop, value = command
                self._write_threshold(device_id, prop, value)
            elif kind == "actuator":
                _, color, on = command
                self.world.led_client.set_led(color, on)
                self._actuators[color] = on
            elif kind == "thermostat":
                self._thermostat = command[1]

    def _write_threshold(self, device_id: str, prop: str, value: int) -> None:
        node = self._nodes.get(device_id)
        if node is None:
            return  # device disappeared between queueing and applying
        rom = self.world.sensors[device_id].rom if device_id in self.world.sensors else None
        if rom is None:
            return
        scratch = self._read_with_retries(rom)
        if scratch is None:
            node.stale = True
            return
        th = value if prop == "temphigh" else scratch.th
        tl = value if prop == "templow" else scratch.tl
        write_thresholds(self.world.link, rom, th, tl)
        copy_scratchpad(self.world.link, rom)
        node.temphigh = th
        node.templow = tl

    def _read_with_retries(self, rom):
        for _ in range(self.config.retry_limit + 1):
            try:
                return read_scratchpad(self.world.link, rom)
            except (CrcError, FormatError):
                continue
        return None

    def _poll_device(self, node: _Node) -> None:
        sensor = self.world.sensors.get(node.id)
        if sensor is None:
            node.stale = True
            return
        convert_temperature(self.world.link, sensor.rom)
        self.world.clock.advance(CONVERSION_MS)
        scratch = self._read_with_retries(sensor.rom)
        if scratch is None:
            node.stale = True  # cache kept, staleness flagged
            return
        node.temperature_half = scratch.half_degrees
        node.temphigh = scratch.th
        node.templow = scratch.tl
        node.stale = False
        node.last_cycle = self._cycle

    def _update_alarms(self) -> None:
        try:
            flagged = {
                rom.text
                for rom in self.world.link.search(
                    alarm_only=True, retries=self.config.retry_limit
                )
            }
        except SearchError:
            return  # noise won this cycle; keep the previous alarm set
        for node in self._nodes.values():
            node.in_alarm = node.id in flagged

    def _run_thermostat(self) -> None:
        rule = self._thermostat
        if rule is None or not rule.enabled:
            return
        node = self._nodes.get(rule.sensor)
        if node is None:
            return
        fresh = not node.stale and node.last_cycle == self._cycle
        reading = node.temperature_half if fresh else None
        current = self._actuators[rule.actuator]
        desired = thermostat_eval(rule, reading, current)
        if desired != current:
            self.world.led_client.set_led(rule.actuator, desired)
            self._actuators[rule.actuator] = desired

    def _refresh_actuator_truth(self) -> None:
        for color in COLORS:
            self._actuators[color] = self.world.led_client.query_led(color)

    def _advance_models(self) -> None:
        pins = self._actuators
        for binding in self.world.config.bindings:
            sensor = self.world.sensors.get(binding.sensor_id)
            if sensor is not None and sensor.thermal is not None:
                sensor.thermal.heater_on = pins[binding.color]
        seconds = self.config.poll_interval_ms / 1000.0
        for sensor in self.world.sensors.values():
            if sensor.thermal is not None:
                sensor.thermal.advance(seconds)
        self.world.clock.advance(self.config.poll_interval_ms)

    def _publish(self) -> None:
        devices = tuple(
            DeviceSnapshot(
                id=node.id,
                temperature_half=node.temperature_half,
                temphigh=node.temphigh,
                templow=node.templow,
                stale=node.stale,
                in_alarm=node.in_alarm,
                last_cycle=node.last_cycle,
            )
            for node in sorted(self._nodes.values(), key=lambda n: n.id)
        )
        alarm = tuple(sorted(node.id for node in self._nodes.values() if node.in_alarm))
        rooms = tuple(
            (device_id, sensor.thermal.t_room)
            for device_id, sensor in sorted(self.world.sensors.items())
            if sensor.thermal is not None
        )
        self.snapshot = StatusSnapshot(
            devices=devices,
            alarm=alarm,
            actuators=tuple(self._actuators.items()),
            thermostat=self._thermostat,
            cycle=self._cycle,
            clock_ms=self.world.clock.now_ms,
            rooms=rooms,
            running=self._started,
        )

    # -- virtual filesystem -------------------------------------------------------------

    def vfs_read(self, path: str) -> str:
        snap = self.snapshot
        if path in ("/1-wire", "/1-wire/"):
            return "".join(f"{dev.id}\n" for dev in snap.devices)
        if path in ("/1-wire/alarm", "/1-wire/alarm/"):
            return "".join(f"{device_id}\n" for device_id in snap.alarm)
        actuator = _match_actuator(path)
        if actuator is not None:
            return ("on" if snap.actuator(actuator) else "off") + "\n"
        device_id, prop = _match_property(path)
        dev = snap.device(device_id)
        if dev is None:
            raise VfsNotFound(f"no such device: {device_id}")
        if prop == "temperature":
            if dev.temperature_half is None:
                raise VfsUnavailable("no reading yet")
            return half_degrees_text(dev.temperature_half) + "\n"
        if prop == "temphigh":
            if dev.temphigh is None:
                raise VfsUnavailable("thresholds not read yet")
            return f"{dev.temphigh}\n"
        if prop == "templow":
            if dev.templow is None:
                raise VfsUnavailable("thresholds not read yet")
            return f"{dev.templow}\n"
        raise VfsNotFound(f"unknown property: {prop}")

    def vfs_write(self, path: str, text: str) -> str:
        actuator = _match_actuator(path)
        if actuator is not None:
            value = text.strip().lower()
            if value not in ("on", "off"):
                raise VfsBadValue(f"actuator value must be on/off, got {text!r}")
            self.enqueue_actuator(actuator, value == "on")
            return "queued\n"
        device_id, prop = _match_property(path)
        if self.snapshot.device(device_id) is None:
            raise VfsNotFound(f"no such device: {device_id}")
        if prop == "temperature":
            raise VfsReadOnly("temperature is read-only")
        if prop not in ("temphigh", "templow"):
            raise VfsNotFound(f"unknown property: {prop}")
        try:
            value = int(text.strip())
        except ValueError as exc:
            raise VfsBadValue(f"not an integer: {text!r}") from exc
        if not -128 <= value <= 127:
            raise VfsBadValue(f"threshold out of signed 8-bit range: {value}")
        self.enqueue_threshold(device_id, prop, value)
        return "queued\n"


def _match_actuator(path: str) -> str | None:
    parts = path.strip("/").split("/")
    if len(parts) == 2 and parts[0] == "actuators" and parts[1] in COLORS:
        return parts[1]
    return None


def _match_property(path: str) -> tuple[str, str]:
    parts = path.strip("/").split("/")
    if len(parts) == 3 and parts[0] == "1-wire":
        return parts[1], parts[2]
    raise VfsNotFound(f"unknown path: {path}")
