"""Emulated 9-bit temperature sensor slave and the room that feeds it.

The sensor implements the bus slave contract as a bit-level state machine:
ROM addressing (read/match/skip/search), then one function command per
selection. Conversion latency runs on a simulated millisecond clock, never
wall time. Thresholds survive power cycles through a small text file per
device, the stand-in for the part's EEPROM.

Also provided here are the master-side command helpers. They only need a
transport exposing reset()/write_bytes()/read_bytes(), so the same code
drives a bus directly or through the serial bridge.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .bus import (
    ALARM_SEARCH,
    MATCH_ROM,
    READ_ROM,
    SEARCH_ROM,
    SKIP_ROM,
    NoPresenceError,
    SlaveDevice,
)
from .core import (
    RomCode,
    Scratchpad,
    build_scratchpad,
    integer_celsius,
    parse_scratchpad,
    quantize_half_degrees,
)

CONVERT_T = 0x44
READ_SCRATCHPAD = 0xBE
WRITE_SCRATCHPAD = 0x4E
COPY_SCRATCHPAD = 0x48
RECALL_E2 = 0xB8
READ_POWER_SUPPLY = 0xB4

CONVERSION_MS = 750
POWER_ON_HALF_DEGREES = 170  # +85.0 C until the first conversion

# slave states
_ROM_CMD = "rom_cmd"
_ROM_MATCH = "rom_match"
_SEARCH = "search"
_FUNC_CMD = "func_cmd"
_RECV_THRESHOLDS = "recv_thresholds"
_STREAM = "stream"
_READ_POWER = "read_power"
_BUSY = "busy"
_IDLE = "idle"


class SimClock:
    """Monotone millisecond counter shared by a whole simulated house."""

    def __init__(self, start_ms: int = 0):
        self.now_ms = start_ms

    def advance(self, ms: int) -> None:
        if ms < 0:
            raise ValueError("clock cannot go backwards")
        self.now_ms += ms


@dataclass
class ThermalModel:
    """First-order room model stepped by explicit Euler.

    dT/dt = -k_loss * (T - T_ambient) + q_heater when the heater is on.
    """

    t_room: float
    t_ambient: float
    k_loss: float  # 1/s
    q_heater: float  # degrees C per second
    heater_on: bool = False
    dt: float = 0.1  # seconds per step

    def __post_init__(self):
        if self.k_loss <= 0 or self.dt <= 0:
            raise ValueError("k_loss and dt must be positive")
        if self.dt * self.k_loss >= 1.0:
            raise ValueError("dt * k_loss must stay below 1 for a stable step")

    def step(self) -> None:
        heat = self.q_heater if self.heater_on else 0.0
        self.t_room += self.dt * (-self.k_loss * (self.t_room - self.t_ambient) + heat)

    def advance(self, seconds: float) -> None:
        for _ in range(round(seconds / self.dt)):
            self.step()


class TemperatureSensor(SlaveDevice):
    """One emulated sensor: identity, scratchpad, alarm flag, thresholds.

    The alarm flag compares the signed integer part of the last conversion
    against TH/TL and is recomputed only when a conversion completes. Busy
    signalling (reads return 0 until the conversion window elapses) applies
    in the post-convert state and uniformly, parasite powered or not.
    """

    def __init__(
        self,
        rom: RomCode,
        clock: SimClock,
        thermal: ThermalModel | None = None,
        th: int = 30,
        tl: int = 15,
        parasite_powered: bool = False,
        eeprom_path: str | Path | None = None,
    ):
        self.rom = rom
        self.clock = clock
        self.thermal = thermal
        self.parasite_powered = parasite_powered
        self.eeprom_path = Path(eeprom_path) if eeprom_path else None
        self.eeprom_th = th
        self.eeprom_tl = tl
        if self.eeprom_path is not None and self.eeprom_path.exists():
            self.eeprom_th, self.eeprom_tl = self._eeprom_load()
        # power-on recall: working registers start from the persisted values
        self.th = self.eeprom_th
        self.tl = self.eeprom_tl
        self.half_degrees = POWER_ON_HALF_DEGREES
        self.alarm_flag = False
        self.busy_until_ms = 0
        self._state = _IDLE
        self._bit_acc = 0
        self._bit_count = 0
        self._match_index = 0
        self._search_index = 0
        self._search_phase = 0
        self._stream_bits: list[int] = []
        self._stream_index = 0
        self._stream_next = _IDLE
        self._skip_observe = False

    # -- registers ------------------------------------------------------------

    @property
    def scratchpad(self) -> Scratchpad:
        return build_scratchpad(self.half_degrees, self.th, self.tl)

    @property
    def conversion_busy(self) -> bool:
        return self.clock.now_ms < self.busy_until_ms

    # -- slave contract ---------------------------------------------------------

    def on_reset(self) -> bool:
        self._state = _ROM_CMD
        self._bit_acc = 0
        self._bit_count = 0
        self._skip_observe = False
        return True

    def drive_bit(self) -> int:
        if self._state == _BUSY:
            self._skip_observe = True
            return 0 if self.conversion_busy else 1
        if self._state == _STREAM:
            self._skip_observe = True
            bit = self._stream_bits[self._stream_index]
            self._stream_index += 1
            if self._stream_index == len(self._stream_bits):
                self._state = self._stream_next
            return bit
        if self._state == _SEARCH and self._search_phase < 2:
            self._skip_observe = True
            own = self._rom_bit(self._search_index)
            bit = own if self._search_phase == 0 else own ^ 1
            self._search_phase += 1
            return bit
        if self._state == _READ_POWER:
            self._skip_observe = True
            return 0 if self.parasite_powered else 1
        return 1

    def observe_bit(self, line: int) -> None:
        if self._skip_observe:
            self._skip_observe = False
            return
        if self._state == _ROM_CMD:
            command = self._accumulate(line, 8)
            if command is not None:
                self._dispatch_rom_command(command)
        elif self._state == _ROM_MATCH:
            if line != self._rom_bit(self._match_index):
                self._drop_out()
                return
            self._match_index += 1
            if self._match_index == 64:
                self._state = _FUNC_CMD
        elif self._state == _SEARCH:
            # phase 2: the master wrote its chosen direction
            if line != self._rom_bit(self._search_index):
                self._drop_out()
                return
            self._search_index += 1
            self._search_phase = 0
            if self._search_index == 64:
                self._state = _FUNC_CMD
        elif self._state == _FUNC_CMD:
            command = self._accumulate(line, 8)
            if command is not None:
                self._dispatch_function_command(command)
        elif self._state == _RECV_THRESHOLDS:
            raw = self._accumulate(line, 16)
            if raw is not None:
                self.th = _signed8(raw & 0xFF)
                self.tl = _signed8(raw >> 8)
                self._state = _IDLE
        # other states ignore master traffic

    # -- internals ------------------------------------------------------------

    def _accumulate(self, bit: int, target: int) -> int | None:
        """Collect LSB-first bits; returns the value and resets when complete."""
        self._bit_acc |= bit << self._bit_count
        self._bit_count += 1
        if self._bit_count < target:
            return None
        value = self._bit_acc
        self._bit_acc = 0
        self._bit_count = 0
        return value

    def _rom_bit(self, index: int) -> int:
        return (self.rom.to_bytes()[index >> 3] >> (index & 7)) & 1

    def _drop_out(self) -> None:
        self._state = _IDLE
        self._release_from_bus()

    def _start_stream(self, data: bytes, next_state: str) -> None:
        self._stream_bits = [(byte >> i) & 1 for byte in data for i in range(8)]
        self._stream_index = 0
        self._stream_next = next_state
        self._state = _STREAM

    def _dispatch_rom_command(self, command: int) -> None:
        if command == READ_ROM:
            self._start_stream(self.rom.to_bytes(), _FUNC_CMD)
        elif command == MATCH_ROM:
            self._state = _ROM_MATCH
            self._match_index = 0
        elif command == SKIP_ROM:
            self._state = _FUNC_CMD
        elif command == SEARCH_ROM:
            self._enter_search()
        elif command == ALARM_SEARCH:
            if self.alarm_flag:
                self._enter_search()
            else:
                self._drop_out()
        else:
            self._drop_out()

    def _enter_search(self) -> None:
        self._state = _SEARCH
        self._search_index = 0
        self._search_phase = 0

    def _dispatch_function_command(self, command: int) -> None:
        if command == CONVERT_T:
            self._convert()
        elif command == READ_SCRATCHPAD:
            self._start_stream(self.scratchpad.to_bytes(), _IDLE)
        elif command == WRITE_SCRATCHPAD:
            self._state = _RECV_THRESHOLDS
            self._bit_acc = 0
            self._bit_count = 0
        elif command == COPY_SCRATCHPAD:
            self.eeprom_th = self.th
            self.eeprom_tl = self.tl
            if self.eeprom_path is not None:
                self._eeprom_write()
            self._state = _IDLE
        elif command == RECALL_E2:
            self.th = self.eeprom_th
            self.tl = self.eeprom_tl
            self._state = _IDLE
        elif command == READ_POWER_SUPPLY:
            self._state = _READ_POWER
        else:
            self._drop_out()

    def _convert(self) -> None:
        if self.thermal is not None:
            celsius = min(max(self.thermal.t_room, -55.0), 125.0)
            self.half_degrees = quantize_half_degrees(celsius)
        whole = integer_celsius(self.half_degrees)
        self.alarm_flag = whole > self.th or whole < self.tl
        self.busy_until_ms = self.clock.now_ms + CONVERSION_MS
        self._state = _BUSY

    # -- threshold persistence ---------------------------------------------------

    def _eeprom_write(self) -> None:
        self.eeprom_path.write_text(f"TH={self.eeprom_th}\nTL={self.eeprom_tl}\n")

    def _eeprom_load(self) -> tuple[int, int]:
        values = {}
        for line in self.eeprom_path.read_text().splitlines():
            key, _, value = line.partition("=")
            if key in ("TH", "TL"):
                values[key] = int(value)
        return values["TH"], values["TL"]


def _signed8(byte: int) -> int:
    return byte - 256 if byte & 0x80 else byte


# -- master-side command helpers ------------------------------------------------
# `master` is anything with reset() -> bool, write_bytes(bytes), read_bytes(n).


def select(master, rom: RomCode | None = None) -> None:
    """Reset and address one device (match) or all of them (skip)."""
    if not master.reset():
        raise NoPresenceError("no presence pulse")
    if rom is None:
        master.write_bytes(bytes([SKIP_ROM]))
    else:
        master.write_bytes(bytes([MATCH_ROM]) + rom.to_bytes())


def convert_temperature(master, rom: RomCode | None = None) -> None:
    select(master, rom)
    master.write_bytes(bytes([CONVERT_T]))


def read_scratchpad(master, rom: RomCode | None = None) -> Scratchpad:
    select(master, rom)
    master.write_bytes(bytes([READ_SCRATCHPAD]))
    return parse_scratchpad(master.read_bytes(9))


def write_thresholds(master, rom: RomCode | None, th: int, tl: int) -> None:
    select(master, rom)
    master.write_bytes(bytes([WRITE_SCRATCHPAD, th & 0xFF, tl & 0xFF]))


def copy_scratchpad(master, rom: RomCode | None = None) -> None:
    select(master, rom)
    master.write_bytes(bytes([COPY_SCRATCHPAD]))


def recall_eeprom(master, rom: RomCode | None = None) -> None:
    select(master, rom)
    master.write_bytes(bytes([RECALL_E2]))


def any_parasite_powered(master, rom: RomCode | None = None) -> bool:
    """True if any addressed device runs on parasite power (it pulls reads low)."""
    select(master, rom)
    master.write_bytes(bytes([READ_POWER_SUPPLY]))
    return master.read_bytes(1)[0] != 0xFF
