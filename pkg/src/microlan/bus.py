"""Bit-level single-data-line bus: one master port, N attached slaves.

Time slots are logical transactions, not waveforms. Every slot runs in two
phases: the master drives a bit and each active slave contributes its own
drive (1 releases the line), the line settles to the wired AND, then every
active slave observes the settled line. Noise, when configured, flips only
the master's sample of read slots; slaves always see the true line.

Every master operation is recorded into a Transcript. Byte operations may be
logged at byte granularity; `Transcript.normalized()` expands them to bit
slots for comparison. A write-1 slot and a read slot that sampled 1 are the
same waveform on a real line, so normalization folds both into `RBIT 1`.
"""

from __future__ import annotations

import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from random import Random

from .core import CrcError, OneWireError, RomCode, crc8

READ_ROM = 0x33
MATCH_ROM = 0x55
SKIP_ROM = 0xCC
SEARCH_ROM = 0xF0
ALARM_SEARCH = 0xEC

RST = "RST"
WBIT = "WBIT"
RBIT = "RBIT"
WBYTE = "WBYTE"
RBYTE = "RBYTE"

_BYTE_KINDS = (WBYTE, RBYTE)

MAX_RADIUS_M = 500.0
NOMINAL_RADIUS_M = 200.0
MAX_BIT_ERROR_RATE = 0.01


class BusError(OneWireError):
    pass


class DuplicateRomError(BusError):
    pass


class NoPresenceError(BusError):
    pass


class SearchError(BusError):
    """Search aborted after exhausting retries; carries the partial result."""

    def __init__(self, message: str, found: list[RomCode]):
        super().__init__(message)
        self.found = found


class TopologyError(OneWireError, ValueError):
    pass


class TopologyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Topology:
    """Physical-layer stand-in: network radius drives the bit error rate."""

    radius_m: float = 100.0
    bit_error_rate: float = 0.0
    rng_seed: int = 0


def validate_topology(topology: Topology) -> Topology:
    """Check limits and derive the effective error rate for long networks.

    Up to 200 m the configuration is taken as is. Between 200 m and 500 m a
    warning is emitted and the bit error rate scales by radius/200. Beyond
    500 m the configuration is rejected.
    """
    if topology.radius_m < 0:
        raise TopologyError(f"negative radius: {topology.radius_m}")
    if topology.radius_m > MAX_RADIUS_M:
        raise TopologyError(
            f"radius {topology.radius_m:g} m exceeds the {MAX_RADIUS_M:g} m design ceiling"
        )
    if not 0.0 <= topology.bit_error_rate <= MAX_BIT_ERROR_RATE:
        raise TopologyError(f"bit error rate out of [0, {MAX_BIT_ERROR_RATE}]")
    if topology.radius_m <= NOMINAL_RADIUS_M:
        return topology
    scale = topology.radius_m / NOMINAL_RADIUS_M
    warnings.warn(
        f"radius {topology.radius_m:g} m beyond the nominal {NOMINAL_RADIUS_M:g} m; "
        f"scaling bit error rate by {scale:g}",
        TopologyWarning,
        stacklevel=2,
    )
    return replace(topology, bit_error_rate=topology.bit_error_rate * scale)


@dataclass(frozen=True)
class BusOp:
    seq: int
    kind: str
    value: int

    def line(self) -> str:
        if self.kind in _BYTE_KINDS:
            return f"{self.seq} {self.kind} 0x{self.value:02X}"
        return f"{self.seq} {self.kind} {self.value}"


class Transcript:
    """Ordered log of master operations, exportable as diffable text."""

    def __init__(self):
        self.ops: list[BusOp] = []

    def append(self, kind: str, value: int) -> None:
        self.ops.append(BusOp(len(self.ops), kind, value))

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def lines(self) -> list[str]:
        return [op.line() for op in self.ops]

    def normalized(self) -> "Transcript":
        """Expand byte ops to LSB-first bit slots, folding write-1 into read-1."""
        out = Transcript()
        for op in self.ops:
            if op.kind == RST:
                out.append(RST, op.value)
            elif op.kind == RBYTE:
                for i in range(8):
                    out.append(RBIT, (op.value >> i) & 1)
            elif op.kind == WBYTE:
                for i in range(8):
                    if (op.value >> i) & 1:
                        out.append(RBIT, 1)
                    else:
                        out.append(WBIT, 0)
            elif op.kind == WBIT:
                if op.value:
                    out.append(RBIT, 1)
                else:
                    out.append(WBIT, 0)
            else:
                out.append(op.kind, op.value)
        return out

    def normalized_lines(self) -> list[str]:
        return self.normalized().lines()


class SlaveDevice(ABC):
    """Behavioral contract of an attached slave.

    A slave that has deselected itself must release the line (drive 1) and
    ignore master traffic until the next reset; calling `_release_from_bus`
    tells the bus to stop polling it, which is equivalent and much faster.
    """

    rom: RomCode
    _bus_release = None

    @abstractmethod
    def on_reset(self) -> bool:
        """React to a bus reset; return True to assert a presence pulse."""

    @abstractmethod
    def drive_bit(self) -> int:
        """The bit this device drives in the current slot (1 = release)."""

    @abstractmethod
    def observe_bit(self, line: int) -> None:
        """See the settled line value of the current slot."""

    def _release_from_bus(self) -> None:
        if self._bus_release is not None:
            self._bus_release()


@dataclass
class DeviceHandle:
    bus: "Bus"
    device: SlaveDevice

    def detach(self) -> None:
        self.bus._detach(self.device)


class Bus:
    """The shared line. One in-flight master transaction at a time; callers
    serialize. Identical seed and operation sequence reproduce the transcript
    byte for byte."""

    def __init__(self, topology: Topology | None = None):
        self.topology = validate_topology(topology if topology is not None else Topology())
        self._rng = Random(self.topology.rng_seed)
        self._ber = self.topology.bit_error_rate
        self._devices: list[SlaveDevice] = []
        self._active: list[SlaveDevice] = []
        self._was_reset = False
        self.transcript = Transcript()

    @property
    def bit_error_rate(self) -> float:
        return self._ber

    def set_bit_error_rate(self, ber: float) -> None:
        if ber < 0:
            raise TopologyError(f"negative bit error rate: {ber}")
        self._ber = ber

    def attach(self, device: SlaveDevice) -> DeviceHandle:
        if any(d.rom == device.rom for d in self._devices):
            raise DuplicateRomError(f"ROM already on bus: {device.rom.text}")
        self._devices.append(device)
        device._bus_release = lambda dev=device: self._deactivate(dev)
        return DeviceHandle(self, device)

    def _detach(self, device: SlaveDevice) -> None:
        if device in self._devices:
            self._devices.remove(device)
        self._deactivate(device)

    def _deactivate(self, device: SlaveDevice) -> None:
        if device in self._active:
            self._active.remove(device)

    @property
    def devices(self) -> tuple[SlaveDevice, ...]:
        return tuple(self._devices)

    # -- slot primitives ---------------------------------------------------

    def reset(self) -> bool:
        self._was_reset = True
        self._active = [d for d in self._devices if d.on_reset()]
        presence = bool(self._active)
        self.transcript.append(RST, int(presence))
        return presence

    def _slot(self, master_drive: int) -> int:
        line = master_drive
        for device in list(self._active):
            line &= device.drive_bit()
        for device in list(self._active):
            device.observe_bit(line)
        return line

    def _require_reset(self) -> None:
        if not self._was_reset:
            raise BusError("bus has never been reset")

    def slot_write(self, bit: int) -> None:
        self._require_reset()
        self.transcript.append(WBIT, bit & 1)
        self._slot(bit & 1)

    def slot_read(self) -> int:
        self._require_reset()
        sampled = self._slot(1)
        if self._ber and self._rng.random() < self._ber:
            sampled ^= 1
        self.transcript.append(RBIT, sampled)
        return sampled

    # -- byte layer (LSB first) ---------------------------------------------

    def write_byte(self, value: int) -> None:
        self._require_reset()
        self.transcript.append(WBYTE, value & 0xFF)
        for i in range(8):
            self._slot((value >> i) & 1)

    def read_byte(self) -> int:
        self._require_reset()
        value = 0
        for i in range(8):
            sampled = self._slot(1)
            if self._ber and self._rng.random() < self._ber:
                sampled ^= 1
            value |= sampled << i
        self.transcript.append(RBYTE, value)
        return value

    def write_bytes(self, data: bytes) -> None:
        for byte in data:
            self.write_byte(byte)

    def read_bytes(self, count: int) -> bytes:
        return bytes(self.read_byte() for _ in range(count))

    # -- ROM commands --------------------------------------------------------

    def rom_read(self) -> RomCode:
        """Address the only device on the bus and return its identity."""
        if not self.reset():
            raise NoPresenceError("no presence pulse")
        self.write_byte(READ_ROM)
        raw = self.read_bytes(8)
        if crc8(raw) != 0:
            raise CrcError("ROM read crc mismatch (collision or noise)")
        return RomCode.from_bytes(raw)

    def rom_match(self, rom: RomCode) -> None:
        self.write_byte(MATCH_ROM)
        self.write_bytes(rom.to_bytes())

    def rom_skip(self) -> None:
        self.write_byte(SKIP_ROM)

    # -- search ---------------------------------------------------------------

    def search(self, alarm_only: bool = False, retries: int = 3) -> list[RomCode]:
        """Binary-tree enumeration of attached (or alarm-flagged) devices.

        One reset cycle per discovered device; discovery order is ascending
        by bit path. A pass whose assembled identity fails its CRC is retried
        up to `retries` times before the search aborts with the partial set.
        """
        command = ALARM_SEARCH if alarm_only else SEARCH_ROM
        found: list[RomCode] = []
        prev_bits = [0] * 64
        last_discrepancy = 0
        while True:
            for _ in range(retries + 1):
                status, bits, last_zero = self._search_pass(
                    command, prev_bits, last_discrepancy, first_pass=not found
                )
                if status != "failed":
                    break
            else:
                raise SearchError("search pass kept failing its crc check", found)
            if status == "empty":
                return found
            raw = bytes(
                sum(bits[8 * k + i] << i for i in range(8)) for k in range(8)
            )
            found.append(RomCode.from_bytes(raw))
            prev_bits = bits
            last_discrepancy = last_zero
            if last_zero == 0:
                return found

    def _search_pass(self, command, prev_bits, last_discrepancy, first_pass):
        if not self.reset():
            return ("empty" if first_pass else "failed"), None, 0
        self.write_byte(command)
        bits: list[int] = []
        last_zero = 0
        for position in range(1, 65):
            bit = self.slot_read()
            complement = self.slot_read()
            if bit and complement:
                # nobody is participating (or noise wiped the branch out)
                if position == 1 and first_pass:
                    return "empty", None, 0
                return "failed", None, 0
            if bit != complement:
                direction = bit
            else:
                # devices on both branches; pick per the discrepancy bookkeeping
                if position < last_discrepancy:
                    direction = prev_bits[position - 1]
                elif position == last_discrepancy:
                    direction = 1
                else:
                    direction = 0
                if direction == 0:
                    last_zero = position
            self.slot_write(direction)
            bits.append(direction)
        raw = bytes(sum(bits[8 * k + i] << i for i in range(8)) for k in range(8))
        if crc8(raw) != 0:
            return "failed", None, 0
        return "ok", bits, last_zero
