"""Serial line driver: a byte-in/byte-out bridge onto the bus, plus the
host-side driver that talks to it.

Wire contract (normative for this artifact):

  COMMAND mode
    0xC1  bus reset; also the mandatory first byte (time-base calibration).
          Response 0xCD = presence, 0xCF = no presence.
    0xE1  switch to DATA mode (no response)
    0xA1  search accelerator off / 0xB1 on (no response)
    0x81  single-bit write-and-sample 0 / 0x91 write-and-sample 1.
          Response 0x80 | sampled bit.
    any byte before calibration other than 0xC1 draws the error marker 0x00;
    other unknown bytes are consumed silently.

  DATA mode
    Each byte is shifted onto the bus LSB-first; the byte sampled while
    shifting is returned. 0xE3 switches back to COMMAND mode; a literal data
    byte 0xE3 is sent doubled. With the accelerator on, each byte carries
    four 2-bit fields (ROM bit k lives in byte k//4): the high bit of a field
    is the desired search direction in, and (discrepancy flag, direction
    taken) out, discrepancy in the low bit. A field whose triplet reads
    (1, 1) means nobody answered; the direction falls back to the desired bit,
    so an idle pass decodes as the all-zero identity and the driver treats
    that as an empty branch.
"""

from __future__ import annotations

from dataclasses import dataclass

from .bus import Bus, SearchError
from .core import OneWireError, RomCode, crc8

CMD_RESET = 0xC1
CMD_DATA_MODE = 0xE1
CMD_ACCEL_OFF = 0xA1
CMD_ACCEL_ON = 0xB1
CMD_BIT_WRITE0 = 0x81
CMD_BIT_WRITE1 = 0x91
ESCAPE = 0xE3  # data->command switch, doubled for a literal 0xE3

RESP_PRESENCE = 0xCD
RESP_NO_PRESENCE = 0xCF
RESP_ERROR = 0x00
RESP_BIT_BASE = 0x80

COMMAND = "COMMAND"
DATA = "DATA"

SEARCH_BUFFER_LEN = 16  # 64 ROM bits, 2 bits per field


class LinkError(OneWireError):
    pass


class Bridge:
    """Byte-protocol state machine driving one bus.

    Power-on state: COMMAND mode, accelerator off, uncalibrated. The first
    accepted byte must be the reset/calibration command.
    """

    def __init__(self, bus: Bus):
        self.bus = bus
        self.mode = COMMAND
        self.search_accelerator = False
        self.calibrated = False
        self.pending_escape = False

    def feed(self, byte: int) -> int | None:
        """Consume one host byte; return the response byte, if any."""
        if self.mode == DATA:
            if self.pending_escape:
                self.pending_escape = False
                if byte == ESCAPE:
                    return self._data_byte(ESCAPE)
                self.mode = COMMAND
                return self._command_byte(byte)
            if byte == ESCAPE:
                self.pending_escape = True
                return None
            return self._data_byte(byte)
        return self._command_byte(byte)

    def _command_byte(self, byte: int) -> int | None:
        if not self.calibrated and byte != CMD_RESET:
            return RESP_ERROR
        if byte == CMD_RESET:
            self.calibrated = True
            return RESP_PRESENCE if self.bus.reset() else RESP_NO_PRESENCE
        if byte == CMD_DATA_MODE:
            self.mode = DATA
            self.pending_escape = False
            return None
        if byte == CMD_ACCEL_OFF:
            self.search_accelerator = False
            return None
        if byte == CMD_ACCEL_ON:
            self.search_accelerator = True
            return None
        if byte == CMD_BIT_WRITE0:
            self.bus.slot_write(0)
            return RESP_BIT_BASE
        if byte == CMD_BIT_WRITE1:
            return RESP_BIT_BASE | self.bus.slot_read()
        return None  # unknown command consumed, no bus effect

    def _data_byte(self, byte: int) -> int:
        if self.search_accelerator:
            return self._accelerated_byte(byte)
        response = 0
        for i in range(8):
            if (byte >> i) & 1:
                response |= self.bus.slot_read() << i
            else:
                self.bus.slot_write(0)
        return response

    def _accelerated_byte(self, byte: int) -> int:
        out = 0
        for j in range(4):
            desired = (byte >> (2 * j + 1)) & 1
            bit = self.bus.slot_read()
            complement = self.bus.slot_read()
            if bit != complement:
                direction, discrepancy = bit, 0
            elif bit == 0:
                direction, discrepancy = desired, 1
            else:
                direction, discrepancy = desired, 0  # nobody on either branch
            self.bus.slot_write(direction)
            out |= (discrepancy << (2 * j)) | (direction << (2 * j + 1))
        return out


@dataclass(frozen=True)
class BridgeFrame:
    sent: bool  # True for host->bridge
    byte: int
    mode: str

    def line(self) -> str:
        arrow = ">|" if self.sent else "<|"
        return f"{arrow} {self.byte:02X} {self.mode}"


class HostLink:
    """Host-side driver: serializes request/response over one bridge.

    Opening the link sends the calibration byte, which doubles as a bus
    reset. Exposes the same reset/write_bytes/read_bytes surface as the bus
    itself, so the master-side command helpers run unchanged over either.
    """

    def __init__(self, bridge: Bridge):
        self.bridge = bridge
        self.frames: list[BridgeFrame] = []
        self._mode = COMMAND
        self.open_presence = self.reset()

    def session_log_lines(self) -> list[str]:
        return [frame.line() for frame in self.frames]

    def _feed(self, byte: int) -> int | None:
        self.frames.append(BridgeFrame(True, byte, self.bridge.mode))
        response = self.bridge.feed(byte)
        if response is not None:
            self.frames.append(BridgeFrame(False, response, self.bridge.mode))
        return response

    def _to_command(self) -> None:
        if self._mode == DATA:
            self._feed(ESCAPE)  # resolved by the next command byte
            self._mode = COMMAND

    def _to_data(self) -> None:
        if self._mode == COMMAND:
            self._feed(CMD_DATA_MODE)
            self._mode = DATA

    # -- master surface ---------------------------------------------------------

    def reset(self) -> bool:
        self._to_command()
        response = self._feed(CMD_RESET)
        if response == RESP_PRESENCE:
            return True
        if response == RESP_NO_PRESENCE:
            return False
        raise LinkError(f"unexpected reset response: {response!r}")

    def send_data(self, data: bytes) -> bytes:
        """Shift bytes onto the bus; returns the sampled bytes, unescaped."""
        self._to_data()
        sampled = bytearray()
        for byte in data:
            if byte == ESCAPE:
                self._feed(ESCAPE)
            response = self._feed(byte)
            if response is None:
                raise LinkError("short response in data mode")
            sampled.append(response)
        return bytes(sampled)

    def write_bytes(self, data: bytes) -> None:
        self.send_data(bytes(data))

    def read_bytes(self, count: int) -> bytes:
        return self.send_data(b"\xFF" * count)

    def single_bit(self, bit: int) -> int:
        """Write-and-sample one slot through the command channel."""
        self._to_command()
        response = self._feed(CMD_BIT_WRITE1 if bit else CMD_BIT_WRITE0)
        if response is None or response & ~0x01 != RESP_BIT_BASE:
            raise LinkError(f"unexpected single-bit response: {response!r}")
        return response & 1

    def set_accelerator(self, on: bool) -> None:
        self._to_command()
        self._feed(CMD_ACCEL_ON if on else CMD_ACCEL_OFF)

    # -- search -------------------------------------------------------------------

    def search(self, alarm_only: bool = False, retries: int = 3) -> list[RomCode]:
        """Accelerated enumeration; result set identical to the direct search."""
        from .bus import ALARM_SEARCH, SEARCH_ROM

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
                raise SearchError("accelerated search kept failing its crc check", found)
            if status == "empty":
                return found
            raw = bytes(sum(bits[8 * k + i] << i for i in range(8)) for k in range(8))
            found.append(RomCode.from_bytes(raw))
            prev_bits = bits
            last_discrepancy = last_zero
            if last_zero == 0:
                return found

    def _search_pass(self, command, prev_bits, last_discrepancy, first_pass):
        if not self.reset():
            return ("empty" if first_pass else "failed"), None, 0
        self.send_data(bytes([command]))
        desired = [0] * 64
        for k in range(64):
            position = k + 1
            if position < last_discrepancy:
                desired[k] = prev_bits[k]
            elif position == last_discrepancy:
                desired[k] = 1
        buffer = bytearray(SEARCH_BUFFER_LEN)
        for k in range(64):
            buffer[k // 4] |= desired[k] << (2 * (k % 4) + 1)
        self.set_accelerator(True)
        out = self.send_data(bytes(buffer))
        self.set_accelerator(False)

        bits = [0] * 64
        last_zero = 0
        any_discrepancy = False
        for k in range(64):
            field = out[k // 4] >> (2 * (k % 4))
            discrepancy = field & 1
            bits[k] = (field >> 1) & 1
            if discrepancy:
                any_discrepancy = True
                if bits[k] == 0:
                    last_zero = k + 1
        if not any(bits) and not any_discrepancy:
            # idle pass: the all-zero sentinel means nobody participated
            return ("empty" if first_pass else "failed"), None, 0
        raw = bytes(sum(bits[8 * k + i] << i for i in range(8)) for k in range(8))
        if crc8(raw) != 0:
            return "failed", None, 0
        return "ok", bits, last_zero
