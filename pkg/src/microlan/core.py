"""Pure codec layer shared by every other module.

Covers the 64-bit ROM identity, the Dallas-style CRC8, half-degree
temperature encoding and the 9-byte sensor scratchpad image. Everything here
is a pure function over immutable values; temperatures are exact half-degree
integers (no floats inside the codecs).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from random import Random

SENSOR_FAMILY_CODE = 0x10

# temperature register limits, in half-degree counts
TEMP_MIN_HALF = -110  # -55.0 C
TEMP_MAX_HALF = 250  # +125.0 C

# fixed scratchpad bytes (extended-resolution fields carried but never used)
RESERVED_BYTE = 0xFF
COUNT_REMAIN = 0x0C
COUNT_PER_C = 0x10


class OneWireError(Exception):
    """Base class for everything this package raises on purpose."""


class CrcError(OneWireError):
    """CRC verification failed; the caller may retry the transaction."""


class FormatError(OneWireError, ValueError):
    """Malformed text, byte image or out-of-range value (not a CRC failure)."""


def _build_crc8_table() -> list[int]:
    # polynomial x^8 + x^5 + x^4 + 1, bit-serial LSB-first (reflected form 0x8C)
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = (crc >> 1) ^ 0x8C if crc & 1 else crc >> 1
        table.append(crc)
    return table


_CRC8_TABLE = _build_crc8_table()


def crc8(data) -> int:
    """CRC8 over a byte sequence, initial register 0x00, no final XOR.

    Appending the CRC to its payload always yields a sequence whose CRC is 0.
    """
    crc = 0
    for byte in data:
        crc = _CRC8_TABLE[crc ^ byte]
    return crc


_ROM_TEXT_RE = re.compile(r"^([0-9A-F]{2})\.([0-9A-F]{12})$")


@dataclass(frozen=True)
class RomCode:
    """64-bit device identity: family code, 6-byte serial, CRC8.

    `serial` is held in wire order (the order the bytes are shifted onto the
    bus, after the family code). The textual form shows the serial reversed,
    most-significant byte first.
    """

    family_code: int
    serial: bytes
    crc: int

    def __post_init__(self):
        if not 0 <= self.family_code <= 0xFF:
            raise FormatError(f"family code out of range: {self.family_code}")
        if len(self.serial) != 6:
            raise FormatError(f"serial must be 6 bytes, got {len(self.serial)}")
        expected = crc8(bytes([self.family_code]) + self.serial)
        if self.crc != expected:
            raise CrcError(
                f"ROM crc 0x{self.crc:02X} does not match computed 0x{expected:02X}"
            )

    @classmethod
    def make(cls, family_code: int, serial: bytes) -> "RomCode":
        """Build an identity with the CRC computed from the other 7 bytes."""
        return cls(family_code, bytes(serial), crc8(bytes([family_code]) + bytes(serial)))

    @classmethod
    def from_bytes(cls, raw: bytes) -> "RomCode":
        """Decode 8 wire-order bytes; raises CrcError if the CRC byte is wrong."""
        if len(raw) != 8:
            raise FormatError(f"ROM image must be 8 bytes, got {len(raw)}")
        return cls(raw[0], bytes(raw[1:7]), raw[7])

    @classmethod
    def random(cls, rng: Random, family_code: int = SENSOR_FAMILY_CODE) -> "RomCode":
        return cls.make(family_code, bytes(rng.randrange(256) for _ in range(6)))

    def to_bytes(self) -> bytes:
        return bytes([self.family_code]) + self.serial + bytes([self.crc])

    @property
    def text(self) -> str:
        return format_rom_text(self)

    @property
    def bit_path(self) -> int:
        """Sort key matching bus search discovery order.

        The first transmitted bit (family LSB) is the most significant, so
        identities compare by the earliest bit at which they diverge.
        """
        raw = int.from_bytes(self.to_bytes(), "little")
        path = 0
        for k in range(64):
            path = (path << 1) | ((raw >> k) & 1)
        return path


def format_rom_text(rom: RomCode) -> str:
    """Canonical `FF.SSSSSSSSSSSS` form, serial shown most-significant byte first."""
    return f"{rom.family_code:02X}." + bytes(reversed(rom.serial)).hex().upper()


def parse_rom_text(text: str) -> RomCode:
    """Parse the canonical text form; strict about case, length and separator."""
    m = _ROM_TEXT_RE.match(text)
    if m is None:
        raise FormatError(f"bad ROM id text: {text!r}")
    family = int(m.group(1), 16)
    serial = bytes(reversed(bytes.fromhex(m.group(2))))
    return RomCode.make(family, serial)


def encode_temperature(half_degrees: int) -> tuple[int, int]:
    """Half-degree count to the 16-bit two's-complement register, little-endian."""
    if not TEMP_MIN_HALF <= half_degrees <= TEMP_MAX_HALF:
        raise FormatError(f"temperature out of range: {half_degrees} half-degrees")
    raw = half_degrees & 0xFFFF
    return raw & 0xFF, raw >> 8


def decode_temperature(lsb: int, msb: int) -> int:
    """Inverse of encode_temperature; rejects values outside the sensor range."""
    raw = (msb << 8) | lsb
    half = raw - 0x10000 if raw & 0x8000 else raw
    if not TEMP_MIN_HALF <= half <= TEMP_MAX_HALF:
        raise FormatError(f"decoded temperature out of range: {half} half-degrees")
    return half


def quantize_half_degrees(celsius: float) -> int:
    """Nearest half-degree count, ties rounding away from zero."""
    doubled = celsius * 2.0
    half = int(doubled + 0.5) if doubled >= 0 else -int(-doubled + 0.5)
    return half


def integer_celsius(half_degrees: int) -> int:
    """Signed integer part of a half-degree reading (truncation toward zero)."""
    return -((-half_degrees) // 2) if half_degrees < 0 else half_degrees // 2


def half_degrees_text(half_degrees: int) -> str:
    """Render a reading with exactly one fractional digit, e.g. '22.5'."""
    sign = "-" if half_degrees < 0 else ""
    mag = abs(half_degrees)
    return f"{sign}{mag // 2}.{5 if mag % 2 else 0}"


def _signed8(byte: int) -> int:
    return byte - 256 if byte & 0x80 else byte


@dataclass(frozen=True)
class Scratchpad:
    """The sensor's 9-byte register image.

    Bytes 0..1 hold the temperature, 2..3 the TH/TL alarm thresholds, 4..5
    are reserved, 6..7 carry the fixed count fields, byte 8 is the CRC over
    bytes 0..7.
    """

    temp_lsb: int
    temp_msb: int
    th: int
    tl: int
    reserved: bytes = bytes([RESERVED_BYTE, RESERVED_BYTE])
    count_remain: int = COUNT_REMAIN
    count_per_c: int = COUNT_PER_C
    crc: int = -1  # placeholder replaced in __post_init__ when negative

    def __post_init__(self):
        if not -128 <= self.th <= 127 or not -128 <= self.tl <= 127:
            raise FormatError(f"threshold out of signed 8-bit range: th={self.th} tl={self.tl}")
        computed = crc8(self.to_bytes()[:8])
        if self.crc < 0:
            object.__setattr__(self, "crc", computed)
        elif self.crc != computed:
            raise CrcError(
                f"scratchpad crc 0x{self.crc:02X} does not match computed 0x{computed:02X}"
            )

    def to_bytes(self) -> bytes:
        body = bytes(
            [
                self.temp_lsb,
                self.temp_msb,
                self.th & 0xFF,
                self.tl & 0xFF,
                *self.reserved,
                self.count_remain,
                self.count_per_c,
            ]
        )
        return body + (bytes([self.crc]) if self.crc >= 0 else b"")

    @property
    def half_degrees(self) -> int:
        return decode_temperature(self.temp_lsb, self.temp_msb)


def build_scratchpad(half_degrees: int, th: int, tl: int) -> Scratchpad:
    """Assemble a valid image for a reading and thresholds; CRC filled in."""
    lsb, msb = encode_temperature(half_degrees)
    return Scratchpad(lsb, msb, th, tl)


def parse_scratchpad(data: bytes) -> Scratchpad:
    """Decode and verify a 9-byte image read off the bus.

    Raises CrcError on checksum mismatch (the transfer was corrupted, retry)
    and FormatError for anything else wrong with an image whose CRC holds:
    bad fixed bytes or an out-of-range temperature.
    """
    if len(data) != 9:
        raise FormatError(f"scratchpad image must be 9 bytes, got {len(data)}")
    if crc8(data) != 0:
        raise CrcError("scratchpad crc mismatch")
    if data[4] != RESERVED_BYTE or data[5] != RESERVED_BYTE:
        raise FormatError("reserved bytes corrupted")
    if data[6] != COUNT_REMAIN or data[7] != COUNT_PER_C:
        raise FormatError("count fields corrupted")
    decode_temperature(data[0], data[1])  # range check only
    return Scratchpad(
        data[0],
        data[1],
        _signed8(data[2]),
        _signed8(data[3]),
        bytes(data[4:6]),
        data[6],
        data[7],
        data[8],
    )
