"""Two-LED actuator firmware emulation and its host-side client.

The six-byte command alphabet is the complete wire protocol; framing is
plain bytes, no line discipline on the command side:

    'b' red on    -> "ON\n"      'a' green on    -> "ON\n"
    'z' red off   -> "OFF\n"     's' green off   -> "OFF\n"
    'Y' query red -> "on\n" lit, "off \n" dark
    'X' query green -> "On\n" lit, "OFF \n" dark

Every other byte is ignored: no output, no pin change. The replies are
reproduced verbatim, inconsistent casing and trailing spaces included; the
client normalizes when parsing.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import OneWireError

RED = "red"
GREEN = "green"
COLORS = (RED, GREEN)

SET_COMMANDS = {
    (RED, True): "b",
    (RED, False): "z",
    (GREEN, True): "a",
    (GREEN, False): "s",
}
QUERY_COMMANDS = {RED: "Y", GREEN: "X"}


class FirmwareError(OneWireError):
    """Missing or unparseable reply from the actuator firmware."""


@dataclass
class FirmwareState:
    pd4_red: int = 0  # output pins reset low at boot
    pd6_green: int = 0


def handle_byte(state: FirmwareState, byte: int | str) -> str:
    """Process one received character; returns the text written to the UART."""
    ch = chr(byte) if isinstance(byte, int) else byte
    if ch == "b":
        state.pd4_red = 1
        return "ON\n"
    if ch == "z":
        state.pd4_red = 0
        return "OFF\n"
    if ch == "Y":
        return "on\n" if state.pd4_red else "off \n"
    if ch == "a":
        state.pd6_green = 1
        return "ON\n"
    if ch == "s":
        state.pd6_green = 0
        return "OFF\n"
    if ch == "X":
        return "On\n" if state.pd6_green else "OFF \n"
    return ""


class Firmware:
    """One emulated controller: feed bytes in, UART text accumulates."""

    def __init__(self):
        self.state = FirmwareState()
        self.uart_output = ""

    def feed(self, byte: int | str) -> str:
        emitted = handle_byte(self.state, byte)
        self.uart_output += emitted
        return emitted


class LedClient:
    """Host side of the serial link; tolerant of the firmware's casing."""

    def __init__(self, firmware: Firmware):
        self.firmware = firmware

    def _transact(self, command: str) -> str:
        reply = self.firmware.feed(command)
        if not reply:
            raise FirmwareError(f"no reply to command {command!r}")
        return reply

    def set_led(self, color: str, on: bool) -> str:
        reply = self._transact(SET_COMMANDS[(color, on)])
        if reply.strip().lower() not in ("on", "off"):
            raise FirmwareError(f"unparseable acknowledgement {reply!r}")
        return reply

    def query_led(self, color: str) -> bool:
        reply = self._transact(QUERY_COMMANDS[color])
        normalized = reply.strip().lower()
        if normalized == "on":
            return True
        if normalized == "off":
            return False
        raise FirmwareError(f"unparseable state reply {reply!r}")
