"""Scripted scenario runs: an in-process gateway driven on the simulated
clock, with expectations checked through the real HTTP layer.

A scenario file is JSON: {"steps": [...]} where each step is one of

    {"op": "advance-clock", "cycles": 10}
    {"op": "set-ambient", "sensor": "<id>", "value": 15.0}
    {"op": "inject-ber", "value": 0.001}
    {"op": "http-call", "method": "PUT", "path": "/actuators/red", "body": "on"}
    {"op": "http-call", "method": "PUT", "path": "/thermostat", "json": {...}}
    {"op": "expect-property", "path": "/1-wire/<id>/temperature",
     "equals": "22.5"}                       # or value/tolerance, min, max
     plus optional "json_pointer": "/rooms/<id>" for JSON endpoints

Steps are validated before anything executes; execution stops at the first
failed expectation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from fastapi.testclient import TestClient

from .api import create_app
from .core import OneWireError
from .gateway import Gateway, GatewayConfig
from .house import HouseConfig, build_world


class ScenarioError(OneWireError, ValueError):
    pass


_KNOWN_OPS = {
    "advance-clock": (),
    "set-ambient": ("sensor", "value"),
    "inject-ber": ("value",),
    "http-call": ("method", "path"),
    "expect-property": ("path",),
}


def load_scenario(path: str | Path) -> list[dict]:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot load scenario {path}: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("steps"), list):
        raise ScenarioError("scenario must be an object with a 'steps' list")
    steps = raw["steps"]
    for index, step in enumerate(steps):
        validate_step(step, index)
    return steps


def validate_step(step: dict, index: int) -> None:
    if not isinstance(step, dict):
        raise ScenarioError(f"step {index} is not an object")
    op = step.get("op")
    if op not in _KNOWN_OPS:
        raise ScenarioError(f"step {index}: unknown op {op!r}")
    for required in _KNOWN_OPS[op]:
        if required not in step:
            raise ScenarioError(f"step {index} ({op}): missing field {required!r}")
    if op == "expect-property" and not any(
        key in step for key in ("equals", "value", "min", "max")
    ):
        raise ScenarioError(f"step {index}: expect-property needs equals/value/min/max")


@dataclass
class StepReport:
    index: int
    op: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        mark = "ok " if self.ok else "FAIL"
        text = f"{mark} step {self.index} {self.op}"
        return f"{text}: {self.detail}" if self.detail else text


class ScenarioRunner:
    """Drives one gateway through a step list; no wall-clock sleeps."""

    def __init__(
        self,
        house: HouseConfig,
        gateway_config: GatewayConfig | None = None,
        state_dir: Path | None = None,
    ):
        self.world = build_world(house, state_dir=state_dir)
        self.gateway = Gateway(self.world, gateway_config or GatewayConfig())
        self.client = TestClient(create_app(self.gateway))
        self.gateway.start()

    def close(self) -> None:
        self.gateway.stop()
        self.client.close()

    def execute(self, steps: list[dict]) -> tuple[bool, list[StepReport]]:
        reports: list[StepReport] = []
        for index, step in enumerate(steps):
            try:
                detail = self._run_step(step)
            except ScenarioError as exc:
                reports.append(StepReport(index, step.get("op", "?"), False, str(exc)))
                return False, reports
            reports.append(StepReport(index, step["op"], True, detail))
        return True, reports

    def _run_step(self, step: dict) -> str:
        op = step["op"]
        if op == "advance-clock":
            cycles = int(step.get("cycles", 1))
            for _ in range(cycles):
                self.gateway.run_cycle()
            return f"{cycles} cycle(s)"
        if op == "set-ambient":
            sensor = self.world.sensors.get(step["sensor"])
            if sensor is None or sensor.thermal is None:
                raise ScenarioError(f"unknown sensor: {step['sensor']!r}")
            sensor.thermal.t_ambient = float(step["value"])
            return f"ambient={step['value']}"
        if op == "inject-ber":
            self.world.bus.set_bit_error_rate(float(step["value"]))
            return f"ber={step['value']}"
        if op == "http-call":
            return self._http_call(step)
        if op == "expect-property":
            return self._expect_property(step)
        raise ScenarioError(f"unknown op {op!r}")

    def _http_call(self, step: dict) -> str:
        method = step["method"].upper()
        kwargs = {}
        if "json" in step:
            kwargs["json"] = step["json"]
        elif "body" in step:
            kwargs["content"] = str(step["body"])
        response = self.client.request(method, step["path"], **kwargs)
        expected = step.get("expect_status")
        if expected is not None:
            if response.status_code != int(expected):
                raise ScenarioError(
                    f"{method} {step['path']}: status {response.status_code}, "
                    f"expected {expected}"
                )
        elif response.status_code >= 400:
            raise ScenarioError(
                f"{method} {step['path']}: status {response.status_code} ({response.text.strip()})"
            )
        return f"{method} {step['path']} -> {response.status_code}"

    def _expect_property(self, step: dict) -> str:
        path = step["path"]
        response = self.client.get(path)
        if response.status_code >= 400:
            raise ScenarioError(f"GET {path}: status {response.status_code}")
        if "json_pointer" in step:
            actual = response.json()
            # slash-separated pointer, e.g. /rooms/10.5F7B8D020800
            for key in step["json_pointer"].strip("/").split("/"):
                if isinstance(actual, dict) and key in actual:
                    actual = actual[key]
                else:
                    raise ScenarioError(f"{path}: no field {step['json_pointer']!r}")
        else:
            actual = response.text.strip()

        if "equals" in step:
            expected = str(step["equals"])
            if str(actual).strip() != expected:
                raise ScenarioError(f"{path}: expected {expected!r}, actual {actual!r}")
            return f"{path} == {expected}"
        number = _as_number(actual, path)
        if "value" in step:
            tolerance = float(step.get("tolerance", 0.0))
            target = float(step["value"])
            if abs(number - target) > tolerance:
                raise ScenarioError(
                    f"{path}: expected {target} +/- {tolerance}, actual {number}"
                )
            return f"{path} ~= {target}"
        if "min" in step and number < float(step["min"]):
            raise ScenarioError(f"{path}: {number} below min {step['min']}")
        if "max" in step and number > float(step["max"]):
            raise ScenarioError(f"{path}: {number} above max {step['max']}")
        return f"{path} within bounds"


def _as_number(value, path: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: value {value!r} is not numeric") from exc
