"""HTTP face of the gateway.

Property endpoints speak plain text, bit for bit what the virtual
filesystem renders (`22.5\\n`, `on\\n`, ...). `/status` and `/thermostat`
speak JSON. All GETs are served from the cached snapshot and never touch the
bus; PUTs return once queued and take effect on the next poll cycle, so
clients confirm writes by watching `/status`.
"""

from __future__ import annotations

import threading
import time

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field
from typing import Literal

from .core import FormatError
from .gateway import Gateway, StatusSnapshot, ThermostatRule, VfsError


class ThermostatRuleModel(BaseModel):
    sensor: str
    actuator: Literal["red", "green"]
    setpoint: float
    hysteresis: float = Field(ge=0.5)
    enabled: bool = True


class DeviceModel(BaseModel):
    id: str
    temperature: float | None
    temphigh: int | None
    templow: int | None
    stale: bool
    in_alarm: bool
    last_cycle: int


class StatusModel(BaseModel):
    devices: list[DeviceModel]
    alarm: list[str]
    actuators: dict[str, bool]
    thermostat: ThermostatRuleModel | None
    cycle: int
    clock_ms: int
    rooms: dict[str, float]
    running: bool


class QueuedModel(BaseModel):
    status: Literal["queued"] = "queued"


def _status_from_snapshot(snap: StatusSnapshot) -> StatusModel:
    return StatusModel(
        devices=[
            DeviceModel(
                id=dev.id,
                temperature=None if dev.temperature_half is None else dev.temperature_half / 2,
                temphigh=dev.temphigh,
                templow=dev.templow,
                stale=dev.stale,
                in_alarm=dev.in_alarm,
                last_cycle=dev.last_cycle,
            )
            for dev in snap.devices
        ],
        alarm=list(snap.alarm),
        actuators=dict(snap.actuators),
        thermostat=(
            ThermostatRuleModel(
                sensor=snap.thermostat.sensor,
                actuator=snap.thermostat.actuator,
                setpoint=snap.thermostat.setpoint,
                hysteresis=snap.thermostat.hysteresis,
                enabled=snap.thermostat.enabled,
            )
            if snap.thermostat is not None
            else None
        ),
        cycle=snap.cycle,
        clock_ms=snap.clock_ms,
        rooms=dict(snap.rooms),
        running=snap.running,
    )


def create_app(gateway: Gateway) -> FastAPI:
    app = FastAPI(title="microlan gateway", version="0.1.0")
    # the control panel is served from another origin; no auth by design
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def vfs_read(path: str) -> PlainTextResponse:
        try:
            return PlainTextResponse(gateway.vfs_read(path))
        except VfsError as exc:
            raise HTTPException(status_code=exc.status, detail=str(exc)) from exc

    def vfs_write(path: str, body: bytes) -> PlainTextResponse:
        try:
            return PlainTextResponse(gateway.vfs_write(path, body.decode("utf-8", "replace")))
        except VfsError as exc:
            raise HTTPException(status_code=exc.status, detail=str(exc)) from exc

    @app.get("/1-wire/", response_class=PlainTextResponse)
    def list_devices():
        return vfs_read("/1-wire/")

    @app.get("/1-wire/alarm/", response_class=PlainTextResponse)
    def list_alarms():
        return vfs_read("/1-wire/alarm/")

    @app.get("/1-wire/{device_id}/{prop}", response_class=PlainTextResponse)
    def read_property(device_id: str, prop: str):
        return vfs_read(f"/1-wire/{device_id}/{prop}")

    @app.put("/1-wire/{device_id}/{prop}", response_class=PlainTextResponse)
    async def write_property(device_id: str, prop: str, request: Request):
        return vfs_write(f"/1-wire/{device_id}/{prop}", await request.body())

    @app.get("/actuators/{color}", response_class=PlainTextResponse)
    def read_actuator(color: str):
        return vfs_read(f"/actuators/{color}")

    @app.put("/actuators/{color}", response_class=PlainTextResponse)
    async def write_actuator(color: str, request: Request):
        return vfs_write(f"/actuators/{color}", await request.body())

    @app.get("/status", response_model=StatusModel)
    def status():
        return _status_from_snapshot(gateway.snapshot)

    @app.put("/thermostat", response_model=QueuedModel)
    def put_thermostat(rule: ThermostatRuleModel):
        try:
            gateway.enqueue_thermostat(
                ThermostatRule(
                    sensor=rule.sensor,
                    actuator=rule.actuator,
                    setpoint=rule.setpoint,
                    hysteresis=rule.hysteresis,
                    enabled=rule.enabled,
                )
            )
        except VfsError as exc:
            raise HTTPException(status_code=exc.status, detail=str(exc)) from exc
        except FormatError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return QueuedModel()

    return app


class GatewayService:
    """Poll thread plus uvicorn server for the long-running `serve` mode.

    `accelerated` skips the wall-clock pacing between cycles; simulated time
    still advances by the configured poll interval per cycle.
    """

    def __init__(
        self,
        gateway: Gateway,
        host: str = "127.0.0.1",
        accelerated: bool = False,
    ):
        self.gateway = gateway
        self.host = host
        self.accelerated = accelerated
        self.app = create_app(gateway)
        self._poll_thread: threading.Thread | None = None

    def _poll_loop(self) -> None:
        interval = self.gateway.config.poll_interval_ms / 1000.0
        while self.gateway.started:
            started_at = time.monotonic()
            self.gateway.run_cycle()
            if not self.accelerated:
                remaining = interval - (time.monotonic() - started_at)
                if remaining > 0:
                    time.sleep(remaining)

    def start_polling(self) -> None:
        self.gateway.start()
        self._poll_thread = threading.Thread(
            target=self._poll_loop, name="poll-loop", daemon=True
        )
        self._poll_thread.start()

    def stop_polling(self) -> None:
        self.gateway.stop()
        if self._poll_thread is not None:
            self._poll_thread.join(timeout=10.0)
            self._poll_thread = None

    def run(self) -> None:
        """Block serving HTTP until interrupted; owns the poll thread."""
        import uvicorn

        self.start_polling()
        try:
            uvicorn.run(
                self.app,
                host=self.host,
                port=self.gateway.config.http_port,
                log_level="warning",
            )
        finally:
            self.stop_polling()
