"""Shared builders for the simulation tests."""

import random

from microlan.bus import Bus, Topology
from microlan.core import RomCode
from microlan.house import ActuatorBinding, HouseConfig, SensorConfig
from microlan.sensor import SimClock, TemperatureSensor, ThermalModel


def make_roms(count, seed=0, family=0x10):
    rng = random.Random(seed)
    roms, seen = [], set()
    while len(roms) < count:
        rom = RomCode.random(rng, family)
        if rom.serial not in seen:
            seen.add(rom.serial)
            roms.append(rom)
    return roms


def room(t=22.0, ambient=15.0, k=0.01, q=0.1, dt=0.1):
    return ThermalModel(t_room=t, t_ambient=ambient, k_loss=k, q_heater=q, dt=dt)


def build_bus(ber=0.0, seed=0, radius=100.0):
    return Bus(Topology(radius_m=radius, bit_error_rate=ber, rng_seed=seed))


def attach_sensors(bus, clock, roms, t_room=22.0, th=30, tl=15, **kwargs):
    sensors = []
    for rom in roms:
        sensor = TemperatureSensor(rom, clock, room(t_room), th=th, tl=tl, **kwargs)
        bus.attach(sensor)
        sensors.append(sensor)
    return sensors


def fresh_world(count, t_room=22.0, ber=0.0, seed=0, **kwargs):
    clock = SimClock()
    bus = build_bus(ber=ber, seed=seed)
    sensors = attach_sensors(bus, clock, make_roms(count, seed=seed + 1), t_room, **kwargs)
    return clock, bus, sensors


def random_master_script(rng, device_count):
    """Ops runnable both on a bus directly and through the host link."""
    ops = []
    for _ in range(rng.randrange(3, 9)):
        kind = rng.choice(["reset", "skip_convert", "match_convert", "read_scratch", "search"])
        if device_count == 0 and kind in ("match_convert", "read_scratch"):
            kind = "reset"
        ops.append((kind, rng.randrange(device_count) if device_count else 0))
    return ops


def run_master_script(world, master, script):
    from microlan.sensor import convert_temperature, read_scratchpad

    clock, bus, sensors = world
    results = []
    for op, arg in script:
        if op == "reset":
            results.append(master.reset())
        elif op == "skip_convert":
            convert_temperature(master)
            clock.advance(750)
        elif op == "match_convert":
            convert_temperature(master, sensors[arg].rom)
            clock.advance(750)
        elif op == "read_scratch":
            results.append(read_scratchpad(master, sensors[arg].rom).to_bytes())
        elif op == "search":
            results.append(tuple(r.text for r in master.search()))
    return results


def normalized_tail(transcript, start):
    from microlan.bus import Transcript

    tail = Transcript()
    for op in transcript.ops[start:]:
        tail.append(op.kind, op.value)
    return tail.normalized_lines()


def house_config(
    count=1,
    t_room=22.3,
    ambient=15.0,
    k_loss=0.02,
    q_heater=0.3,
    th=30,
    tl=15,
    ber=0.0,
    seed=0,
    heater_binding=False,
    state_dir=None,
):
    roms = make_roms(count, seed=seed + 1)
    sensors = tuple(
        SensorConfig(
            rom=rom,
            ambient=ambient,
            initial_room=t_room,
            k_loss=k_loss,
            q_heater=q_heater,
            th=th,
            tl=tl,
        )
        for rom in roms
    )
    bindings = ()
    if heater_binding and sensors:
        bindings = (ActuatorBinding("red", sensors[0].rom.text, "heater"),)
    return HouseConfig(
        sensors,
        Topology(radius_m=100.0, bit_error_rate=ber, rng_seed=seed),
        bindings,
        state_dir,
    )
