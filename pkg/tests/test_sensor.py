"""Sensor slave state machine, thermal model, threshold persistence."""

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import build_bus, fresh_world, make_roms
from microlan.sensor import (
    CONVERSION_MS,
    POWER_ON_HALF_DEGREES,
    SimClock,
    TemperatureSensor,
    ThermalModel,
    any_parasite_powered,
    convert_temperature,
    copy_scratchpad,
    read_scratchpad,
    recall_eeprom,
    write_thresholds,
)


class TestConversion:
    def test_power_on_value_until_first_conversion(self):
        clock, bus, (sensor,) = fresh_world(1)
        assert sensor.half_degrees == POWER_ON_HALF_DEGREES

    def test_quantizes_to_nearest_half_degree(self):
        clock, bus, (sensor,) = fresh_world(1, t_room=22.3)
        convert_temperature(bus, sensor.rom)
        assert sensor.half_degrees == 45  # 22.5 is 0.2 away, 22.0 is 0.3

    def test_tie_rounds_away_from_zero(self):
        clock, bus, (sensor,) = fresh_world(1, t_room=-22.25)
        convert_temperature(bus, sensor.rom)
        assert sensor.half_degrees == -45

    def test_extreme_room_clamps_to_sensor_range(self):
        clock, bus, (sensor,) = fresh_world(1, t_room=300.0)
        convert_temperature(bus, sensor.rom)
        assert sensor.half_degrees == 250

    def test_busy_reads_zero_until_window_elapses(self):
        clock, bus, (sensor,) = fresh_world(1)
        convert_temperature(bus, sensor.rom)
        assert bus.slot_read() == 0
        clock.advance(CONVERSION_MS - 1)
        assert bus.slot_read() == 0
        clock.advance(1)
        assert bus.slot_read() == 1

    def test_busy_contract_same_for_parasite_and_external(self):
        for parasite in (False, True):
            clock = SimClock()
            bus = build_bus()
            rom = make_roms(1, seed=int(parasite))[0]
            sensor = TemperatureSensor(rom, clock, parasite_powered=parasite)
            bus.attach(sensor)
            convert_temperature(bus, rom)
            assert bus.slot_read() == 0
            clock.advance(CONVERSION_MS)
            assert bus.slot_read() == 1

    def test_scratchpad_read_matches_internal_state(self):
        clock, bus, (sensor,) = fresh_world(1, t_room=22.3)
        convert_temperature(bus, sensor.rom)
        clock.advance(CONVERSION_MS)
        scratch = read_scratchpad(bus, sensor.rom)
        assert scratch.to_bytes() == sensor.scratchpad.to_bytes()
        assert scratch.half_degrees == 45

    @given(st.floats(min_value=-55.0, max_value=125.0, allow_nan=False))
    def test_quantization_error_bounded(self, t_room):
        clock = SimClock()
        bus = build_bus()
        rom = make_roms(1)[0]
        sensor = TemperatureSensor(rom, clock, ThermalModel(t_room, 20.0, 0.01, 0.1))
        bus.attach(sensor)
        convert_temperature(bus, rom)
        assert abs(sensor.half_degrees / 2 - t_room) <= 0.25


class TestAlarm:
    @pytest.mark.parametrize(
        "t_room,th,tl,expected",
        [
            (22.0, 30, 15, False),
            (31.0, 30, 15, True),
            (14.0, 30, 15, True),
            (30.4, 30, 15, False),  # integer part 30 is not above th
            (-0.5, 30, 0, False),  # integer part of -0.5 is 0, not below tl
            (-1.0, 30, 0, True),
        ],
    )
    def test_alarm_flag_rule(self, t_room, th, tl, expected):
        clock, bus, (sensor,) = fresh_world(1, t_room=t_room, th=th, tl=tl)
        convert_temperature(bus, sensor.rom)
        assert sensor.alarm_flag is expected

    def test_flag_updates_only_at_conversion(self):
        clock, bus, (sensor,) = fresh_world(1, t_room=22.0)
        convert_temperature(bus, sensor.rom)
        assert not sensor.alarm_flag
        sensor.thermal.t_room = 40.0
        assert not sensor.alarm_flag  # unchanged until the next conversion
        convert_temperature(bus, sensor.rom)
        assert sensor.alarm_flag

    def test_alarm_set_matches_registry_scan(self):
        rng = random.Random(17)
        for trial in range(30):
            clock, bus, sensors = fresh_world(rng.randrange(1, 8), seed=trial)
            for sensor in sensors:
                sensor.thermal.t_room = rng.uniform(-30.0, 60.0)
                sensor.th = rng.randrange(-20, 40)
                sensor.tl = rng.randrange(-40, 20)
            bus.reset()
            bus.rom_skip()
            bus.write_byte(0x44)
            clock.advance(CONVERSION_MS)
            expected = {s.rom.text for s in sensors if s.alarm_flag}
            found = {r.text for r in bus.search(alarm_only=True)}
            assert found == expected


class TestThresholdsAndEeprom:
    def test_write_scratchpad_updates_thresholds(self):
        clock, bus, (sensor,) = fresh_world(1)
        write_thresholds(bus, sensor.rom, 25, 18)
        assert (sensor.th, sensor.tl) == (25, 18)
        scratch = read_scratchpad(bus, sensor.rom)
        assert (scratch.th, scratch.tl) == (25, 18)

    def test_negative_thresholds(self):
        clock, bus, (sensor,) = fresh_world(1)
        write_thresholds(bus, sensor.rom, -5, -40)
        assert (sensor.th, sensor.tl) == (-5, -40)

    def test_copy_then_power_cycle_then_recall(self, tmp_path):
        rom = make_roms(1)[0]
        path = tmp_path / f"{rom.text}.eeprom"
        clock = SimClock()
        bus = build_bus()
        sensor = TemperatureSensor(rom, clock, th=30, tl=15, eeprom_path=path)
        bus.attach(sensor)
        write_thresholds(bus, rom, 25, 18)
        copy_scratchpad(bus, rom)
        assert path.read_text() == "TH=25\nTL=18\n"

        # power cycle: a brand new device instance on the same file
        bus2 = build_bus()
        reborn = TemperatureSensor(rom, SimClock(), th=30, tl=15, eeprom_path=path)
        bus2.attach(reborn)
        recall_eeprom(bus2, rom)
        assert (reborn.th, reborn.tl) == (25, 18)

    def test_recall_without_copy_restores_previous(self):
        clock, bus, (sensor,) = fresh_world(1, th=30, tl=15)
        write_thresholds(bus, sensor.rom, 99, -99)
        recall_eeprom(bus, sensor.rom)
        assert (sensor.th, sensor.tl) == (30, 15)

    def test_unknown_function_command_ignored_until_reset(self):
        clock, bus, (sensor,) = fresh_world(1)
        bus.reset()
        bus.rom_match(sensor.rom)
        bus.write_byte(0xA5)  # not a function command
        assert bus.read_byte() == 0xFF  # device released the line
        convert_temperature(bus, sensor.rom)  # next reset still addresses it
        assert sensor.conversion_busy


class TestPowerSupply:
    def test_parasite_device_pulls_read_low(self):
        clock = SimClock()
        bus = build_bus()
        rom = make_roms(1)[0]
        bus.attach(TemperatureSensor(rom, clock, parasite_powered=True))
        assert any_parasite_powered(bus, rom) is True

    def test_external_device_releases(self):
        clock, bus, (sensor,) = fresh_world(1)
        assert any_parasite_powered(bus, sensor.rom) is False


class TestThermalModel:
    def test_equilibrium_at_ambient(self):
        model = ThermalModel(t_room=15.0, t_ambient=15.0, k_loss=0.05, q_heater=0.4)
        model.advance(100.0)
        assert model.t_room == pytest.approx(15.0)

    def test_heater_fixed_point(self):
        model = ThermalModel(t_room=15.0, t_ambient=15.0, k_loss=0.05, q_heater=0.4)
        model.heater_on = True
        model.advance(10.0 / model.k_loss)
        assert model.t_room == pytest.approx(15.0 + 0.4 / 0.05, abs=0.01)

    def test_cooling_is_strictly_decreasing(self):
        model = ThermalModel(t_room=25.0, t_ambient=15.0, k_loss=0.05, q_heater=0.4)
        previous = model.t_room
        for _ in range(50):
            model.step()
            assert model.t_room < previous
            previous = model.t_room

    def test_unstable_step_rejected(self):
        with pytest.raises(ValueError):
            ThermalModel(t_room=20.0, t_ambient=15.0, k_loss=5.0, q_heater=0.4, dt=0.5)

    def test_nonpositive_parameters_rejected(self):
        with pytest.raises(ValueError):
            ThermalModel(t_room=20.0, t_ambient=15.0, k_loss=0.0, q_heater=0.4)
