"""Ground-truth physics of the beaker: temperature, pH, dissolved O2, light,
room humidity, and hatching progress.

The stepper is explicit Euler at a fixed dt.  Hatch fraction H integrates
the suitability of the *true* observables, scaled so that under ideal
conditions H crosses the 0.999 completion threshold exactly at the nominal
incubation time (a 24 h incubation hatches 99.9 % of viable cysts; the
stragglers trickle in afterwards).  Hatching slows proportionally when
conditions leave the soft bands; that slowdown is this model's construction,
not an empirical claim.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from enum import Enum

from .model import (
    HATCH_COMPLETE,
    HatchThresholds,
    SensorKind,
    default_thresholds,
    suitability,
)


class Actuator(Enum):
    AERATOR = "aerator"
    LAMP = "lamp"
    HEATER_SETPOINT = "heater_setpoint"


@dataclass(frozen=True)
class PlantState:
    t: float = 0.0
    temp_c: float = 25.0
    ph: float = 8.0
    o2_mg_l: float = 7.2
    light_lux: float = 5000.0
    humidity_pct: float = 60.0
    hatch_fraction: float = 0.0
    aerator_on: bool = True
    lamp_on: bool = True
    heater_setpoint_c: float = 25.0


@dataclass
class PlantParams:
    """Dynamics constants; defaults are plausible bench magnitudes."""

    dt_s: float = 1.0
    k_temp: float = 1.0 / 600.0  # heater relaxation rate, 1/s
    k_aeration: float = 1.0 / 300.0  # O2 relaxation rate when aerated, 1/s
    o2_saturation_mg_l: float = 7.2
    o2_consumption_mg_l_s: float = 2.0e-4  # at H = 1
    k_ph: float = 1.0 / 1200.0
    ph_mean: float = 8.0
    k_humidity: float = 1.0 / 1800.0
    humidity_mean_pct: float = 60.0
    lamp_lux: float = 5000.0
    noise_temp: float = 0.0
    noise_ph: float = 0.0
    noise_o2: float = 0.0
    noise_light: float = 0.0
    noise_humidity: float = 0.0
    t_hatch_s: int = 86400
    thresholds: HatchThresholds = field(default_factory=default_thresholds)

    def __post_init__(self):
        if self.dt_s <= 0:
            raise ValueError("dt_s must be positive")
        if self.t_hatch_s <= 0:
            raise ValueError("t_hatch_s must be positive")
        for name in ("k_temp", "k_aeration", "k_ph", "k_humidity"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def _noise(rng: random.Random, amplitude: float) -> float:
    # Zero-amplitude channels must not consume from the stream, so that
    # e.g. the ideal preset draws nothing at all.
    if amplitude == 0.0:
        return 0.0
    return rng.gauss(0.0, amplitude)


def step(state: PlantState, params: PlantParams, rng: random.Random) -> PlantState:
    """Advance the plant by one dt."""
    dt = params.dt_s
    temp = state.temp_c + params.k_temp * (state.heater_setpoint_c - state.temp_c) * dt
    temp += _noise(rng, params.noise_temp)

    o2_rate = -params.o2_consumption_mg_l_s * state.hatch_fraction
    if state.aerator_on:
        o2_rate += params.k_aeration * (params.o2_saturation_mg_l - state.o2_mg_l)
    o2 = max(0.0, state.o2_mg_l + o2_rate * dt + _noise(rng, params.noise_o2))

    ph = state.ph + params.k_ph * (params.ph_mean - state.ph) * dt
    ph += _noise(rng, params.noise_ph)

    humidity = state.humidity_pct + params.k_humidity * (
        params.humidity_mean_pct - state.humidity_pct
    ) * dt
    humidity += _noise(rng, params.noise_humidity)

    light = (params.lamp_lux if state.lamp_on else 0.0) + _noise(rng, params.noise_light)
    light = max(0.0, light)

    snapshot = {
        SensorKind.TEMPERATURE_C: state.temp_c,
        SensorKind.PH: state.ph,
        SensorKind.O2_MG_L: state.o2_mg_l,
        SensorKind.LIGHT_LUX: state.light_lux,
    }
    s = suitability(snapshot, params.thresholds)
    hatch = min(1.0, state.hatch_fraction + s * HATCH_COMPLETE * dt / params.t_hatch_s)

    return replace(
        state,
        t=state.t + dt,
        temp_c=temp,
        ph=ph,
        o2_mg_l=o2,
        light_lux=light,
        humidity_pct=humidity,
        hatch_fraction=hatch,
    )


def observe(state: PlantState, kind: SensorKind) -> float:
    """Project the ground-truth field a sensor of this kind would see."""
    return {
        SensorKind.TEMPERATURE_C: state.temp_c,
        SensorKind.PH: state.ph,
        SensorKind.O2_MG_L: state.o2_mg_l,
        SensorKind.HUMIDITY_PCT: state.humidity_pct,
        SensorKind.LIGHT_LUX: state.light_lux,
    }[kind]


def set_actuator(state: PlantState, actuator: Actuator, value) -> PlantState:
    if actuator is Actuator.AERATOR:
        return replace(state, aerator_on=bool(value))
    if actuator is Actuator.LAMP:
        return replace(state, lamp_on=bool(value))
    setpoint = float(value)
    if not (setpoint == setpoint and abs(setpoint) != float("inf")):
        raise ValueError("heater setpoint must be finite")
    return replace(state, heater_setpoint_c=setpoint)


@dataclass(frozen=True)
class Preset:
    """Initial state + params + optional scheduled actuator changes."""

    name: str
    state: PlantState
    params: PlantParams
    # (sim_t, actuator, value) applied by the run engine
    schedule: tuple[tuple[float, Actuator, object], ...] = ()


def preset(name: str, thresholds: HatchThresholds | None = None) -> Preset:
    """Named scenarios selectable from the run config.

    ideal            noise-free, actuators on, everything at setpoint; the
                     culture hatches in exactly the nominal incubation time.
    noisy            same setpoints with measurement-scale process noise and
                     slightly off initial conditions.
    cold-room        heater pinned at 21 degC: temperature sits halfway down
                     its low ramp, so hatching runs at half speed.
    aerator-failure  starts ideal; the air pump dies 6 h in and dissolved O2
                     decays under consumption.
    """
    thr = thresholds if thresholds is not None else default_thresholds()
    base_params = PlantParams(thresholds=thr)
    if name == "ideal":
        return Preset(name, PlantState(), base_params)
    if name == "noisy":
        params = replace(
            base_params,
            noise_temp=0.05,
            noise_ph=0.01,
            noise_o2=0.05,
            noise_light=50.0,
            noise_humidity=0.5,
        )
        state = PlantState(temp_c=23.0, ph=8.1, o2_mg_l=6.0, humidity_pct=55.0)
        return Preset(name, state, params)
    if name == "cold-room":
        state = PlantState(temp_c=21.0, heater_setpoint_c=21.0)
        return Preset(name, state, base_params)
    if name == "aerator-failure":
        return Preset(
            name,
            PlantState(),
            base_params,
            schedule=((21600.0, Actuator.AERATOR, False),),
        )
    raise ValueError(f"unknown plant preset {name!r}")


PRESET_NAMES = ("ideal", "noisy", "cold-room", "aerator-failure")
