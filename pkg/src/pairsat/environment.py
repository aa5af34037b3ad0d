"""Orbit clock, thermal environment, heater dynamics and pass prediction.

Circular orbit over a spherical Earth; the spacecraft interior temperature is
a sinusoid phase-locked to the orbit, and the payload relaxes toward it with
a single time constant.  All queries are pure functions of time so the
mission loop can jump or single-step without changing results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

EARTH_RADIUS_KM = 6371.0
MU_KM3_S2 = 398_600.0
SIDEREAL_RATE_RAD_S = 7.292115e-5


@dataclass(frozen=True)
class OrbitModel:
    altitude_km: float = 550.0
    inclination_deg: float = 15.0
    raan_deg: float = 0.0
    phase_deg: float = 0.0
    earth_rotation_rad_s: float = SIDEREAL_RATE_RAD_S

    def __post_init__(self) -> None:
        if self.altitude_km <= 0:
            raise ValueError("altitude_km must be positive")

    @property
    def semi_major_axis_km(self) -> float:
        return EARTH_RADIUS_KM + self.altitude_km

    @property
    def period_s(self) -> float:
        a = self.semi_major_axis_km
        return 2.0 * math.pi * math.sqrt(a**3 / MU_KM3_S2)

    @property
    def mean_motion_rad_s(self) -> float:
        return 2.0 * math.pi / self.period_s


@dataclass(frozen=True)
class ThermalModel:
    """Spacecraft-interior sinusoid plus first-order payload response."""

    mean_c: float = 12.0
    amplitude_c: float = 14.0
    phase_offset_deg: float = 218.6
    relax_tau_s: float = 900.0
    heater_rate_c_per_min: float = 1.5
    sensor_offset_c: float = 3.0
    sensor_tau_s: float = 120.0


@dataclass(frozen=True)
class ThermalState:
    ambient_c: float
    payload_c: float
    heater_on: bool
    t1_c: float
    t2_c: float


@dataclass(frozen=True)
class GroundStation:
    name: str = "Singapore"
    latitude_deg: float = 1.29
    longitude_deg: float = 103.85
    mask_deg: float = 10.0


@dataclass(frozen=True)
class Pass:
    aos_epoch_s: int
    los_epoch_s: int
    max_elevation_deg: float

    def __post_init__(self) -> None:
        if self.los_epoch_s <= self.aos_epoch_s:
            raise ValueError("los must be after aos")

    @property
    def duration_s(self) -> int:
        return self.los_epoch_s - self.aos_epoch_s


def ambient_temperature(t_s, thermal: ThermalModel, orbit: OrbitModel):
    """Spacecraft interior temperature (degC) at mission time t (accepts arrays)."""
    phase = 2.0 * math.pi * np.asarray(t_s, dtype=float) / orbit.period_s
    out = thermal.mean_c + thermal.amplitude_c * np.sin(
        phase + math.radians(thermal.phase_offset_deg)
    )
    return float(out) if np.isscalar(t_s) or np.ndim(t_s) == 0 else out


def initial_thermal_state(t_s: float, thermal: ThermalModel, orbit: OrbitModel) -> ThermalState:
    amb = ambient_temperature(t_s, thermal, orbit)
    return ThermalState(ambient_c=amb, payload_c=amb, heater_on=False, t1_c=amb, t2_c=amb)


def step_thermal(
    state: ThermalState,
    dt_s: float,
    heater_on: bool,
    thermal: ThermalModel,
    ambient_c: float | None = None,
) -> ThermalState:
    """Advance the payload temperature by dt seconds.

    The ambient is held constant over the step (pass the value at the step
    start).  Payload relaxes exponentially toward ambient; the heater adds a
    fixed degC-per-minute drive while on.  T1 reads the payload bulk, T2 adds
    a smoothed heater-proximity offset.
    """
    if dt_s <= 0:
        raise ValueError("dt_s must be positive")
    amb = state.ambient_c if ambient_c is None else ambient_c
    decay = math.exp(-dt_s / thermal.relax_tau_s)
    payload = (1.0 - decay) * amb + decay * state.payload_c
    if heater_on:
        payload += thermal.heater_rate_c_per_min / 60.0 * dt_s

    offset = state.t2_c - state.t1_c
    target = thermal.sensor_offset_c if heater_on else 0.0
    s_decay = math.exp(-dt_s / thermal.sensor_tau_s)
    offset = (1.0 - s_decay) * target + s_decay * offset
    return ThermalState(
        ambient_c=amb,
        payload_c=payload,
        heater_on=heater_on,
        t1_c=payload,
        t2_c=payload + offset,
    )


def advance_thermal(
    state: ThermalState,
    t0_s: float,
    n_seconds: int,
    thermal: ThermalModel,
    orbit: OrbitModel,
) -> ThermalState:
    """Fast-forward n one-second heater-off steps starting at time t0.

    Vectorized form of repeated ``step_thermal(..., 1, False)``; results match
    the explicit loop so clock jumps of any size land on the same state.
    """
    if n_seconds <= 0:
        return state
    amb = ambient_temperature(t0_s + np.arange(n_seconds, dtype=float), thermal, orbit)
    decay = math.exp(-1.0 / thermal.relax_tau_s)
    _, zf = lfilter([0.0, 1.0 - decay], [1.0, -decay], amb, zi=[state.payload_c])
    payload = float(zf[0])

    offset = state.t2_c - state.t1_c
    offset *= math.exp(-n_seconds / thermal.sensor_tau_s)
    return ThermalState(
        ambient_c=float(amb[-1]),
        payload_c=payload,
        heater_on=False,
        t1_c=payload,
        t2_c=payload + offset,
    )


def subsatellite_point(t_s, orbit: OrbitModel, earth_fixed: bool = True):
    """Sub-satellite latitude/longitude (deg) at time t (accepts arrays)."""
    t = np.asarray(t_s, dtype=float)
    u = math.radians(orbit.phase_deg) + orbit.mean_motion_rad_s * t
    inc = math.radians(orbit.inclination_deg)
    lat = np.arcsin(np.sin(inc) * np.sin(u))
    lon = math.radians(orbit.raan_deg) + np.arctan2(np.cos(inc) * np.sin(u), np.cos(u))
    if earth_fixed:
        lon = lon - orbit.earth_rotation_rad_s * t
    lat_deg = np.degrees(lat)
    lon_deg = (np.degrees(lon) + 180.0) % 360.0 - 180.0
    if np.ndim(t_s) == 0:
        return float(lat_deg), float(lon_deg)
    return lat_deg, lon_deg


def elevation_deg(t_s, orbit: OrbitModel, station: GroundStation):
    """Elevation of the spacecraft above the station horizon (accepts arrays)."""
    lat, lon = subsatellite_point(t_s, orbit, earth_fixed=True)
    lat = np.radians(lat)
    lon = np.radians(lon)
    st_lat = math.radians(station.latitude_deg)
    st_lon = math.radians(station.longitude_deg)

    r = orbit.semi_major_axis_km
    sat = np.stack(
        [np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=-1
    ) * r
    st = np.array(
        [
            math.cos(st_lat) * math.cos(st_lon),
            math.cos(st_lat) * math.sin(st_lon),
            math.sin(st_lat),
        ]
    )
    d = sat - EARTH_RADIUS_KM * st
    dist = np.linalg.norm(d, axis=-1)
    sin_el = (d @ st) / dist
    el = np.degrees(np.arcsin(np.clip(sin_el, -1.0, 1.0)))
    return float(el) if np.ndim(t_s) == 0 else el


def _coverage_radius_deg(orbit: OrbitModel, mask_deg: float) -> float:
    # central angle from sub-satellite point to the mask-elevation horizon
    el = math.radians(mask_deg)
    psi = math.acos(EARTH_RADIUS_KM * math.cos(el) / orbit.semi_major_axis_km) - el
    return math.degrees(psi)


def scan_passes(
    t0_s: int,
    t1_s: int,
    orbit: OrbitModel,
    station: GroundStation,
    mask_deg: float | None = None,
    chunk_s: int = 86_400,
) -> list[Pass]:
    """All passes with AOS in [t0, t1), from a 1 s elevation scan."""
    mask = station.mask_deg if mask_deg is None else mask_deg
    if abs(station.latitude_deg) > orbit.inclination_deg + _coverage_radius_deg(orbit, mask):
        return []

    passes: list[Pass] = []
    t = int(t0_s)
    carry_start: int | None = None
    carry_max = -90.0
    while t < t1_s:
        end = min(t + chunk_s, int(t1_s))
        ts = np.arange(t, end, dtype=float)
        el = elevation_deg(ts, orbit, station)
        above = el >= mask
        i = 0
        n = len(ts)
        while i < n:
            if carry_start is None:
                while i < n and not above[i]:
                    i += 1
                if i == n:
                    break
                carry_start = t + i
                carry_max = -90.0
            j = i
            while j < n and above[j]:
                carry_max = max(carry_max, float(el[j]))
                j += 1
            if j < n:
                passes.append(Pass(carry_start, t + j, round(carry_max, 6)))
                carry_start = None
                i = j
            else:
                i = n
        t = end
    if carry_start is not None:
        # window ended mid-pass; report what was seen
        passes.append(Pass(carry_start, int(t1_s), round(carry_max, 6)))
    return passes


def next_passes(
    from_s: int,
    count: int,
    orbit: OrbitModel,
    station: GroundStation,
    mask_deg: float | None = None,
    search_limit_s: int = 30 * 86_400,
) -> list[Pass]:
    """The next ``count`` passes after ``from_s`` (empty if never visible)."""
    mask = station.mask_deg if mask_deg is None else mask_deg
    if abs(station.latitude_deg) > orbit.inclination_deg + _coverage_radius_deg(orbit, mask):
        return []
    out: list[Pass] = []
    t = int(from_s)
    limit = from_s + search_limit_s
    while len(out) < count and t < limit:
        window = scan_passes(t, min(t + 2 * 86_400, limit), orbit, station, mask)
        out.extend(window)
        t += 2 * 86_400
    return out[:count]


def power_available(
    profile_energy_wh: float,
    battery_budget_wh: float,
    other_profile_running: bool,
) -> bool:
    """Single-payload power gate: fits the per-orbit budget and nothing else runs."""
    return (not other_profile_running) and profile_energy_wh <= battery_budget_wh
