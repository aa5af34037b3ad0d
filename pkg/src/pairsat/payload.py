"""Experiment-profile table and the onboard sequencer.

A profile runs up to three phases inside a hard 30-minute operating cap:

1. heating -- heater on until the turn-on temperature is reached or the
   heating budget expires (expiry sets a flag and execution continues),
2. dark counts -- pump off, one 1 s record per second,
3. experiment -- pump on, repeated 24 s runs of 16 rotator settings
   (0.5 s settle + 1.0 s integration each) until the experiment budget or
   the 30-minute cap ends the phase.

The sequencer owns the payload thermostat: after the heating phase the
heater keeps regulating around the turn-on temperature (bang-bang with a
small hysteresis band), so science data is taken near the alignment point
whenever the orbit allows it.  Power draw is modeled as the fixed flight
envelope (peak for the first 10 minutes, idle after) regardless of heater
duty, which makes energy a pure function of elapsed time.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import environment as env
from . import optics
from .onboard_file import (
    FLAG_DARK_PHASE,
    FLAG_MODE_HOP,
    FLAG_SATURATED_1,
    FLAG_SATURATED_2,
    SETTINGS_PER_RUN,
    OnboardFile,
    RunRecord,
    SettingRecord,
)

PUMP_OFF = "off"
PUMP_CONSTANT_POWER = "constant_power"
PUMP_CONSTANT_CURRENT = "constant_current"

KNOWN_PROFILE_IDS = (
    0x10, 0x30, 0x31, 0x32, 0x33, 0x34, 0x35, 0x36,
    0x37, 0x38, 0x39, 0x3A, 0x3B, 0x3C, 0x3D,
)

RUN_DURATION_S = 24
SETTING_PERIOD_S = 1.5
# Table rows budget up to 31 min worst case (full heating budget plus both
# science phases); the flight rule truncates execution at the 30-minute cap.
MAX_BUDGET_MIN = 31
MAX_PROFILE_S = 1800


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentProfile:
    profile_id: int
    heating_budget_min: int
    dark_minutes: int
    expt_minutes: int
    pump_mode: str
    pump_setting: float  # mW for constant_power, mA for constant_current, 0 for off
    memory_type: str
    turn_on_temp_c: float | None
    rotated_arm: str = optics.SIGNAL_ARM
    hv_variant: bool = False

    def __post_init__(self) -> None:
        total = self.heating_budget_min + self.dark_minutes + self.expt_minutes
        if total > MAX_BUDGET_MIN:
            raise ProfileError(
                f"profile 0x{self.profile_id:02X} budgets {total} min, cap is {MAX_BUDGET_MIN}"
            )
        if min(self.heating_budget_min, self.dark_minutes, self.expt_minutes) < 0:
            raise ProfileError("phase budgets must be nonnegative")
        if self.pump_mode not in (PUMP_OFF, PUMP_CONSTANT_POWER, PUMP_CONSTANT_CURRENT):
            raise ProfileError(f"unknown pump mode {self.pump_mode!r}")
        if self.rotated_arm not in (optics.SIGNAL_ARM, optics.IDLER_ARM):
            raise ProfileError(f"unknown rotated arm {self.rotated_arm!r}")
        if self.rotated_arm == optics.IDLER_ARM and self.profile_id != 0x38:
            raise ProfileError("idler rotation is reserved for profile 0x38")
        if self.hv_variant and self.profile_id != 0x33:
            raise ProfileError("the alternate high voltage is reserved for profile 0x33")


@dataclass(frozen=True)
class PayloadParams:
    """Sequencer constants: pump calibration, dropouts, power envelope."""

    settle_s: float = 0.5
    integration_s: float = 1.0
    fixed_analyzer_deg: float = 0.0
    lasing_threshold_ma: float = 19.0
    lasing_slope_mw_per_ma: float = 0.55
    dropout_rate_per_s: float = 1.0 / 600.0
    dropout_min_s: float = 2.0
    dropout_max_s: float = 10.0
    hv_variant_offset_mv: int = 50
    heater_hysteresis_c: float = 0.2
    peak_power_w: float = 2.5
    idle_power_w: float = 1.3
    peak_duration_s: float = 600.0


@dataclass
class PhaseLog:
    """Timeline of one profile execution (offsets in seconds from start)."""

    phases: list[tuple[str, int, int]] = field(default_factory=list)
    heating_timeout: bool = False
    dropout_windows: list[tuple[float, float]] = field(default_factory=list)
    heater_toggles: list[tuple[int, bool]] = field(default_factory=list)
    samples: list[tuple[float, float, float]] = field(default_factory=list)  # offset, t1, t2
    elapsed_s: int = 0

    def phase_at(self, offset_s: float) -> str | None:
        for name, start, end in self.phases:
            if start <= offset_s < end:
                return name
        return None

    def temps_at(self, offset_s: float) -> tuple[float, float] | None:
        best = None
        for off, t1, t2 in self.samples:
            if off <= offset_s:
                best = (t1, t2)
            else:
                break
        return best


@dataclass
class ProfileResult:
    file: OnboardFile
    phase_log: PhaseLog
    energy_wh: float
    thermal_state: env.ThermalState


def pump_power_mw(profile: ExperimentProfile, params: PayloadParams) -> float:
    """Optical pump power for a profile's pump setting."""
    if profile.pump_mode == PUMP_OFF:
        return 0.0
    if profile.pump_mode == PUMP_CONSTANT_POWER:
        return profile.pump_setting
    power = params.lasing_slope_mw_per_ma * (profile.pump_setting - params.lasing_threshold_ma)
    return max(0.0, power)


def rotator_angle(setting_index: int) -> float:
    """Scan angle in degrees for a rotator setting (22.5 deg steps over 360)."""
    if not 0 <= setting_index < SETTINGS_PER_RUN:
        raise ValueError(f"setting_index must be 0..15, got {setting_index}")
    return 22.5 * setting_index


def _parse_pump(text: str) -> tuple[str, float]:
    text = text.strip()
    if text.upper() in ("NA", "OFF", ""):
        return PUMP_OFF, 0.0
    if text.endswith("mW"):
        return PUMP_CONSTANT_POWER, float(text[:-2])
    if text.endswith("mA"):
        return PUMP_CONSTANT_CURRENT, float(text[:-2])
    raise ProfileError(f"cannot parse pump setting {text!r}")


def load_profiles(document: str) -> dict[int, ExperimentProfile]:
    """Parse the profile table from its JSON document and validate it."""
    try:
        doc = json.loads(document)
        rows = doc["profiles"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ProfileError(f"malformed profile document: {exc}") from exc

    table: dict[int, ExperimentProfile] = {}
    for row in rows:
        try:
            pid = int(row["id"], 16) if isinstance(row["id"], str) else int(row["id"])
            mode, setting = _parse_pump(row["pump"])
            profile = ExperimentProfile(
                profile_id=pid,
                heating_budget_min=int(row["heating_min"]),
                dark_minutes=int(row["dark_min"]),
                expt_minutes=int(row["expt_min"]),
                pump_mode=mode,
                pump_setting=setting,
                memory_type=str(row["memory"]).lower(),
                turn_on_temp_c=None if row["turn_on_c"] is None else float(row["turn_on_c"]),
                rotated_arm=row.get("rotated_arm", optics.SIGNAL_ARM),
                hv_variant=bool(row.get("hv_variant", False)),
            )
        except (KeyError, ValueError) as exc:
            if isinstance(exc, ProfileError):
                raise
            raise ProfileError(f"malformed profile row {row!r}: {exc}") from exc
        if profile.profile_id not in KNOWN_PROFILE_IDS:
            raise ProfileError(f"unknown profile id 0x{profile.profile_id:02X}")
        if profile.profile_id in table:
            raise ProfileError(f"duplicate profile id 0x{profile.profile_id:02X}")
        if profile.memory_type not in ("flash", "eeprom"):
            raise ProfileError(f"unknown memory type {profile.memory_type!r}")
        table[profile.profile_id] = profile
    return table


def default_profiles() -> dict[int, ExperimentProfile]:
    """The fifteen mission profiles shipped with the package."""
    text = resources.files("pairsat.data").joinpath("profiles.json").read_text()
    return load_profiles(text)


def profile_energy_wh(elapsed_s: float, params: PayloadParams) -> float:
    """Energy for a profile of the given duration under the flight power envelope."""
    peak = min(elapsed_s, params.peak_duration_s)
    idle = max(0.0, elapsed_s - params.peak_duration_s)
    return (params.peak_power_w * peak + params.idle_power_w * idle) / 3600.0


def worst_case_energy_wh(profile: ExperimentProfile, params: PayloadParams) -> float:
    budget = min(
        60 * (profile.heating_budget_min + profile.dark_minutes + profile.expt_minutes),
        MAX_PROFILE_S,
    )
    return profile_energy_wh(budget, params)


class _Thermostat:
    """Bang-bang heater regulation around the turn-on temperature."""

    def __init__(self, setpoint_c: float | None, hysteresis_c: float):
        self.setpoint = setpoint_c
        self.hysteresis = hysteresis_c
        self.on = False

    def update(self, payload_c: float) -> bool:
        if self.setpoint is None:
            self.on = False
        elif self.on and payload_c >= self.setpoint:
            self.on = False
        elif not self.on and payload_c < self.setpoint - self.hysteresis:
            self.on = True
        return self.on


def execute_profile(
    profile: ExperimentProfile,
    start_epoch_s: int,
    thermal_state: env.ThermalState,
    thermal: env.ThermalModel,
    orbit: env.OrbitModel,
    source: optics.SourceModel,
    detectors: optics.DetectorModel,
    params: PayloadParams,
    rng: np.random.Generator,
    config_hash: int = 0,
    hop_rng: np.random.Generator | None = None,
) -> ProfileResult:
    """Run one experiment profile and produce its onboard data file.

    ``rng`` drives the count sampling; mode-hop dropouts draw from
    ``hop_rng`` when given so the two stochastic processes stay on
    independent streams.
    """
    log = PhaseLog()
    state = thermal_state
    thermostat = _Thermostat(profile.turn_on_temp_c, params.heater_hysteresis_c)
    bias_mv = detectors.bias_mv + (params.hv_variant_offset_mv if profile.hv_variant else 0)
    t = 0  # integer seconds from profile start

    def ambient(offset: float) -> float:
        return env.ambient_temperature(start_epoch_s + offset, thermal, orbit)

    def step(dt: float, heater_on: bool, offset: float) -> None:
        nonlocal state
        if heater_on != state.heater_on:
            log.heater_toggles.append((int(offset), heater_on))
        state = env.step_thermal(state, dt, heater_on, thermal, ambient_c=ambient(offset))
        log.samples.append((offset + dt, state.t1_c, state.t2_c))

    # phase 1: heating until turn-on temperature or budget expiry
    heating_budget = 60 * profile.heating_budget_min
    heat_start = t
    if profile.turn_on_temp_c is not None:
        while t - heat_start < heating_budget and state.payload_c < profile.turn_on_temp_c:
            step(1.0, True, t)
            t += 1
        log.heating_timeout = state.payload_c < profile.turn_on_temp_c
    log.phases.append(("heating", heat_start, t))

    def make_record(index: int, angle_deg: float, pump_mw: float, offset: float, extra_flags: int) -> SettingRecord:
        days = (start_epoch_s + offset) / 86_400.0
        rates = optics.expected_rates(
            angle_deg,
            params.fixed_analyzer_deg,
            pump_mw,
            state.payload_c,
            days,
            profile.rotated_arm,
            source,
            detectors,
        )
        s1, s2, coinc = optics.sample_counts(rates, params.integration_s, rng)
        flags = extra_flags
        if rates.saturated_flags[0]:
            flags |= FLAG_SATURATED_1
        if rates.saturated_flags[1]:
            flags |= FLAG_SATURATED_2
        return SettingRecord(
            setting_index=index,
            angle_centideg=int(round(angle_deg * 100)) % 36000,
            integration_ms=int(round(params.integration_s * 1000)),
            s1=s1,
            s2=s2,
            coinc=min(coinc, 0xFFFF),
            t1_centideg_c=int(round(state.t1_c * 100)),
            t2_centideg_c=int(round(state.t2_c * 100)),
            hv_mv=bias_mv,
            flags=flags,
        )

    # phase 2: dark counts, pump off, one record per second
    dark_start = t
    dark_records: list[SettingRecord] = []
    for _ in range(60 * profile.dark_minutes):
        step(1.0, thermostat.update(state.payload_c), t)
        dark_records.append(make_record(0, 0.0, 0.0, t, FLAG_DARK_PHASE))
        t += 1
    log.phases.append(("dark", dark_start, t))

    # phase 3: experiment runs inside the remaining budget
    expt_start = t
    expt_budget = min(60 * profile.expt_minutes, MAX_PROFILE_S - t)
    n_runs = int(expt_budget // RUN_DURATION_S)
    runs: list[RunRecord] = []
    if n_runs > 0:
        hops = rng if hop_rng is None else hop_rng
        power_mw = pump_power_mw(profile, params)
        n_drops = int(hops.poisson(params.dropout_rate_per_s * expt_budget))
        starts = np.sort(hops.uniform(0.0, expt_budget, size=n_drops))
        durations = hops.uniform(params.dropout_min_s, params.dropout_max_s, size=n_drops)
        dropouts = [(expt_start + s, expt_start + s + d) for s, d in zip(starts, durations)]
        log.dropout_windows = [(round(a, 3), round(b, 3)) for a, b in dropouts]

        def in_dropout(t0: float, t1: float) -> bool:
            return any(a < t1 and t0 < b for a, b in dropouts)

        for k in range(n_runs):
            run_start = t
            run_hopped = in_dropout(run_start, run_start + RUN_DURATION_S)
            settings = []
            for j in range(SETTINGS_PER_RUN):
                slot = run_start + j * SETTING_PERIOD_S
                step(params.settle_s, thermostat.update(state.payload_c), slot)
                integ_start = slot + params.settle_s
                pump = 0.0 if in_dropout(integ_start, integ_start + params.integration_s) else power_mw
                flags = FLAG_MODE_HOP if run_hopped else 0
                settings.append(make_record(j, rotator_angle(j), pump, integ_start, flags))
                step(params.integration_s, thermostat.update(state.payload_c), integ_start)
            t = run_start + RUN_DURATION_S
            runs.append(
                RunRecord(
                    run_seq=k,
                    epoch_offset_s=run_start,
                    pump_centimw=int(round(power_mw * 100)),
                    flags=FLAG_MODE_HOP if run_hopped else 0,
                    settings=tuple(settings),
                )
            )
    # the experiment phase occupies its full budget even when the last
    # partial run does not fit
    tail = expt_budget - n_runs * RUN_DURATION_S
    for _ in range(int(tail)):
        step(1.0, thermostat.update(state.payload_c), t)
        t += 1
    log.phases.append(("experiment", expt_start, t))
    log.elapsed_s = t

    file = OnboardFile(
        profile_id=profile.profile_id,
        start_epoch_s=start_epoch_s,
        bias_mv=bias_mv,
        config_hash=config_hash,
        dark_records=tuple(dark_records),
        runs=tuple(runs),
    )
    return ProfileResult(
        file=file,
        phase_log=log,
        energy_wh=profile_energy_wh(t, params),
        thermal_state=state,
    )
