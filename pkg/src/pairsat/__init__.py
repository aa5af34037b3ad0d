"""Nanosatellite photon-pair payload mission simulator and ground segment."""

from .analysis import (
    DarkTrend,
    IntegratedScan,
    MalusFit,
    analyze_file,
    build_report,
    dark_trend,
    fit_malus,
    integrate_runs,
    subtract_background,
)
from .config import MissionConfig, config_from_dict, load_config, save_config
from .environment import (
    GroundStation,
    OrbitModel,
    Pass,
    ThermalModel,
    ThermalState,
    ambient_temperature,
    next_passes,
    step_thermal,
)
from .mission import Command, MissionRuntime, parse_schedule, run_campaign
from .onboard_file import OnboardFile, RunRecord, SettingRecord, decode_file, encode_file
from .optics import (
    DetectorModel,
    RateTriple,
    SourceModel,
    apply_detector_response,
    brightness_factor,
    dark_rate,
    expected_rates,
    sample_counts,
    tilt_deflection,
)
from .payload import ExperimentProfile, PayloadParams, default_profiles, execute_profile
from .telemetry import (
    DownlinkSession,
    TelemetryFrame,
    decode_frame,
    encode_frame,
    frame_file,
    reassemble,
    simulate_downlink,
)

__version__ = "0.1.0"

__all__ = [
    "analyze_file", "build_report", "dark_trend", "fit_malus", "integrate_runs",
    "subtract_background", "DarkTrend", "IntegratedScan", "MalusFit",
    "MissionConfig", "config_from_dict", "load_config", "save_config",
    "GroundStation", "OrbitModel", "Pass", "ThermalModel", "ThermalState",
    "ambient_temperature", "next_passes", "step_thermal",
    "Command", "MissionRuntime", "parse_schedule", "run_campaign",
    "OnboardFile", "RunRecord", "SettingRecord", "decode_file", "encode_file",
    "DetectorModel", "RateTriple", "SourceModel", "apply_detector_response",
    "brightness_factor", "dark_rate", "expected_rates", "sample_counts",
    "tilt_deflection",
    "ExperimentProfile", "PayloadParams", "default_profiles", "execute_profile",
    "DownlinkSession", "TelemetryFrame", "decode_frame", "encode_frame",
    "frame_file", "reassemble", "simulate_downlink",
    "__version__",
]
