"""Photon-pair source and detector rate models.

The payload physics is parameterized directly by observable reference rates
(coincidences per second, singles per second, dark counts per second) at a
reference operating point: 10 mW pump, crystal aligned at 18 degC, day 0 in
orbit.  Everything else is derived from a small set of phenomenological laws:

* crystal tilt grows linearly with temperature away from the alignment point,
* pair brightness falls off as a Gaussian bell in tilt (half brightness at
  the ``tilt_half_angle``),
* dark counts double every ``dark_doubling_degC`` and grow linearly with
  accumulated days in orbit,
* the polarization-correlation curve follows Malus' law with a visibility
  set by the rotator quality,
* accidental coincidences are ``s1 * s2 * coincidence_window``.

All functions are pure; sampling takes an explicit numpy Generator so callers
own their random streams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SIGNAL_ARM = "signal"
IDLER_ARM = "idler"


@dataclass(frozen=True)
class SourceModel:
    """Pair-source parameters at the reference operating point.

    Rates are counts per second, angles in degrees, temperatures in degC.
    The wavelength/crystal fields are descriptive metadata carried into
    reports; they do not enter the rate model.
    """

    pump_power_ref_mw: float = 10.0
    pump_power_max_mw: float = 40.0
    mean_coinc_ref_cps: float = 60.0
    mean_singles_spdc_ref_cps: tuple[float, float] = (33_000.0, 25_000.0)
    visibility_rotator: float = 0.97
    pbs_extinction: float = 200.0
    align_temperature_c: float = 18.0
    tilt_coeff_urad_per_c: float = 17.0
    tilt_half_angle_urad: float = 170.0
    coincidence_window_s: float = 1.0e-9
    # polarization offset of each arm's analyzer relative to the source axis
    singles_offset_deg: tuple[float, float] = (0.0, 0.0)
    signal_wavelength_nm: float = 760.0
    idler_wavelength_nm: float = 867.0
    pump_wavelength_nm: float = 405.0
    bandwidth_fwhm_nm: float = 17.0
    crystal_length_mm: float = 6.0
    phase_match_angle_deg: float = 28.8

    def __post_init__(self) -> None:
        if not 0.0 <= self.visibility_rotator <= 1.0:
            raise ValueError("visibility_rotator must be in [0, 1]")
        if self.mean_coinc_ref_cps < 0 or min(self.mean_singles_spdc_ref_cps) < 0:
            raise ValueError("reference rates must be nonnegative")
        if self.pump_power_ref_mw <= 0 or self.pump_power_max_mw <= 0:
            raise ValueError("pump powers must be positive")
        if self.tilt_half_angle_urad <= 0:
            raise ValueError("tilt_half_angle_urad must be positive")
        if self.coincidence_window_s < 0:
            raise ValueError("coincidence_window_s must be nonnegative")


@dataclass(frozen=True)
class DetectorModel:
    """Geiger-mode APD pair: dark-count baselines, aging and linear range.

    ``dark_ref_cps`` holds the (arm 1, arm 2) baselines at
    ``ref_temperature_c`` on day 0.  ``bias_mv`` is carried into telemetry
    records only and has no effect on rates.
    """

    dark_ref_cps: tuple[float, float] = (34_000.0, 24_000.0)
    radiation_slope_cps_per_day: float = 30_000.0 / 36.0
    dark_doubling_degc: float = 7.0
    linear_limit_cps: float = 600_000.0
    bias_mv: int = 0
    efficiency_scale: float = 1.0
    ref_temperature_c: float = 18.0

    def __post_init__(self) -> None:
        if min(self.dark_ref_cps) < 0:
            raise ValueError("dark baselines must be nonnegative")
        if self.dark_doubling_degc <= 0:
            raise ValueError("dark_doubling_degc must be positive")
        if self.linear_limit_cps <= 0:
            raise ValueError("linear_limit_cps must be positive")
        if self.efficiency_scale < 0:
            raise ValueError("efficiency_scale must be nonnegative")


@dataclass(frozen=True)
class RateTriple:
    """Expected observable rates (cps) for one payload state."""

    s1_expected_cps: float
    s2_expected_cps: float
    coinc_expected_cps: float
    accidental_expected_cps: float
    saturated_flags: tuple[bool, bool]


def tilt_deflection(temperature_c: float, source: SourceModel) -> float:
    """Crystal tilt in microradians at the given payload temperature."""
    return source.tilt_coeff_urad_per_c * (temperature_c - source.align_temperature_c)


def brightness_factor(deflection_urad: float, source: SourceModel) -> float:
    """Pair-production efficiency factor in (0, 1] for a given tilt.

    Even Gaussian bell: 1 at zero tilt, exactly 0.5 at +/- tilt_half_angle.
    """
    x = deflection_urad / source.tilt_half_angle_urad
    return 2.0 ** (-(x * x))


def dark_rate(
    detector_index: int,
    temperature_c: float,
    elapsed_days: float,
    det: DetectorModel,
) -> float:
    """Dark counts per second for detector 1 or 2.

    Linear growth with days in orbit, doubling per ``dark_doubling_degc``
    above the reference temperature.
    """
    if detector_index not in (1, 2):
        raise ValueError(f"detector_index must be 1 or 2, got {detector_index}")
    if elapsed_days < 0:
        raise ValueError("elapsed_days must be nonnegative")
    base = (
        det.dark_ref_cps[detector_index - 1]
        + det.radiation_slope_cps_per_day * elapsed_days
    )
    return base * 2.0 ** ((temperature_c - det.ref_temperature_c) / det.dark_doubling_degc)


def apply_detector_response(true_rate_cps: float, det: DetectorModel) -> tuple[float, bool]:
    """Reported rate and saturation flag for a true event rate.

    The closed-loop bias compensation keeps the detector linear up to
    ``linear_limit_cps``; above that the reported rate clamps.
    """
    if true_rate_cps < 0:
        raise ValueError("true_rate_cps must be nonnegative")
    if true_rate_cps <= det.linear_limit_cps:
        return true_rate_cps, False
    return det.linear_limit_cps, True


def expected_rates(
    theta_scan_deg: float,
    theta_fixed_deg: float,
    pump_mw: float,
    temperature_c: float,
    elapsed_days: float,
    rotated_arm: str,
    source: SourceModel,
    detectors: DetectorModel,
) -> RateTriple:
    """Expected singles/coincidence/accidental rates for one rotator setting.

    ``theta_scan_deg`` is the scanned rotator angle on ``rotated_arm``
    ("signal" or "idler"); the other arm sits at ``theta_fixed_deg``.
    True coincidences follow Malus' law around the mean pair rate; the
    scanned arm's own singles are modulated with the same visibility while
    the fixed arm's singles stay at their scan-average.  Dark counts add to
    each arm, and accidentals (s1 * s2 * window) add to the coincidences.
    """
    if pump_mw < 0:
        raise ValueError("pump_mw must be nonnegative")
    if rotated_arm not in (SIGNAL_ARM, IDLER_ARM):
        raise ValueError(f"rotated_arm must be 'signal' or 'idler', got {rotated_arm!r}")
    pump_mw = min(pump_mw, source.pump_power_max_mw)

    gain = (
        brightness_factor(tilt_deflection(temperature_c, source), source)
        * pump_mw
        / source.pump_power_ref_mw
    )
    eff = detectors.efficiency_scale
    vis = source.visibility_rotator
    scan = 0 if rotated_arm == SIGNAL_ARM else 1

    malus = 1.0 + vis * math.cos(2.0 * math.radians(theta_scan_deg - theta_fixed_deg))
    coinc_true = gain * source.mean_coinc_ref_cps * malus * eff * eff

    spdc = [gain * r * eff for r in source.mean_singles_spdc_ref_cps]
    self_malus = 1.0 + vis * math.cos(
        2.0 * math.radians(theta_scan_deg - source.singles_offset_deg[scan])
    )
    spdc[scan] *= self_malus

    s1_true = dark_rate(1, temperature_c, elapsed_days, detectors) + spdc[0]
    s2_true = dark_rate(2, temperature_c, elapsed_days, detectors) + spdc[1]
    s1, sat1 = apply_detector_response(s1_true, detectors)
    s2, sat2 = apply_detector_response(s2_true, detectors)

    accidentals = s1 * s2 * source.coincidence_window_s
    return RateTriple(
        s1_expected_cps=s1,
        s2_expected_cps=s2,
        coinc_expected_cps=coinc_true + accidentals,
        accidental_expected_cps=accidentals,
        saturated_flags=(sat1, sat2),
    )


def sample_counts(
    rates: RateTriple, integration_s: float, rng: np.random.Generator
) -> tuple[int, int, int]:
    """Draw observed (s1, s2, coinc) counts for one integration interval.

    Independent Poisson draws per channel; the shot-noise coupling between
    singles and coincidences is deliberately not modeled.
    """
    if integration_s <= 0:
        raise ValueError("integration_s must be positive")
    s1 = int(rng.poisson(rates.s1_expected_cps * integration_s))
    s2 = int(rng.poisson(rates.s2_expected_cps * integration_s))
    coinc = int(rng.poisson(rates.coinc_expected_cps * integration_s))
    return s1, s2, coinc
