"""Science pipeline for downlinked files.

Runs are integrated per rotator setting (dropping runs with dropout or
saturation flags), accidentals estimated from the measured singles are
subtracted, and the correlation curve is fit by weighted linear least
squares on the Malus family

    y = a + b cos(2 theta) + c sin(2 theta)

which is linear in (a, b, c), so the fit is closed-form and deterministic.
Visibility is (max - min)/(max + min) of the fitted curve, i.e.
sqrt(b^2 + c^2)/a; uncertainties come from first-order propagation of the
parameter covariance.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import optics
from .onboard_file import OnboardFile, decode_file
from .payload import ExperimentProfile, default_profiles


class AnalysisError(Exception):
    pass


class NoValidRunsError(AnalysisError):
    pass


class SingularFitError(AnalysisError):
    pass


@dataclass(frozen=True)
class IntegratedScan:
    """Per-setting sums over all valid runs of one file."""

    angles_deg: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    coinc: np.ndarray
    seconds: np.ndarray
    valid_run_count: int
    total_run_count: int
    dark_estimates_cps: tuple[float, float]
    scanned_arm: str

    def __post_init__(self) -> None:
        n = len(self.angles_deg)
        if not (len(self.s1) == len(self.s2) == len(self.coinc) == len(self.seconds) == n):
            raise ValueError("scan arrays must share one length")


@dataclass(frozen=True)
class MalusFit:
    mean_rate: float  # a
    amp_cos: float  # b
    amp_sin: float  # c
    visibility: float
    theta0_deg: float
    sigma_visibility: float
    sigma_theta_deg: float
    chi2_per_dof: float

    @property
    def theta0_defined(self) -> bool:
        return math.isfinite(self.sigma_theta_deg)


@dataclass(frozen=True)
class DarkTrend:
    slope_cps_per_day: float
    intercept_cps: float
    stderr_slope: float
    excess_cps: float
    flagged: bool


def integrate_runs(
    file: OnboardFile, profiles: dict[int, ExperimentProfile] | None = None
) -> IntegratedScan:
    """Sum counts per rotator setting over runs free of dropout/saturation flags."""
    profiles = default_profiles() if profiles is None else profiles
    profile = profiles.get(file.profile_id)
    arm = profile.rotated_arm if profile is not None else optics.SIGNAL_ARM

    darks = file.dark_records
    if darks:
        dark_est = (
            float(np.mean([r.s1 for r in darks])),
            float(np.mean([r.s2 for r in darks])),
        )
    else:
        dark_est = (math.nan, math.nan)

    valid = [run for run in file.runs if run.valid]
    if not valid:
        raise NoValidRunsError(
            f"no valid runs in file (total {len(file.runs)}, darks {len(darks)})"
        )
    n = len(valid[0].settings)
    angles = np.array([s.angle_deg for s in valid[0].settings])
    s1 = np.zeros(n)
    s2 = np.zeros(n)
    coinc = np.zeros(n)
    seconds = np.zeros(n)
    for run in valid:
        for k, rec in enumerate(run.settings):
            s1[k] += rec.s1
            s2[k] += rec.s2
            coinc[k] += rec.coinc
            seconds[k] += rec.integration_ms / 1000.0
    return IntegratedScan(
        angles_deg=angles,
        s1=s1,
        s2=s2,
        coinc=coinc,
        seconds=seconds,
        valid_run_count=len(valid),
        total_run_count=len(file.runs),
        dark_estimates_cps=dark_est,
        scanned_arm=arm,
    )


def subtract_background(
    scan: IntegratedScan, coincidence_window_s: float
) -> tuple[np.ndarray, np.ndarray]:
    """Accidental-subtracted coincidence counts and their variances.

    The accidental estimate per setting is s1*s2*window/T in counts; its
    Poisson variance is propagated into the returned variance.  Corrected
    values may go negative (the estimator is unbiased, not clipped).
    """
    tau_over_t = coincidence_window_s / scan.seconds
    accidentals = scan.s1 * scan.s2 * tau_over_t
    corrected = scan.coinc - accidentals
    variance = (
        scan.coinc
        + (scan.s2 * tau_over_t) ** 2 * scan.s1
        + (scan.s1 * tau_over_t) ** 2 * scan.s2
    )
    return corrected, np.maximum(variance, 1.0)


def fit_malus(
    angles_deg: np.ndarray, values: np.ndarray, variances: np.ndarray
) -> MalusFit:
    """Weighted linear least-squares fit of the Malus curve."""
    angles_deg = np.asarray(angles_deg, dtype=float)
    values = np.asarray(values, dtype=float)
    variances = np.asarray(variances, dtype=float)
    if len(angles_deg) < 4:
        raise AnalysisError("need at least 4 scan points")
    if np.ptp(angles_deg) < 180.0 - 1e-9:
        raise AnalysisError("scan must span at least 180 degrees of rotation")
    if np.any(variances <= 0):
        raise AnalysisError("variances must be positive")

    two_theta = np.radians(2.0 * angles_deg)
    design = np.column_stack([np.ones_like(two_theta), np.cos(two_theta), np.sin(two_theta)])
    weights = 1.0 / variances
    normal = design.T @ (design * weights[:, None])
    if np.linalg.cond(normal) > 1e12:
        raise SingularFitError("angles are degenerate modulo 180 degrees")
    rhs = design.T @ (values * weights)
    beta = np.linalg.solve(normal, rhs)
    cov = np.linalg.inv(normal)
    a, b, c = beta

    resid = values - design @ beta
    dof = len(values) - 3
    chi2_per_dof = float(resid @ (resid * weights) / dof) if dof > 0 else math.nan

    if a <= 0:
        raise AnalysisError(f"fitted mean rate is not positive ({a:.3g})")
    amp = math.hypot(b, c)
    visibility = amp / a
    if amp <= 1e-12 * abs(a):
        # zero-amplitude curve: phase is undefined
        return MalusFit(float(a), float(b), float(c), 0.0, 0.0,
                        float(math.sqrt(cov[1, 1] + cov[2, 2]) / a),
                        math.inf, chi2_per_dof)

    jac_v = np.array([-amp / a**2, b / (a * amp), c / (a * amp)])
    sigma_v = float(math.sqrt(jac_v @ cov @ jac_v))
    theta0 = 0.5 * math.degrees(math.atan2(c, b))
    jac_t = np.array([0.0, -c / (2 * amp**2), b / (2 * amp**2)])
    sigma_t = float(math.degrees(math.sqrt(jac_t @ cov @ jac_t)))
    return MalusFit(float(a), float(b), float(c), float(visibility), theta0,
                    sigma_v, sigma_t, chi2_per_dof)


def malus_curve(fit: MalusFit, angles_deg: np.ndarray) -> np.ndarray:
    two_theta = np.radians(2.0 * np.asarray(angles_deg, dtype=float))
    return fit.mean_rate + fit.amp_cos * np.cos(two_theta) + fit.amp_sin * np.sin(two_theta)


def bootstrap_fit_sigmas(
    angles_deg: np.ndarray,
    values: np.ndarray,
    variances: np.ndarray,
    fit: MalusFit,
    samples: int,
    rng: np.random.Generator,
) -> MalusFit:
    """Replace the propagation sigmas with parametric-bootstrap estimates.

    Useful for small-count scans where the first-order propagation is
    optimistic; resamples each point from its fitted-variance Gaussian.
    """
    import dataclasses

    vs = []
    dthetas = []
    sd = np.sqrt(np.asarray(variances, dtype=float))
    for _ in range(samples):
        resampled = rng.normal(values, sd)
        try:
            f = fit_malus(angles_deg, resampled, variances)
        except AnalysisError:
            continue
        vs.append(f.visibility)
        # phase differences live on a 180-degree circle
        dthetas.append((f.theta0_deg - fit.theta0_deg + 90.0) % 180.0 - 90.0)
    if len(vs) < 2:
        return fit
    return dataclasses.replace(
        fit,
        sigma_visibility=float(np.std(vs, ddof=1)),
        sigma_theta_deg=float(np.std(dthetas, ddof=1)),
    )


def dark_trend(
    series: list[tuple[float, float]], excess_threshold_cps: float = 10_000.0
) -> DarkTrend:
    """OLS slope of mean dark rate against elapsed days for one arm."""
    if len(series) < 2:
        raise AnalysisError("dark trend needs at least 2 epochs")
    days = np.array([p[0] for p in series], dtype=float)
    cps = np.array([p[1] for p in series], dtype=float)
    if np.ptp(days) == 0:
        raise AnalysisError("dark trend needs distinct epochs")
    slope, intercept = np.polyfit(days, cps, 1)
    fitted = slope * days + intercept
    dof = len(series) - 2
    if dof > 0:
        s2 = float(np.sum((cps - fitted) ** 2) / dof)
        stderr = math.sqrt(s2 / np.sum((days - days.mean()) ** 2))
    else:
        stderr = 0.0
    excess = float(slope * np.ptp(days))
    return DarkTrend(
        slope_cps_per_day=float(slope),
        intercept_cps=float(intercept),
        stderr_slope=stderr,
        excess_cps=excess,
        flagged=excess > excess_threshold_cps,
    )


def analyze_file(
    file: OnboardFile,
    file_id: int,
    coincidence_window_s: float = optics.SourceModel().coincidence_window_s,
    profiles: dict[int, ExperimentProfile] | None = None,
    bootstrap_samples: int = 0,
) -> dict:
    """Full per-file analysis: rates, background subtraction and Malus fit."""
    profiles = default_profiles() if profiles is None else profiles
    out: dict = {
        "file_id": file_id,
        "profile_id": f"0x{file.profile_id:02X}",
        "start_epoch_s": file.start_epoch_s,
        "elapsed_days": round(file.start_epoch_s / 86_400.0, 6),
        "bias_mv": file.bias_mv,
        "dark_records": len(file.dark_records),
        "run_count": len(file.runs),
    }
    darks = file.dark_records
    if darks:
        out["dark_cps"] = {
            "arm1": float(np.mean([r.s1 for r in darks])),
            "arm2": float(np.mean([r.s2 for r in darks])),
        }
    if not file.runs:
        out["fit"] = None
        return out

    scan = integrate_runs(file, profiles)
    corrected, variance = subtract_background(scan, coincidence_window_s)
    total_s = float(scan.seconds.sum())
    out["scanned_arm"] = scan.scanned_arm
    out["valid_runs"] = scan.valid_run_count
    out["mean_s1_cps"] = float(scan.s1.sum() / total_s)
    out["mean_s2_cps"] = float(scan.s2.sum() / total_s)
    out["mean_coinc_cps"] = float(scan.coinc.sum() / total_s)
    out["corrected_coinc_cps"] = float(corrected.sum() / total_s)

    fit = fit_malus(scan.angles_deg, corrected / scan.seconds, variance / scan.seconds**2)
    if bootstrap_samples > 0:
        fit = bootstrap_fit_sigmas(
            scan.angles_deg, corrected / scan.seconds, variance / scan.seconds**2,
            fit, bootstrap_samples, np.random.default_rng(file_id),
        )
    grid = np.arange(0.0, 361.0)
    out["fit"] = {
        "mean_rate_cps": fit.mean_rate,
        "amp_cos_cps": fit.amp_cos,
        "amp_sin_cps": fit.amp_sin,
        "visibility": fit.visibility,
        "sigma_visibility": fit.sigma_visibility,
        "theta0_deg": fit.theta0_deg,
        "sigma_theta_deg": fit.sigma_theta_deg if math.isfinite(fit.sigma_theta_deg) else None,
        "chi2_per_dof": fit.chi2_per_dof,
    }
    out["scan"] = {
        "angle_deg": scan.angles_deg.tolist(),
        "seconds": scan.seconds.tolist(),
        "s1_counts": scan.s1.tolist(),
        "s2_counts": scan.s2.tolist(),
        "coinc_counts": scan.coinc.tolist(),
        "corrected_counts": corrected.tolist(),
        "variance_counts": variance.tolist(),
    }
    out["fit_curve"] = {
        "angle_deg": grid.tolist(),
        "model_cps": malus_curve(fit, grid).tolist(),
    }
    return out


def build_report(
    analyses: list[dict], excess_threshold_cps: float = 10_000.0
) -> dict:
    """Campaign-level report: per-file fits plus the dark-count trend."""
    if not analyses:
        raise AnalysisError("empty archive: nothing to report")
    ordered = sorted(analyses, key=lambda a: a["file_id"])
    trend = None
    dark_files = [a for a in ordered if "dark_cps" in a]
    if len(dark_files) >= 2:
        trend = {}
        for arm in ("arm1", "arm2"):
            series = [(a["elapsed_days"], a["dark_cps"][arm]) for a in dark_files]
            try:
                t = dark_trend(series, excess_threshold_cps)
            except AnalysisError:
                continue
            trend[arm] = {
                "slope_cps_per_day": t.slope_cps_per_day,
                "intercept_cps": t.intercept_cps,
                "stderr_slope": t.stderr_slope,
                "excess_cps": t.excess_cps,
                "flagged": t.flagged,
            }
        trend = trend or None
    return {"files": ordered, "dark_trend": trend}


def report_archive(in_dir: str | Path, out_dir: str | Path, **kwargs) -> dict:
    """Analyze every raw file image under ``in_dir/files`` and write reports."""
    in_dir = Path(in_dir)
    out_dir = Path(out_dir)
    files_dir = in_dir / "files" if (in_dir / "files").is_dir() else in_dir
    images = sorted(files_dir.glob("*.bin"))
    if not images:
        raise AnalysisError(f"no .bin file images under {files_dir}")
    analyses = []
    for path in images:
        file_id = int(path.stem.split("_")[-1], 10)
        analyses.append(analyze_file(decode_file(path.read_bytes()), file_id, **kwargs))
    report = build_report(analyses)
    write_report_files(report, out_dir)
    return report


def write_report_files(report: dict, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")

    darks_rows = []
    for a in report["files"]:
        if "dark_cps" in a:
            darks_rows.append((a["file_id"], a["elapsed_days"], 1, a["dark_cps"]["arm1"]))
            darks_rows.append((a["file_id"], a["elapsed_days"], 2, a["dark_cps"]["arm2"]))
    with open(out_dir / "darks.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["file_id", "elapsed_days", "arm", "dark_cps"])
        writer.writerows(darks_rows)

    for a in report["files"]:
        if not a.get("scan"):
            continue
        fit = a["fit"]
        model = malus_curve(
            MalusFit(fit["mean_rate_cps"], fit["amp_cos_cps"], fit["amp_sin_cps"],
                     fit["visibility"], fit["theta0_deg"], fit["sigma_visibility"],
                     fit["sigma_theta_deg"] or math.inf, fit["chi2_per_dof"]),
            np.array(a["scan"]["angle_deg"]),
        )
        with open(out_dir / f"scan_{a['file_id']:04d}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["angle_deg", "seconds", "s1_counts", "s2_counts", "coinc_counts",
                 "corrected_counts", "variance_counts", "model_cps"]
            )
            scan = a["scan"]
            for k in range(len(scan["angle_deg"])):
                writer.writerow(
                    [scan["angle_deg"][k], scan["seconds"][k], scan["s1_counts"][k],
                     scan["s2_counts"][k], scan["coinc_counts"][k],
                     scan["corrected_counts"][k], scan["variance_counts"][k],
                     float(model[k])]
                )
