"""Allan-deviation analysis of shot-to-shot gravity data and the projection-noise limit."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

WHITE_SLOPE = -0.5
SLOPE_TOLERANCE = 0.15


class StabilityError(ValueError):
    pass


@dataclass(frozen=True)
class ShotSeries:
    values: np.ndarray
    cycle_time: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise StabilityError("a shot series needs at least two values")
        if not self.cycle_time > 0:
            raise StabilityError("cycle_time must be positive")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class AllanResult:
    taus: np.ndarray
    adev: np.ndarray
    counts: np.ndarray
    overlapping: bool = False

    def scaled(self, factor: float) -> "AllanResult":
        return AllanResult(self.taus, self.adev * factor, self.counts, self.overlapping)


def default_taus(series: ShotSeries) -> np.ndarray:
    """Octave-spaced averaging times from one cycle up to an eighth of the record."""
    n = series.values.size
    m = 1
    out = []
    while m <= max(n // 8, 1):
        out.append(m * series.cycle_time)
        m *= 2
    return np.asarray(out)


def _cluster_size(tau: float, tau0: float) -> int:
    m = int(round(tau / tau0))
    if m < 1 or abs(tau - m * tau0) > 1e-9 * max(tau, tau0):
        raise StabilityError(f"tau = {tau} s is not an integer multiple of the cycle time {tau0} s")
    return m


def allan_deviation(series: ShotSeries, taus=None, overlapping: bool = False) -> AllanResult:
    """Two-sample deviation of cluster means at each averaging time.

    The non-overlapping estimator averages the series into ``M`` consecutive
    blocks of ``m = tau/tau0`` shots and returns
    ``sqrt(sum (y[i+1]-y[i])^2 / (2 (M-1)))``. The overlapping estimator uses
    every block start.
    """
    tau0 = series.cycle_time
    taus = default_taus(series) if taus is None else np.asarray(taus, dtype=float)
    if taus.size == 0:
        raise StabilityError("no averaging times requested")
    if np.any(np.diff(taus) <= 0):
        raise StabilityError("averaging times must be strictly increasing")
    v = series.values
    n = v.size
    adev, counts = [], []
    csum = np.concatenate(([0.0], np.cumsum(v))) if overlapping else None
    for tau in taus:
        m = _cluster_size(float(tau), tau0)
        M = n // m
        if M < 3:
            raise StabilityError(f"tau = {tau} s leaves {M} clusters; at least 3 are required")
        if overlapping:
            means = (csum[m:] - csum[:-m]) / m
            d = means[m:] - means[:-m]
        else:
            # correctly rounded sums keep the result independent of summation order
            means = np.array([math.fsum(v[i * m : (i + 1) * m]) / m for i in range(M)])
            d = np.diff(means)
        counts.append(M)
        adev.append(math.sqrt(math.fsum(d * d) / (2.0 * d.size)))
    return AllanResult(taus, np.asarray(adev), np.asarray(counts, dtype=int), overlapping)


@dataclass(frozen=True)
class SensitivityReport:
    amplitude: float  # adev at 1 s on the tau^-1/2 line
    slope: float
    at_tau: float  # fitted value at tau_ref
    tau_ref: float
    raw_nearest: float
    raw_nearest_tau: float
    white_noise_valid: bool
    extrapolated: bool = True

    def to_dict(self) -> dict:
        return {
            "sensitivity_at_1s": self.amplitude,
            "fitted_slope": self.slope,
            "tau_ref_s": self.tau_ref,
            "predicted_at_tau_ref": self.at_tau,
            "raw_adev_nearest": self.raw_nearest,
            "raw_tau_nearest_s": self.raw_nearest_tau,
            "white_noise_valid": self.white_noise_valid,
            "white_noise_extrapolation": self.extrapolated,
        }


def sensitivity_at_tau(result: AllanResult, tau_ref: float = 1.0) -> SensitivityReport:
    """Fit adev = A tau^-1/2 and evaluate at ``tau_ref``.

    Both fits are least squares in log-log space weighted by ``counts - 1``,
    the degrees of freedom behind each point. The free slope is only used as
    a diagnostic: a departure of more than 0.15 from -1/2 triggers a warning.
    """
    if result.taus.size < 3:
        raise StabilityError("need at least 3 averaging times for the white-noise fit")
    x = np.log(result.taus)
    y = np.log(result.adev)
    if not np.all(np.isfinite(y)):
        raise StabilityError("Allan deviation must be positive for a log-log fit")
    w = np.maximum(result.counts - 1, 1).astype(float)
    slope, _ = np.polyfit(x, y, 1, w=np.sqrt(w))
    log_a = float(np.sum(w * (y - WHITE_SLOPE * x)) / np.sum(w))
    amplitude = math.exp(log_a)
    valid = abs(slope - WHITE_SLOPE) <= SLOPE_TOLERANCE
    if not valid:
        warnings.warn(
            f"fitted slope {slope:.3f} departs from -1/2; white-noise extrapolation is not justified",
            stacklevel=2,
        )
    i = int(np.argmin(np.abs(np.log(result.taus / tau_ref))))
    return SensitivityReport(
        amplitude=amplitude,
        slope=float(slope),
        at_tau=amplitude * tau_ref**WHITE_SLOPE,
        tau_ref=float(tau_ref),
        raw_nearest=float(result.adev[i]),
        raw_nearest_tau=float(result.taus[i]),
        white_noise_valid=bool(valid),
    )


def qpn_limit(contrast: float, atoms: float, g: float, k_eff: float, T: float) -> float:
    """Projection-noise limited single-shot sensitivity 1/(C sqrt(N) g k_eff T^2), as dg/g."""
    if not 0 < contrast <= 1:
        raise StabilityError(f"contrast must lie in (0, 1], got {contrast!r}")
    for name, value in (("atoms", atoms), ("g", g), ("k_eff", k_eff), ("T", T)):
        if not value > 0:
            raise StabilityError(f"{name} must be positive, got {value!r}")
    return 1.0 / (contrast * math.sqrt(atoms) * g * k_eff * T**2)


def white_series(n: int, per_shot_sigma: float, seed: int, mean: float = 0.0) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    return mean + per_shot_sigma * rng.standard_normal(n)


def per_shot_sigma_for(sensitivity_1s: float, cycle_time: float) -> float:
    """Per-shot white noise giving adev = ``sensitivity_1s`` * tau^-1/2."""
    return sensitivity_1s / math.sqrt(cycle_time)


def read_shots_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "value" not in reader.fieldnames:
            raise StabilityError(f"{path}: expected columns shot_index,value")
        return np.asarray([float(row["value"]) for row in reader])


def write_shots_csv(values, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["shot_index", "value"])
        for i, v in enumerate(values):
            w.writerow([i, repr(float(v))])


def write_allan_csv(result: AllanResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau_s", "adev", "count"])
        for t, a, c in zip(result.taus, result.adev, result.counts):
            w.writerow([repr(float(t)), repr(float(a)), int(c)])
