"""Lock-in demodulation, Welch PSD estimation and weighted phase-noise integration."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, signal

from .noise import NoiseSpec, TimeSeries
from .physics import PulseSequence
from .sensitivity import weighting, zero_frequencies

RAD2_PER_HZ = "rad^2/Hz"
SIGNAL2_PER_HZ = "signal^2/Hz"
DBM = "dBm"
DBC_PER_HZ = "dBc/Hz"
UNITS = (RAD2_PER_HZ, SIGNAL2_PER_HZ, DBM, DBC_PER_HZ)

# Hann equivalent noise bandwidth in bins
HANN_ENBW_BINS = 1.5
LOWPASS_ATTENUATION_DB = 80.0
SUBPOINTS = 8


class SpectralError(ValueError):
    pass


@dataclass(frozen=True)
class PsdEstimate:
    frequencies: np.ndarray
    values: np.ndarray
    unit: str
    rbw: float
    window: str = "hann"
    segments: int = 1

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if f.shape != v.shape or f.ndim != 1 or f.size == 0:
            raise SpectralError("frequencies and values must be equal-length 1-D arrays")
        if np.any(np.diff(f) <= 0):
            raise SpectralError("frequencies must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise SpectralError("PSD values must be finite")
        if not self.rbw > 0:
            raise SpectralError("rbw must be positive")
        if self.unit not in UNITS:
            raise SpectralError(f"unknown unit tag {self.unit!r}")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)

    @property
    def bin_width(self) -> float:
        if self.frequencies.size < 2:
            return self.rbw / HANN_ENBW_BINS
        return float(self.frequencies[1] - self.frequencies[0])

    def band_power(self, f_lo: float, f_hi: float) -> float:
        """Sum of value*bin_width over bins whose centres lie in [f_lo, f_hi]."""
        if self.unit in (DBM, DBC_PER_HZ):
            raise SpectralError("band power needs a linear PSD")
        sel = (self.frequencies >= f_lo) & (self.frequencies <= f_hi)
        return float(np.sum(self.values[sel]) * self.bin_width)


@dataclass(frozen=True)
class Demodulated:
    phase: TimeSeries
    in_phase: TimeSeries
    quadrature: TimeSeries
    carrier: float
    lp_cutoff: float
    settle: int
    contrast: float
    phase_defined: bool
    phase_wraps: int

    def __post_init__(self):
        n, fs = len(self.phase), self.phase.fs
        for s in (self.in_phase, self.quadrature):
            if len(s) != n or s.fs != fs:
                raise SpectralError("demodulated series must share fs and length")

    def settled(self) -> "Demodulated":
        """Copy with the filter transients at both ends removed."""
        a, b = self.settle, len(self.phase) - self.settle
        if b - a < 16:
            raise SpectralError("record too short to outlast the low-pass settling time")
        return Demodulated(
            self.phase.slice(a, b),
            self.in_phase.slice(a, b),
            self.quadrature.slice(a, b),
            self.carrier,
            self.lp_cutoff,
            0,
            self.contrast,
            self.phase_defined,
            self.phase_wraps,
        )


def lowpass_taps(fs: float, cutoff: float, stop: float) -> np.ndarray:
    """Linear-phase Kaiser-windowed sinc, flat to ``cutoff`` and 80 dB down from ``stop``."""
    width = (stop - cutoff) / (fs / 2)
    numtaps, beta = signal.kaiserord(LOWPASS_ATTENUATION_DB, width)
    numtaps |= 1  # odd length keeps the delay an integer number of samples
    return signal.firwin(numtaps, 0.5 * (cutoff + stop), window=("kaiser", beta), fs=fs)


def demodulate(s: TimeSeries, carrier: float, lp_cutoff: float | None = None) -> Demodulated:
    """Orthogonal (I/Q) demodulation of a beat note at ``carrier`` Hz.

    The record is mixed with cos and sin of the reference, low-passed with a
    zero-delay FIR filter and converted to phase via ``atan2(Q, I)`` with
    2*pi unwrapping. ``settle`` samples at each end are filter transients.
    The low-pass stop band starts half way between ``lp_cutoff`` and the
    carrier, which removes the DC term of the signal shifted to the carrier
    frequency as well as the 2*f_c image.
    """
    fs = s.fs
    if not 0 < carrier < fs / 2:
        raise SpectralError(f"carrier {carrier} Hz must lie in (0, fs/2 = {fs / 2} Hz)")
    if lp_cutoff is None:
        lp_cutoff = carrier / 4
    if not 0 < lp_cutoff < carrier:
        raise SpectralError(f"low-pass cutoff {lp_cutoff} Hz must lie in (0, carrier)")
    taps = lowpass_taps(fs, lp_cutoff, lp_cutoff + 0.5 * (carrier - lp_cutoff))
    settle = taps.size // 2
    if 2 * settle + 16 > len(s):
        raise SpectralError(f"record of {len(s)} samples is shorter than the filter transient ({taps.size} taps)")

    t = s.times - s.t0
    x = s.samples
    arg = 2.0 * math.pi * carrier * t
    i_raw = signal.oaconvolve(x * np.cos(arg), taps, mode="same") * 2.0
    q_raw = signal.oaconvolve(x * np.sin(arg), taps, mode="same") * -2.0

    amp = np.hypot(i_raw, q_raw)[settle:-settle]
    dc = abs(float(np.mean(x)))
    scale = dc if dc > 0 else float(np.sqrt(np.mean(x**2))) or 1.0
    contrast = float(np.median(amp)) / scale
    defined = contrast > 1e-3
    if not defined:
        warnings.warn("demodulated amplitude vanishes (contrast ~ 0); phase is undefined", stacklevel=2)

    wrapped = np.arctan2(q_raw, i_raw)
    phase = np.unwrap(wrapped)
    wraps = int(np.count_nonzero(np.abs(np.diff(wrapped[settle:-settle])) > math.pi))
    return Demodulated(
        TimeSeries(fs, phase, s.t0),
        TimeSeries(fs, i_raw, s.t0),
        TimeSeries(fs, q_raw, s.t0),
        carrier,
        lp_cutoff,
        settle,
        contrast,
        defined,
        wraps,
    )


def segment_length(fs: float, rbw: float) -> int:
    """Hann segment length whose equivalent noise bandwidth is ``rbw``."""
    return int(round(HANN_ENBW_BINS * fs / rbw))


def estimate_psd(s: TimeSeries, rbw: float, unit: str = RAD2_PER_HZ, overlap: float = 0.5) -> PsdEstimate:
    """One-sided Welch PSD with Hann windows sized so the ENBW equals ``rbw``.

    Segments overlap by ``overlap`` and have their mean removed. The value
    reported as ``rbw`` is the realised ENBW of the window, within 1% of the
    request.
    """
    if not rbw > 0:
        raise SpectralError("rbw must be positive")
    nperseg = segment_length(s.fs, rbw)
    if nperseg < 4:
        raise SpectralError(f"rbw {rbw} Hz is too coarse for fs = {s.fs} Hz")
    if nperseg > len(s):
        raise SpectralError(
            f"rbw {rbw} Hz needs segments of {nperseg} samples but the record holds {len(s)}"
        )
    win = signal.get_window("hann", nperseg)
    enbw = s.fs * np.sum(win**2) / np.sum(win) ** 2
    noverlap = int(nperseg * overlap)
    f, p = signal.welch(
        s.samples,
        fs=s.fs,
        window=win,
        nperseg=nperseg,
        noverlap=noverlap,
        detrend="constant",
        scaling="density",
        return_onesided=True,
    )
    segments = (len(s) - noverlap) // (nperseg - noverlap)
    return PsdEstimate(f, p, unit, float(enbw), "hann", int(segments))


def psd_to_dbm(p: PsdEstimate, impedance: float = 50.0) -> PsdEstimate:
    """Power per resolution bandwidth in dBm, treating the signal as volts across ``impedance``."""
    if not impedance > 0:
        raise SpectralError("impedance must be positive")
    if p.unit != SIGNAL2_PER_HZ:
        raise SpectralError(f"dBm conversion needs a {SIGNAL2_PER_HZ} PSD, got {p.unit}")
    watts = p.values * p.rbw / impedance
    dbm = 10.0 * np.log10(np.maximum(watts, 1e-300) / 1e-3)
    return PsdEstimate(p.frequencies, dbm, DBM, p.rbw, p.window, p.segments)


def psd_to_dbc(p: PsdEstimate) -> PsdEstimate:
    """Single-sideband phase noise L(f) = S_phi/2 in dBc/Hz."""
    if p.unit != RAD2_PER_HZ:
        raise SpectralError(f"dBc/Hz conversion needs a {RAD2_PER_HZ} PSD, got {p.unit}")
    dbc = 10.0 * np.log10(np.maximum(p.values / 2.0, 1e-300))
    return PsdEstimate(p.frequencies, dbc, DBC_PER_HZ, p.rbw, p.window, p.segments)


def bin_weights(seq: PulseSequence, centres: np.ndarray, width: float, subpoints: int = SUBPOINTS) -> np.ndarray:
    """Weighting averaged over ``subpoints`` midpoints inside each bin."""
    offsets = (np.arange(subpoints) + 0.5) / subpoints - 0.5
    f = centres[:, None] + offsets[None, :] * width
    f = np.where(f > 0, f, 0.0)
    return np.mean(weighting(seq, f), axis=1)


def integrated_phase_noise(psd: PsdEstimate, seq: PulseSequence, f_lo: float | None = None, f_hi: float = 10e3) -> float:
    """Interferometer phase noise per shot (rad) from a phase PSD.

    Computes sqrt(sum_k w_k S_k df) over bins with centres in [f_lo, f_hi],
    where w_k is the weighting averaged across bin k. ``f_lo`` defaults to
    the first non-zero bin.
    """
    if psd.unit != RAD2_PER_HZ:
        raise SpectralError(f"phase-noise integration needs a {RAD2_PER_HZ} PSD, got {psd.unit}")
    f = psd.frequencies
    df = psd.bin_width
    if f_lo is None:
        f_lo = float(f[f > 0][0]) if np.any(f > 0) else df
    if not 0 <= f_lo < f_hi:
        raise SpectralError("need 0 <= f_lo < f_hi")
    if f_lo < f[0] - 0.5 * df or f_hi > f[-1] + 0.5 * df:
        raise SpectralError(f"band [{f_lo}, {f_hi}] Hz exceeds the PSD support [{f[0]}, {f[-1]}] Hz")
    sel = (f >= f_lo) & (f <= f_hi)
    if not np.any(sel):
        raise SpectralError("no PSD bins inside the requested band")
    w = bin_weights(seq, f[sel], df)
    return math.sqrt(float(np.sum(w * psd.values[sel]) * df))


def weighted_band_integral(seq: PulseSequence, f_lo: float, f_hi: float) -> float:
    """Integral of the weighting over [f_lo, f_hi], split at its zeros."""
    if f_hi <= f_lo:
        return 0.0
    zeros = zero_frequencies(seq, f_hi)
    edges = np.concatenate(([f_lo], zeros[zeros > f_lo], [f_hi]))
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            total += integrate.quad(lambda x: float(weighting(seq, x)), a, b, epsabs=0, epsrel=1e-10, limit=200)[0]
    return total


def expected_phase_noise(spec: NoiseSpec, seq: PulseSequence, f_lo: float, f_hi: float) -> float:
    """Per-shot phase noise (rad) predicted analytically from a noise description.

    Only the phase channel is counted; additive and multiplicative noise are
    assumed negligible after demodulation.
    """
    var = 0.0
    for tone in spec.tones:
        if f_lo <= tone.frequency <= f_hi:
            var += tone.rms**2 * float(weighting(seq, tone.frequency))
    for band in spec.shaped_bands:
        var += band.psd * weighted_band_integral(seq, max(f_lo, band.f_lo), min(f_hi, band.f_hi))
    return math.sqrt(var)


def write_psd_csv(p: PsdEstimate, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["f_hz", "value", "unit"])
        for f, v in zip(p.frequencies, p.values):
            writer.writerow([repr(float(f)), repr(float(v)), p.unit])


def read_psd_csv(path, rbw: float | None = None) -> PsdEstimate:
    freqs, values, units = [], [], set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"f_hz", "value", "unit"} - set(reader.fieldnames or ())
        if missing:
            raise SpectralError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            freqs.append(float(row["f_hz"]))
            values.append(float(row["value"]))
            units.add(row["unit"])
    if len(units) != 1:
        raise SpectralError(f"{path}: expected a single unit tag, found {sorted(units)}")
    f = np.asarray(freqs)
    if rbw is None:
        rbw = HANN_ENBW_BINS * float(f[1] - f[0]) if f.size > 1 else 1.0
    return PsdEstimate(f, np.asarray(values), units.pop(), rbw)
