"""Heterodyne beat-note synthesis with phase, additive and multiplicative noise.

The detected signal is

    S(t) = A [1 + n_m(t)] [1 + C cos(2 pi f_c t + n_p(t) + phi0)] + n_a(t)

All stochastic channels are Gaussian. Power spectral densities are one-sided
throughout: the variance of a process equals the integral of its PSD over
positive frequencies.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MIN_SAMPLES = 16

# binary series header: magic, format version, fs, sample count, t0 -> 32 bytes
_BIN_MAGIC = b"AIGRVTS"
_BIN_HEADER = struct.Struct("<7sBdQd")


class NoiseSpecError(ValueError):
    """Noise description incompatible with the requested sampling."""


@dataclass(frozen=True)
class TimeSeries:
    fs: float
    samples: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("a time series needs a non-empty 1-D sample array")
        if not self.fs > 0:
            raise ValueError(f"fs must be positive, got {self.fs!r}")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.fs

    @property
    def duration(self) -> float:
        return self.samples.size / self.fs

    def slice(self, start: int, stop: int | None = None) -> "TimeSeries":
        stop = self.samples.size if stop is None else stop
        return TimeSeries(self.fs, self.samples[start:stop], self.t0 + start / self.fs)


@dataclass(frozen=True)
class Tone:
    frequency: float  # Hz
    rms: float  # rad


@dataclass(frozen=True)
class Band:
    f_lo: float  # Hz
    f_hi: float  # Hz
    psd: float  # rad^2/Hz, one-sided


@dataclass(frozen=True)
class NoiseSpec:
    tones: tuple[Tone, ...] = ()
    shaped_bands: tuple[Band, ...] = ()
    additive_rms: float = 0.0
    multiplicative_rms: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "tones", tuple(Tone(*t) if not isinstance(t, Tone) else t for t in self.tones))
        object.__setattr__(
            self,
            "shaped_bands",
            tuple(Band(*b) if not isinstance(b, Band) else b for b in self.shaped_bands),
        )
        for i, t in enumerate(self.tones):
            if t.rms < 0 or t.frequency <= 0:
                raise NoiseSpecError(f"tones[{i}]: need frequency > 0 and rms >= 0")
        for i, b in enumerate(self.shaped_bands):
            if not 0 < b.f_lo < b.f_hi:
                raise NoiseSpecError(f"shaped_bands[{i}]: need 0 < f_lo < f_hi")
            if b.psd < 0:
                raise NoiseSpecError(f"shaped_bands[{i}]: psd level must be >= 0")
        if self.additive_rms < 0 or self.multiplicative_rms < 0:
            raise NoiseSpecError("noise rms values must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise NoiseSpecError("seed must be an unsigned 64-bit integer")

    def check_sampling(self, fs: float) -> None:
        nyquist = fs / 2
        for i, t in enumerate(self.tones):
            if t.frequency >= nyquist:
                raise NoiseSpecError(f"tones[{i}]: {t.frequency} Hz is not below Nyquist ({nyquist} Hz)")
        for i, b in enumerate(self.shaped_bands):
            if b.f_hi >= nyquist:
                raise NoiseSpecError(f"shaped_bands[{i}]: f_hi {b.f_hi} Hz is not below Nyquist ({nyquist} Hz)")

    def scaled(self, factor: float) -> "NoiseSpec":
        """Copy with every phase-noise amplitude multiplied by ``factor``."""
        return NoiseSpec(
            tones=tuple(Tone(t.frequency, t.rms * factor) for t in self.tones),
            shaped_bands=tuple(Band(b.f_lo, b.f_hi, b.psd * factor**2) for b in self.shaped_bands),
            additive_rms=self.additive_rms,
            multiplicative_rms=self.multiplicative_rms,
            seed=self.seed,
        )


@dataclass(frozen=True)
class BeatConfig:
    amplitude: float = 1.0
    contrast: float = 1.0
    carrier: float = 15e3
    phase0: float = 0.0
    fs: float = 1e6
    duration: float = 0.1
    n_samples: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= self.contrast <= 1:
            raise NoiseSpecError(f"contrast must lie in [0, 1], got {self.contrast!r}")
        if not self.fs > 0 or not self.duration > 0:
            raise NoiseSpecError("fs and duration must be positive")
        if not 0 < self.carrier < self.fs / 2:
            raise NoiseSpecError(f"carrier {self.carrier} Hz must lie in (0, fs/2)")
        n = self.fs * self.duration
        if abs(n - round(n)) > 1e-6 * max(1.0, n):
            raise NoiseSpecError(f"fs*duration = {n} is not an integer sample count")
        object.__setattr__(self, "n_samples", int(round(n)))


def _streams(seed: int):
    """Independent generators for the phase tones, phase bands, n_m and n_a."""
    children = np.random.SeedSequence(int(seed)).spawn(4)
    return [np.random.default_rng(c) for c in children]


def _sample_count(fs: float, duration: float) -> int:
    n = int(round(fs * duration))
    if n < MIN_SAMPLES:
        raise NoiseSpecError(f"fs*duration gives {n} samples; at least {MIN_SAMPLES} are required")
    return n


def band_limited_noise(rng: np.random.Generator, n: int, fs: float, f_lo: float, f_hi: float, psd: float) -> np.ndarray:
    """Gaussian noise with one-sided PSD ``psd`` on [f_lo, f_hi] and zero elsewhere.

    White noise of variance psd*fs/2 (one-sided level ``psd``) is transformed,
    every bin outside the band is zeroed and the result transformed back.
    """
    white = rng.standard_normal(n) * math.sqrt(psd * fs / 2.0)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    spectrum[(freqs < f_lo) | (freqs > f_hi)] = 0.0
    return np.fft.irfft(spectrum, n)


def generate_phase_noise(spec: NoiseSpec, fs: float, duration: float) -> TimeSeries:
    """Phase-noise record n_p(t) in rad for the given noise description."""
    n = _sample_count(fs, duration)
    spec.check_sampling(fs)
    tone_rng, band_rng, _, _ = _streams(spec.seed)
    t = np.arange(n) / fs
    phase = np.zeros(n)
    for tone in spec.tones:
        start = tone_rng.uniform(0.0, 2.0 * math.pi)
        phase += tone.rms * math.sqrt(2.0) * np.sin(2.0 * math.pi * tone.frequency * t + start)
    for band in spec.shaped_bands:
        phase += band_limited_noise(band_rng, n, fs, band.f_lo, band.f_hi, band.psd)
    return TimeSeries(fs, phase)


def synth_beat(cfg: BeatConfig, spec: NoiseSpec, phase_noise: TimeSeries | None = None) -> TimeSeries:
    """Synthesise the detected beat note.

    ``phase_noise`` may be passed to reuse an n_p record already generated
    with :func:`generate_phase_noise` for the same spec.
    """
    n = _sample_count(cfg.fs, cfg.duration)
    if phase_noise is None:
        phase_noise = generate_phase_noise(spec, cfg.fs, cfg.duration)
    elif len(phase_noise) != n:
        raise NoiseSpecError("phase-noise record length does not match the beat configuration")
    _, _, mult_rng, add_rng = _streams(spec.seed)
    t = np.arange(n) / cfg.fs
    carrier = np.cos(2.0 * math.pi * cfg.carrier * t + phase_noise.samples + cfg.phase0)
    signal = cfg.amplitude * (1.0 + cfg.contrast * carrier)
    if spec.multiplicative_rms > 0:
        signal *= 1.0 + spec.multiplicative_rms * mult_rng.standard_normal(n)
    if spec.additive_rms > 0:
        signal += spec.additive_rms * add_rng.standard_normal(n)
    return TimeSeries(cfg.fs, signal)


# --- series I/O -------------------------------------------------------------


def write_series_csv(series: TimeSeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t_s", "value"])
        for t, v in zip(series.times, series.samples):
            writer.writerow([repr(float(t)), repr(float(v))])


def read_series_csv(path) -> TimeSeries:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] < 2:
        raise ValueError(f"{path}: need at least two samples to infer the sampling rate")
    t, v = data[:, 0], data[:, 1]
    dt = np.diff(t)
    step = float(np.median(dt))
    if step <= 0 or np.max(np.abs(dt - step)) > 1e-6 * step:
        raise ValueError(f"{path}: samples are not uniformly spaced")
    return TimeSeries(1.0 / step, v, float(t[0]))


def write_series_binary(series: TimeSeries, path) -> None:
    """Little-endian binary: 32-byte header then float64 samples."""
    header = _BIN_HEADER.pack(_BIN_MAGIC, 1, float(series.fs), series.samples.size, float(series.t0))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(series.samples.astype("<f8").tobytes())


def read_series_binary(path) -> TimeSeries:
    raw = Path(path).read_bytes()
    if len(raw) < _BIN_HEADER.size:
        raise ValueError(f"{path}: file shorter than the header")
    magic, version, fs, count, t0 = _BIN_HEADER.unpack_from(raw)
    if magic != _BIN_MAGIC or version != 1:
        raise ValueError(f"{path}: not a series file (bad magic or version)")
    body = raw[_BIN_HEADER.size:]
    if len(body) != 8 * count:
        raise ValueError(f"{path}: header announces {count} samples, body holds {len(body) // 8}")
    return TimeSeries(fs, np.frombuffer(body, dtype="<f8").copy(), t0)


def read_series(path) -> TimeSeries:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(len(_BIN_MAGIC))
    if head == _BIN_MAGIC:
        return read_series_binary(path)
    return read_series_csv(path)


def write_series(series: TimeSeries, path) -> None:
    if Path(path).suffix in (".bin", ".dat"):
        write_series_binary(series, path)
    else:
        write_series_csv(series, path)
