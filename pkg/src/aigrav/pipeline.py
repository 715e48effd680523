"""End-to-end runs assembled from the library pieces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fringe import FringeFit, FringeScan, GravityEstimate, extract_g, fit_fringe, fringe_period, simulate_scan
from .noise import TimeSeries, generate_phase_noise, synth_beat
from .physics import PulseSequence, chirp_for_gravity
from .scenario import Scenario
from .spectral import (
    SIGNAL2_PER_HZ,
    Demodulated,
    PsdEstimate,
    demodulate,
    estimate_psd,
    expected_phase_noise,
    integrated_phase_noise,
)
from .stability import AllanResult, ShotSeries, allan_deviation, per_shot_sigma_for, white_series


@dataclass
class NoiseRun:
    beat: TimeSeries
    demod: Demodulated
    phase_psd: PsdEstimate
    sigma: float  # rad per shot
    expected: float  # rad per shot from the noise description
    f_lo: float
    f_hi: float

    def summary(self) -> dict:
        return {
            "sigma_rad": self.sigma,
            "sigma_mrad": 1e3 * self.sigma,
            "expected_sigma_rad": self.expected,
            "f_lo_hz": self.f_lo,
            "f_hi_hz": self.f_hi,
            "rbw_hz": self.phase_psd.rbw,
            "segments": self.phase_psd.segments,
            "demod_contrast": self.demod.contrast,
            "phase_wraps": self.demod.phase_wraps,
            "lp_cutoff_hz": self.demod.lp_cutoff,
        }


def run_noise(sc: Scenario) -> NoiseRun:
    """Synthesise the beat note, demodulate it and integrate the weighted phase noise."""
    a = sc.analysis
    phase = generate_phase_noise(sc.noise, sc.beat.fs, sc.beat.duration)
    beat = synth_beat(sc.beat, sc.noise, phase)
    demod = demodulate(beat, sc.beat.carrier, a.lp_cutoff).settled()
    psd = estimate_psd(demod.phase, a.rbw)
    f_lo = a.f_lo if a.f_lo is not None else float(psd.frequencies[1])
    sigma = integrated_phase_noise(psd, sc.sequence, f_lo, a.f_hi)
    expected = expected_phase_noise(sc.noise, sc.sequence, f_lo, a.f_hi)
    return NoiseRun(beat, demod, psd, sigma, expected, f_lo, a.f_hi)


def beat_psd(beat: TimeSeries, rbw: float) -> PsdEstimate:
    return estimate_psd(beat, rbw, SIGNAL2_PER_HZ)


def scan_grid(sc: Scenario, seq: PulseSequence) -> np.ndarray:
    """Sweep rates spanning ``periods`` fringe periods around the resonant chirp plus the offset."""
    f = sc.fringe
    period = fringe_period(seq, sc.bragg.order, f.mode)
    if f.mode == "phase":
        centre = f.offset
    else:
        centre = chirp_for_gravity(sc.bragg, f.g_true) + f.offset
    half = 0.5 * f.periods * period
    return np.linspace(centre - half, centre + half, f.points)


@dataclass
class FringeRun:
    interrogation: float
    scan: FringeScan
    fit: FringeFit


def run_fringes(sc: Scenario) -> list[FringeRun]:
    f = sc.fringe
    tau = sc.sequence.beamsplitter_duration
    out = []
    for i, T in enumerate(f.interrogation_times):
        seq = PulseSequence(sc.sequence.rabi, tau, T, sc.sequence.cycle_time)
        scan = simulate_scan(
            sc.bragg,
            seq,
            f.g_true,
            scan_grid(sc, seq),
            atoms=f.atoms,
            contrast=f.contrast,
            shots_per_point=f.shots_per_point,
            seed=sc.seed + i,
            phase_noise=f.phase_noise,
            detection_noise=f.detection_noise,
            mode=f.mode,
        )
        out.append(FringeRun(T, scan, fit_fringe(scan)))
    return out


def run_extraction(sc: Scenario, runs: list[FringeRun] | None = None) -> GravityEstimate:
    runs = run_fringes(sc) if runs is None else runs
    return extract_g(sc.bragg, [r.fit for r in runs])


def run_allan(sc: Scenario) -> tuple[np.ndarray, AllanResult]:
    """Synthetic white shot series in uGal and its Allan deviation."""
    st = sc.stability
    sigma = per_shot_sigma_for(st.sensitivity_1s_ugal, st.cycle_time)
    values = white_series(st.shots, sigma, sc.seed)
    return values, allan_deviation(ShotSeries(values, st.cycle_time), overlapping=st.overlapping)
