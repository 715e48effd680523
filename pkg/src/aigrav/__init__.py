"""Phase-noise, fringe and stability analysis for a Bragg atom-interferometric gravimeter."""

from .fringe import AmbiguityError, FringeFit, FringeFitError, FringeScan, extract_g, fit_fringe, simulate_scan
from .noise import BeatConfig, NoiseSpec, TimeSeries, generate_phase_noise, synth_beat
from .physics import RB87, AtomSpecies, BraggConfig, PulseSequence, chirp_for_gravity, mz_phase
from .scenario import Scenario, ScenarioError, load_scenario
from .sensitivity import characteristic_frequencies, transfer_G, weighting
from .spectral import demodulate, estimate_psd, integrated_phase_noise
from .stability import ShotSeries, allan_deviation, qpn_limit, sensitivity_at_tau

__version__ = "1.0.0"

__all__ = [
    "AmbiguityError",
    "AtomSpecies",
    "BeatConfig",
    "BraggConfig",
    "FringeFit",
    "FringeFitError",
    "FringeScan",
    "NoiseSpec",
    "PulseSequence",
    "RB87",
    "Scenario",
    "ScenarioError",
    "ShotSeries",
    "TimeSeries",
    "allan_deviation",
    "characteristic_frequencies",
    "chirp_for_gravity",
    "demodulate",
    "estimate_psd",
    "extract_g",
    "fit_fringe",
    "generate_phase_noise",
    "integrated_phase_noise",
    "load_scenario",
    "mz_phase",
    "qpn_limit",
    "sensitivity_at_tau",
    "simulate_scan",
    "synth_beat",
    "transfer_G",
    "weighting",
]
