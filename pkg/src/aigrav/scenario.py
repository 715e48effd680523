"""Scenario files: a versioned JSON description of one reproducible run.

Every block is optional except ``name``; missing blocks fall back to the
defaults below. Unknown keys are rejected and every error names the
offending field, e.g. ``noise.tones[1].rms_rad``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .noise import Band, BeatConfig, NoiseSpec, Tone
from .physics import RB87, AtomSpecies, BraggConfig, PulseSequence

SCHEMA = "aigrav-scenario/1"


class ScenarioError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class AnalysisSettings:
    lp_cutoff: float | None = None
    rbw: float = 0.8
    f_lo: float | None = None
    f_hi: float = 10e3
    plot_rbw: float = 25.0
    beat_rbw: float = 500.0
    impedance: float = 50.0
    compare_to: str | None = None


@dataclass
class FringeSettings:
    g_true: float = 9.7833
    interrogation_times: tuple = (10e-3,)
    atoms: int | None = 50_000
    contrast: float = 0.5
    shots_per_point: int = 5
    points: int = 40
    periods: float = 2.0
    offset: float = 0.0
    phase_noise: float = 0.0
    detection_noise: float = 0.0
    mode: str = "sweep"


@dataclass
class StabilitySettings:
    cycle_time: float = 17.98
    shots: int = 400
    sensitivity_1s_ugal: float = 1360.0
    tau_ref: float = 200.0
    overlapping: bool = False


@dataclass
class Scenario:
    name: str
    seed: int = 0
    description: str = ""
    bragg: BraggConfig = field(default_factory=BraggConfig)
    sequence: PulseSequence = field(default_factory=lambda: PulseSequence.from_pulse_duration(50e-6, 10e-3))
    beat: BeatConfig = field(default_factory=BeatConfig)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    fringe: FringeSettings = field(default_factory=FringeSettings)
    stability: StabilitySettings = field(default_factory=StabilitySettings)

    def with_seed(self, seed: int) -> "Scenario":
        from dataclasses import replace

        noise = replace(self.noise, seed=seed)
        return replace(self, seed=seed, noise=noise)


# --- field helpers ---------------------------------------------------------


def _check_keys(block: dict, allowed: set, path: str) -> None:
    if not isinstance(block, dict):
        raise ScenarioError(path, "expected an object")
    for key in block:
        if key not in allowed:
            raise ScenarioError(f"{path}.{key}" if path else key, "unknown key")


def _num(block, key, path, default=None, positive=False, nonneg=False, allow_none=False):
    here = f"{path}.{key}" if path else key
    if key not in block:
        return default
    value = block[key]
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(here, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ScenarioError(here, "must be finite")
    if positive and not value > 0:
        raise ScenarioError(here, "must be > 0")
    if nonneg and value < 0:
        raise ScenarioError(here, "must be >= 0")
    return value


def _int(block, key, path, default=None, minimum=None, allow_none=False):
    here = f"{path}.{key}" if path else key
    if key not in block:
        return default
    value = block[key]
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(here, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioError(here, f"must be >= {minimum}")
    return value


def _str(block, key, path, default=None, choices=None, allow_none=False):
    here = f"{path}.{key}" if path else key
    if key not in block:
        return default
    value = block[key]
    if value is None and allow_none:
        return None
    if not isinstance(value, str):
        raise ScenarioError(here, f"expected a string, got {value!r}")
    if choices and value not in choices:
        raise ScenarioError(here, f"must be one of {sorted(choices)}")
    return value


def _build(path, factory, *args, **kwargs):
    try:
        return factory(*args, **kwargs)
    except ValueError as exc:
        raise ScenarioError(path, str(exc)) from None


# --- blocks ----------------------------------------------------------------


def _species(block) -> AtomSpecies:
    p = "species"
    _check_keys(block, {"mass_kg", "wavelength_m", "label"}, p)
    return _build(
        p,
        AtomSpecies,
        _num(block, "mass_kg", p, RB87.mass, positive=True),
        _num(block, "wavelength_m", p, RB87.wavelength, positive=True),
        _str(block, "label", p, RB87.label),
    )


def _bragg(block, species) -> BraggConfig:
    p = "bragg"
    _check_keys(block, {"order", "detuning_rad_s", "alignment"}, p)
    return _build(
        p,
        BraggConfig,
        species,
        _int(block, "order", p, 1, minimum=1),
        _num(block, "detuning_rad_s", p, 0.0),
        _num(block, "alignment", p, 1.0, positive=True),
    )


def _sequence(block) -> PulseSequence:
    p = "sequence"
    _check_keys(block, {"rabi_rad_s", "tau_r_s", "t_s", "cycle_time_s"}, p)
    tau = _num(block, "tau_r_s", p, 50e-6, positive=True)
    T = _num(block, "t_s", p, 10e-3, positive=True)
    cycle = _num(block, "cycle_time_s", p, 17.98, positive=True)
    rabi = _num(block, "rabi_rad_s", p, None, positive=True)
    if rabi is None:
        return _build(p, PulseSequence.from_pulse_duration, tau, T, cycle)
    return _build(p, PulseSequence, rabi, tau, T, cycle)


def _beat(block) -> BeatConfig:
    p = "beat"
    _check_keys(block, {"amplitude", "contrast", "carrier_hz", "phase0_rad", "fs_hz", "duration_s"}, p)
    d = BeatConfig()
    return _build(
        p,
        BeatConfig,
        _num(block, "amplitude", p, d.amplitude),
        _num(block, "contrast", p, d.contrast, nonneg=True),
        _num(block, "carrier_hz", p, d.carrier, positive=True),
        _num(block, "phase0_rad", p, d.phase0),
        _num(block, "fs_hz", p, d.fs, positive=True),
        _num(block, "duration_s", p, d.duration, positive=True),
    )


def _noise(block, seed) -> NoiseSpec:
    p = "noise"
    _check_keys(block, {"tones", "bands", "additive_rms", "multiplicative_rms"}, p)
    tones = []
    for i, t in enumerate(block.get("tones", [])):
        tp = f"{p}.tones[{i}]"
        _check_keys(t, {"frequency_hz", "rms_rad"}, tp)
        for key in ("frequency_hz", "rms_rad"):
            if key not in t:
                raise ScenarioError(f"{tp}.{key}", "required")
        tones.append(Tone(_num(t, "frequency_hz", tp, positive=True), _num(t, "rms_rad", tp, nonneg=True)))
    bands = []
    for i, b in enumerate(block.get("bands", [])):
        bp = f"{p}.bands[{i}]"
        _check_keys(b, {"f_lo_hz", "f_hi_hz", "psd_rad2_hz"}, bp)
        for key in ("f_lo_hz", "f_hi_hz", "psd_rad2_hz"):
            if key not in b:
                raise ScenarioError(f"{bp}.{key}", "required")
        lo = _num(b, "f_lo_hz", bp, positive=True)
        hi = _num(b, "f_hi_hz", bp, positive=True)
        if hi <= lo:
            raise ScenarioError(f"{bp}.f_hi_hz", "must exceed f_lo_hz")
        bands.append(Band(lo, hi, _num(b, "psd_rad2_hz", bp, nonneg=True)))
    return _build(
        p,
        NoiseSpec,
        tuple(tones),
        tuple(bands),
        _num(block, "additive_rms", p, 0.0, nonneg=True),
        _num(block, "multiplicative_rms", p, 0.0, nonneg=True),
        seed,
    )


def _analysis(block) -> AnalysisSettings:
    p = "analysis"
    _check_keys(
        block,
        {"lp_cutoff_hz", "rbw_hz", "f_lo_hz", "f_hi_hz", "plot_rbw_hz", "beat_rbw_hz", "impedance_ohm", "compare_to"},
        p,
    )
    d = AnalysisSettings()
    return AnalysisSettings(
        lp_cutoff=_num(block, "lp_cutoff_hz", p, d.lp_cutoff, positive=True, allow_none=True),
        rbw=_num(block, "rbw_hz", p, d.rbw, positive=True),
        f_lo=_num(block, "f_lo_hz", p, d.f_lo, nonneg=True, allow_none=True),
        f_hi=_num(block, "f_hi_hz", p, d.f_hi, positive=True),
        plot_rbw=_num(block, "plot_rbw_hz", p, d.plot_rbw, positive=True),
        beat_rbw=_num(block, "beat_rbw_hz", p, d.beat_rbw, positive=True),
        impedance=_num(block, "impedance_ohm", p, d.impedance, positive=True),
        compare_to=_str(block, "compare_to", p, d.compare_to, allow_none=True),
    )


def _fringe(block) -> FringeSettings:
    p = "fringe"
    _check_keys(
        block,
        {
            "g_true_m_s2",
            "interrogation_times_s",
            "atoms",
            "contrast",
            "shots_per_point",
            "points",
            "periods",
            "offset_hz_s",
            "phase_noise_rad",
            "detection_noise",
            "mode",
        },
        p,
    )
    d = FringeSettings()
    times = block.get("interrogation_times_s", list(d.interrogation_times))
    if not isinstance(times, list) or not times:
        raise ScenarioError(f"{p}.interrogation_times_s", "expected a non-empty list")
    checked = []
    for i, t in enumerate(times):
        if isinstance(t, bool) or not isinstance(t, (int, float)) or not t > 0:
            raise ScenarioError(f"{p}.interrogation_times_s[{i}]", "must be a positive number")
        checked.append(float(t))
    contrast = _num(block, "contrast", p, d.contrast, nonneg=True)
    if contrast > 1:
        raise ScenarioError(f"{p}.contrast", "must lie in [0, 1]")
    return FringeSettings(
        g_true=_num(block, "g_true_m_s2", p, d.g_true, positive=True),
        interrogation_times=tuple(checked),
        atoms=_int(block, "atoms", p, d.atoms, minimum=1, allow_none=True),
        contrast=contrast,
        shots_per_point=_int(block, "shots_per_point", p, d.shots_per_point, minimum=1),
        points=_int(block, "points", p, d.points, minimum=4),
        periods=_num(block, "periods", p, d.periods, positive=True),
        offset=_num(block, "offset_hz_s", p, d.offset),
        phase_noise=_num(block, "phase_noise_rad", p, d.phase_noise, nonneg=True),
        detection_noise=_num(block, "detection_noise", p, d.detection_noise, nonneg=True),
        mode=_str(block, "mode", p, d.mode, choices={"sweep", "phase"}),
    )


def _stability(block) -> StabilitySettings:
    p = "stability"
    _check_keys(block, {"cycle_time_s", "shots", "sensitivity_1s_ugal", "tau_ref_s", "overlapping"}, p)
    d = StabilitySettings()
    overlapping = block.get("overlapping", d.overlapping)
    if not isinstance(overlapping, bool):
        raise ScenarioError(f"{p}.overlapping", "expected true or false")
    return StabilitySettings(
        cycle_time=_num(block, "cycle_time_s", p, d.cycle_time, positive=True),
        shots=_int(block, "shots", p, d.shots, minimum=2),
        sensitivity_1s_ugal=_num(block, "sensitivity_1s_ugal", p, d.sensitivity_1s_ugal, positive=True),
        tau_ref=_num(block, "tau_ref_s", p, d.tau_ref, positive=True),
        overlapping=overlapping,
    )


TOP_LEVEL = {
    "schema",
    "name",
    "description",
    "seed",
    "species",
    "bragg",
    "sequence",
    "beat",
    "noise",
    "analysis",
    "fringe",
    "stability",
}


def parse_scenario(data: dict) -> Scenario:
    _check_keys(data, TOP_LEVEL, "")
    schema = data.get("schema")
    if schema != SCHEMA:
        raise ScenarioError("schema", f"expected {SCHEMA!r}, got {schema!r}")
    name = _str(data, "name", "")
    if not name:
        raise ScenarioError("name", "required")
    seed = _int(data, "seed", "", 0, minimum=0)
    if seed >= 2**64:
        raise ScenarioError("seed", "must fit in 64 bits")
    species = _species(data.get("species", {}))
    return Scenario(
        name=name,
        seed=seed,
        description=_str(data, "description", "", ""),
        bragg=_bragg(data.get("bragg", {}), species),
        sequence=_sequence(data.get("sequence", {})),
        beat=_beat(data.get("beat", {})),
        noise=_noise(data.get("noise", {}), seed),
        analysis=_analysis(data.get("analysis", {})),
        fringe=_fringe(data.get("fringe", {})),
        stability=_stability(data.get("stability", {})),
    )


def bundled_names() -> list[str]:
    root = resources.files("aigrav").joinpath("scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(ref) -> Scenario:
    """Load a scenario from a file path or a bundled scenario name."""
    path = Path(ref)
    if path.exists():
        text = path.read_text(encoding="utf-8")
    else:
        res = resources.files("aigrav").joinpath("scenarios", f"{ref}.json")
        if not res.is_file():
            raise ScenarioError("scenario", f"no file or bundled scenario named {ref!r} (bundled: {bundled_names()})")
        text = res.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_scenario(data)
