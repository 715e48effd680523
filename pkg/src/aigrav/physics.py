"""Constants and closed-form relations of a Bragg Mach-Zehnder gravimeter.

Frequencies handed to and returned from the public functions are in Hz and
Hz/s. Rabi and recoil frequencies stay angular (rad/s).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from scipy import constants as _const

HBAR = _const.hbar  # CODATA 2018
RB87_MASS = 1.44316060e-25  # kg
RB87_D2_WAVELENGTH = 780.24e-9  # m

# 1 Gal = 1e-2 m/s^2
UGAL = 1e-8  # m/s^2


class PhysicsError(ValueError):
    """Raised for arguments outside the domain of a physical relation."""


@dataclass(frozen=True)
class AtomSpecies:
    mass: float
    wavelength: float
    label: str = ""

    def __post_init__(self):
        if not self.mass > 0:
            raise PhysicsError(f"mass must be positive, got {self.mass!r}")
        if not self.wavelength > 0:
            raise PhysicsError(f"wavelength must be positive, got {self.wavelength!r}")

    @property
    def k(self) -> float:
        """Lattice wavenumber 2*pi/wavelength (rad/m)."""
        return 2.0 * math.pi / self.wavelength


RB87 = AtomSpecies(mass=RB87_MASS, wavelength=RB87_D2_WAVELENGTH, label="87Rb D2")


def load_species(path) -> AtomSpecies:
    """Read a species definition from JSON (keys: mass_kg, wavelength_m, label)."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    unknown = set(data) - {"mass_kg", "wavelength_m", "label"}
    if unknown:
        raise PhysicsError(f"unknown species keys: {sorted(unknown)}")
    try:
        return AtomSpecies(
            mass=float(data["mass_kg"]),
            wavelength=float(data["wavelength_m"]),
            label=str(data.get("label", "")),
        )
    except KeyError as exc:
        raise PhysicsError(f"species file missing key {exc.args[0]!r}") from None


@dataclass(frozen=True)
class BraggConfig:
    """Bragg lattice geometry.

    ``alignment`` multiplies k.g; 1.0 means beams exactly along gravity.
    ``detuning`` is the single-photon detuning in rad/s and is informational.
    """

    species: AtomSpecies = RB87
    order: int = 1
    detuning: float = 0.0
    alignment: float = 1.0

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise PhysicsError(f"Bragg order must be a positive integer, got {self.order!r}")
        if not 0 < self.alignment <= 1:
            raise PhysicsError(f"alignment factor must lie in (0, 1], got {self.alignment!r}")

    @property
    def k(self) -> float:
        return self.species.k

    @property
    def k_eff(self) -> float:
        """Two-photon wavevector 2k."""
        return 2.0 * self.species.k


@dataclass(frozen=True)
class PulseSequence:
    """Timing of the pi/2 - pi - pi/2 sequence.

    Parameters
    ----------
    rabi : float
        Rabi frequency Omega_R in rad/s.
    beamsplitter_duration : float
        Duration tau_R of a pi/2 pulse in s; the mirror pulse lasts 2*tau_R.
    interrogation : float
        Free evolution time T in s.
    cycle_time : float
        Time between shots in s.
    """

    rabi: float
    beamsplitter_duration: float
    interrogation: float
    cycle_time: float = 17.98
    nominal: bool = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("rabi", "beamsplitter_duration", "interrogation", "cycle_time"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise PhysicsError(f"{name} must be positive and finite, got {value!r}")
            object.__setattr__(self, name, value)
        pulse_area = self.rabi * self.beamsplitter_duration
        nominal = abs(pulse_area - math.pi / 2) <= 1e-6
        object.__setattr__(self, "nominal", nominal)
        if not nominal:
            warnings.warn(
                f"Omega_R*tau_R = {pulse_area:.6g} differs from pi/2; "
                "the closed-form transfer function assumes a pi/2 beamsplitter",
                stacklevel=3,
            )

    @classmethod
    def from_pulse_duration(cls, beamsplitter_duration, interrogation, cycle_time=17.98):
        """Sequence whose Rabi frequency makes ``beamsplitter_duration`` a pi/2 pulse."""
        rabi = math.pi / (2.0 * beamsplitter_duration)
        return cls(rabi, beamsplitter_duration, interrogation, cycle_time)

    @property
    def total_half_length(self) -> float:
        """T + 2*tau_R: support half-width of the sensitivity function."""
        return self.interrogation + 2.0 * self.beamsplitter_duration


def recoil_frequency(species: AtomSpecies = RB87) -> float:
    """Recoil frequency hbar*k^2/(2m) in rad/s."""
    return HBAR * species.k**2 / (2.0 * species.mass)


def chirp_for_gravity(cfg: BraggConfig, g: float) -> float:
    """Lattice sweep rate k*g/pi (Hz/s) that keeps free-falling atoms resonant."""
    if not g > 0:
        raise PhysicsError(f"g must be positive, got {g!r}")
    return cfg.alignment * cfg.k * g / math.pi


def gravity_from_chirp(cfg: BraggConfig, alpha: float) -> float:
    """Inverse of :func:`chirp_for_gravity`."""
    if not alpha > 0:
        raise PhysicsError(f"chirp must be positive, got {alpha!r}")
    return math.pi * alpha / (cfg.alignment * cfg.k)


def bragg_resonance_offset(cfg: BraggConfig, g: float, t: float) -> float:
    """Two-beam frequency difference (Hz) resonant with the order-n transition at time t."""
    if t < 0:
        raise PhysicsError(f"t must be non-negative, got {t!r}")
    static = 4.0 * cfg.order * recoil_frequency(cfg.species) / (2.0 * math.pi)
    return static + chirp_for_gravity(cfg, g) * t


def mz_phase(cfg: BraggConfig, seq: PulseSequence, g: float, alpha: float) -> float:
    """Interferometer phase n*(2 k g T^2 - 2 pi alpha T^2) in rad.

    Written as 2*pi*n*T^2*(alpha0 - alpha) so that the cancellation at
    resonance is exact rather than a difference of two large numbers.
    """
    T2 = seq.interrogation**2
    alpha0 = cfg.alignment * cfg.k * g / math.pi
    return 2.0 * math.pi * cfg.order * T2 * (alpha0 - alpha)


def effective_rabi(omega1: float, omega2: float, detuning: float) -> float:
    """Two-photon Rabi frequency Omega1*Omega2/(2*Delta)."""
    if detuning == 0:
        raise PhysicsError("detuning must be non-zero")
    return omega1 * omega2 / (2.0 * detuning)


def to_microgal(a):
    """Convert m/s^2 to microGal."""
    return a / UGAL


def from_microgal(a):
    return a * UGAL
