"""Sensitivity function of the pi/2 - pi - pi/2 sequence and its transfer function.

Time is measured from the centre of the mirror pulse. The positive half of
the sensitivity function runs over ``0 < t < T + 2*tau_R`` and the negative
half follows from ``g(-t) = -g(t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .physics import PulseSequence

# half-width (relative to Omega_R) of the window around |omega| = Omega_R
# where the series expansion replaces the closed form
_SERIES_WINDOW = 1e-6
_SERIES_ORDER = 4


def sensitivity_value(seq: PulseSequence, t):
    """Evaluate the sensitivity function g_phi at time(s) ``t`` (s).

    Accepts scalars or arrays. Outside ``|t| < T + 2*tau_R`` the value is 0.
    """
    t = np.asarray(t, dtype=float)
    sign = np.sign(t)
    u = np.abs(t)
    W, tau, T = seq.rabi, seq.beamsplitter_duration, seq.interrogation
    out = np.zeros_like(u)
    first = u < tau
    middle = (u >= tau) & (u <= T + tau)
    last = (u > T + tau) & (u < T + 2 * tau)
    out[first] = np.sin(W * u[first])
    out[middle] = 1.0
    out[last] = -np.sin(W * (T - u[last]))
    out = sign * out
    return out[()] if out.ndim == 0 else out


def _bracket_derivative(seq: PulseSequence, omega: float, n: int) -> float:
    """n-th derivative of cos(a w) + Omega_R sin(b w)/w at ``omega`` (a=(T+2tau)/2, b=T/2)."""
    a = 0.5 * seq.total_half_length
    b = 0.5 * seq.interrogation
    W = seq.rabi
    value = a**n * math.cos(a * omega + n * math.pi / 2)
    s = 0.0
    for j in range(n + 1):
        s += (
            math.comb(n, j)
            * (-1) ** j
            * math.factorial(j)
            * omega ** (-1 - j)
            * b ** (n - j)
            * math.sin(b * omega + (n - j) * math.pi / 2)
        )
    return value + W * s


def _G_near_rabi(seq: PulseSequence, omega: float) -> complex:
    # G = 4i W sin(a w)/(w + W) * B(w)/(w - W); B(W) = 0 for a pi/2 pulse, so
    # B(w)/(w - W) is expanded about W.
    W = seq.rabi
    a = 0.5 * seq.total_half_length
    d = omega - W
    ratio = 0.0
    for k in range(_SERIES_ORDER + 1):
        ratio += _bracket_derivative(seq, W, k + 1) / math.factorial(k + 1) * d**k
    if not seq.nominal:
        ratio += _bracket_derivative(seq, W, 0) / d if d != 0 else math.inf
    return 4j * W * math.sin(a * omega) / (omega + W) * ratio


def transfer_G(seq: PulseSequence, omega):
    """Fourier transform G(omega) of the sensitivity function (units of s).

    ``omega`` is angular frequency in rad/s, scalar or array. G is odd in
    omega and purely imaginary. The removable singularities at 0 and
    +/-Omega_R are handled without cancellation: ``sin(wT/2)/w`` is
    evaluated through ``sinc`` and a fourth-order series about Omega_R is
    used within a relative distance of 1e-6.
    """
    omega = np.asarray(omega, dtype=float)
    scalar = omega.ndim == 0
    omega = np.atleast_1d(omega)
    sign = np.sign(omega)
    w = np.abs(omega)
    W = seq.rabi
    a = 0.5 * seq.total_half_length
    T = seq.interrogation
    # Omega_R * sin(wT/2)/w without the 0/0 at w = 0
    tail = W * 0.5 * T * np.sinc(w * T / (2 * np.pi))
    with np.errstate(divide="ignore", invalid="ignore"):
        G = 4j * W / (w**2 - W**2) * np.sin(w * a) * (np.cos(w * a) + tail)
    near = np.abs(w - W) < _SERIES_WINDOW * W
    for i in zip(*np.nonzero(near)):
        G[i] = _G_near_rabi(seq, float(w[i]))
    G = sign * G
    return G[0] if scalar else G


def weighting(seq: PulseSequence, f):
    """Phase-noise weighting |H(2 pi f)|^2 = |2 pi f G(2 pi f)|^2 (dimensionless)."""
    omega = 2.0 * np.pi * np.asarray(f, dtype=float)
    H = omega * transfer_G(seq, omega)
    out = np.abs(H) ** 2
    return out[()] if np.ndim(out) == 0 else out


def zero_frequencies(seq: PulseSequence, band: float) -> np.ndarray:
    """Frequencies n/(T + 2 tau_R), n >= 1, not exceeding ``band`` (Hz)."""
    spacing = 1.0 / seq.total_half_length
    count = int(math.floor(band / spacing * (1 + 1e-12)))
    return np.arange(1, count + 1) * spacing


def cutoff_frequency(seq: PulseSequence) -> float:
    """Low-pass corner sqrt(3)*Omega_R/(6 pi) in Hz."""
    return math.sqrt(3.0) * seq.rabi / (6.0 * math.pi)


def characteristic_frequencies(seq: PulseSequence, band: float) -> dict:
    """Zeros of the weighting inside ``(0, band]`` and the low-pass cutoff, both in Hz."""
    if not band > 0:
        raise ValueError(f"band must be positive, got {band!r}")
    return {
        "zeros": zero_frequencies(seq, band).tolist(),
        "cutoff": cutoff_frequency(seq),
    }


@dataclass(frozen=True)
class TransferGrid:
    frequencies: np.ndarray
    weights: np.ndarray
    sequence: PulseSequence

    def __post_init__(self):
        if self.frequencies.shape != self.weights.shape:
            raise ValueError("frequencies and weights differ in length")
        if np.any(self.frequencies <= 0) or np.any(np.diff(self.frequencies) <= 0):
            raise ValueError("frequencies must be positive and strictly increasing")
        if np.any(self.weights < 0):
            raise ValueError("weights must be non-negative")


def transfer_grid(seq: PulseSequence, f_min=1.0, f_max=1e5, points=20001, log=True) -> TransferGrid:
    """Tabulate the weighting on a log- or linearly-spaced grid."""
    if log:
        f = np.geomspace(f_min, f_max, points)
    else:
        f = np.linspace(f_min, f_max, points)
    return TransferGrid(f, np.asarray(weighting(seq, f), dtype=float), seq)
