"""Monte-Carlo fringe scans, fixed-period sinusoidal fits and multi-T gravity extraction."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .physics import BraggConfig, PulseSequence, chirp_for_gravity, mz_phase

SWEEP = "sweep"
PHASE = "phase"


class FringeFitError(RuntimeError):
    """The fit could not identify a fringe."""


class AmbiguityError(RuntimeError):
    """Candidate fringe centres do not single out one common minimum."""

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


@dataclass(frozen=True)
class FringeScan:
    """Mean first-order population versus sweep rate (Hz/s) or final-pulse phase (rad)."""

    sequence: PulseSequence
    order: int
    alphas: np.ndarray
    populations: np.ndarray
    stderr: np.ndarray
    shots_per_point: int
    atoms: int | None
    seed: int | None
    mode: str = SWEEP

    def __post_init__(self):
        x = np.asarray(self.alphas, dtype=float)
        p = np.asarray(self.populations, dtype=float)
        e = np.asarray(self.stderr, dtype=float)
        if not (x.shape == p.shape == e.shape) or x.ndim != 1:
            raise ValueError("scan arrays must be 1-D and equal length")
        d = np.diff(x)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("scan abscissa must be strictly monotone")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("populations must lie in [0, 1]")
        if self.mode not in (SWEEP, PHASE):
            raise ValueError(f"unknown scan mode {self.mode!r}")
        object.__setattr__(self, "alphas", x)
        object.__setattr__(self, "populations", p)
        object.__setattr__(self, "stderr", e)

    @property
    def period(self) -> float:
        return fringe_period(self.sequence, self.order, self.mode)

    @property
    def window(self) -> tuple[float, float]:
        return float(self.alphas.min()), float(self.alphas.max())


@dataclass(frozen=True)
class FringeFit:
    offset: float
    contrast: float
    center: float
    period: float
    residual_rms: float
    covariance: np.ndarray  # (offset, contrast, center, period); period fixed
    window: tuple[float, float]
    interrogation: float
    order: int = 1
    mode: str = SWEEP

    @property
    def center_stderr(self) -> float:
        return math.sqrt(max(self.covariance[2, 2], 0.0))

    def candidates(self, lo: float | None = None, hi: float | None = None) -> np.ndarray:
        """All centre + m*period values inside [lo, hi] (default: the scanned window)."""
        lo = self.window[0] if lo is None else lo
        hi = self.window[1] if hi is None else hi
        m0 = math.ceil((lo - self.center) / self.period - 1e-12)
        m1 = math.floor((hi - self.center) / self.period + 1e-12)
        return self.center + self.period * np.arange(m0, m1 + 1)

    def to_dict(self) -> dict:
        return {
            "offset": self.offset,
            "contrast": self.contrast,
            "center": self.center,
            "center_stderr": self.center_stderr,
            "period": self.period,
            "residual_rms": self.residual_rms,
            "covariance": self.covariance.tolist(),
            "window": list(self.window),
            "interrogation_s": self.interrogation,
            "order": self.order,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FringeFit":
        return cls(
            offset=float(d["offset"]),
            contrast=float(d["contrast"]),
            center=float(d["center"]),
            period=float(d["period"]),
            residual_rms=float(d["residual_rms"]),
            covariance=np.asarray(d["covariance"], dtype=float),
            window=(float(d["window"][0]), float(d["window"][1])),
            interrogation=float(d["interrogation_s"]),
            order=int(d.get("order", 1)),
            mode=d.get("mode", SWEEP),
        )


def fringe_period(seq: PulseSequence, order: int = 1, mode: str = SWEEP) -> float:
    """Fringe period: 1/(n T^2) in Hz/s for sweep scans, 2*pi/n rad for phase scans."""
    if mode == PHASE:
        return 2.0 * math.pi / order
    return 1.0 / (order * seq.interrogation**2)


def simulate_scan(
    cfg: BraggConfig,
    seq: PulseSequence,
    g_true: float,
    alphas,
    atoms: int | None = 50_000,
    contrast: float = 0.5,
    shots_per_point: int = 5,
    seed: int = 0,
    phase_noise: float = 0.0,
    detection_noise: float = 0.0,
    mode: str = SWEEP,
    fixed_alpha: float | None = None,
) -> FringeScan:
    """Simulate a fringe scan of the first-order population.

    Each shot has transfer probability ``(1 + C cos(Phi))/2``. With ``atoms``
    set, the detected fraction is binomial in ``atoms`` (quantum projection
    noise); ``atoms=None`` returns the noiseless probability. ``phase_noise``
    adds a Gaussian phase kick per shot (rad rms) and ``detection_noise`` a
    Gaussian error on the detected fraction.

    In ``mode='phase'`` the abscissa is the final-pulse laser phase phi_3 and
    the sweep rate is held at ``fixed_alpha`` (default: the resonant chirp).
    """
    if not 0 <= contrast <= 1:
        raise ValueError(f"contrast must lie in [0, 1], got {contrast!r}")
    if shots_per_point < 1:
        raise ValueError("shots_per_point must be >= 1")
    x = np.asarray(alphas, dtype=float)
    n = cfg.order
    if mode == SWEEP:
        phi = mz_phase(cfg, seq, g_true, x)
    elif mode == PHASE:
        a = chirp_for_gravity(cfg, g_true) if fixed_alpha is None else fixed_alpha
        phi = mz_phase(cfg, seq, g_true, a) + n * x
    else:
        raise ValueError(f"unknown scan mode {mode!r}")

    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    shots = shots_per_point
    kicks = rng.standard_normal((x.size, shots)) * phase_noise if phase_noise > 0 else 0.0
    p = 0.5 * (1.0 + contrast * np.cos(phi[:, None] + kicks))
    p = np.broadcast_to(p, (x.size, shots))
    if atoms is None:
        frac = np.array(p, dtype=float)
    else:
        frac = rng.binomial(int(atoms), p) / float(atoms)
    if detection_noise > 0:
        frac = np.clip(frac + detection_noise * rng.standard_normal(frac.shape), 0.0, 1.0)
    pop = frac.mean(axis=1)
    if shots > 1:
        err = frac.std(axis=1, ddof=1) / math.sqrt(shots)
    elif atoms is not None:
        err = np.sqrt(p[:, 0] * (1 - p[:, 0]) / atoms)
    else:
        err = np.zeros(x.size)
    return FringeScan(seq, n, x, pop, err, shots, atoms, seed, mode)


def _model(params, theta):
    offset, contrast, phase0 = params
    return offset * (1.0 + contrast * np.cos(theta - phase0))


def fit_fringe(scan: FringeScan) -> FringeFit:
    """Least-squares fit of ``P = offset (1 + C cos(2 pi (x - x0)/period))`` with the period fixed.

    A linear projection on cos/sin at the known period supplies the start
    point; Levenberg-Marquardt refines it. The covariance is
    ``s^2 (J^T J)^-1`` with ``s^2`` the residual variance.
    """
    x = scan.alphas
    y = scan.populations
    if x.size < 4:
        raise FringeFitError("a fringe fit needs at least 4 points")
    span = abs(x[-1] - x[0])
    period = scan.period
    if x.size < 8 and span < period:
        raise FringeFitError("scan neither covers a full period nor carries 8 points")

    ref = float(x[0])
    kappa = 2.0 * math.pi / period
    theta = kappa * (x - ref)
    design = np.column_stack([np.ones_like(theta), np.cos(theta), np.sin(theta)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    o, a, b = coef
    amp = math.hypot(a, b)
    resid = y - design @ coef
    dof = max(x.size - 3, 1)
    s2 = float(resid @ resid) / dof
    amp_err = math.sqrt(s2 * 2.0 / x.size) if s2 > 0 else 0.0
    if o <= 0 or amp <= max(3.0 * amp_err, 1e-9 * abs(o)):
        raise FringeFitError("no fringe: populations are flat within noise (zero contrast?)")

    start = np.array([o, amp / o, math.atan2(b, a)])
    sol = optimize.least_squares(
        lambda p: _model(p, theta) - y,
        start,
        method="lm",
        x_scale=np.array([max(abs(o), 1e-3), max(amp / o, 1e-3), 1.0]),
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
    )
    if not sol.success:
        raise FringeFitError(f"least squares did not converge: {sol.message}")
    offset, contrast, phase0 = sol.x
    if contrast < 0:
        contrast, phase0 = -contrast, phase0 + math.pi
    resid = sol.fun
    s2 = float(resid @ resid) / dof
    # jacobian in (offset, contrast, center)
    J = sol.jac.copy()
    J[:, 2] = J[:, 2] * kappa  # d/dcenter = kappa * d/dphase0
    try:
        cov3 = s2 * np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError as exc:
        raise FringeFitError("singular normal equations") from exc
    cov = np.zeros((4, 4))
    cov[:3, :3] = cov3

    center = ref + phase0 / kappa
    lo = float(min(x[0], x[-1]))
    center = lo + math.fmod(center - lo, period)
    if center < lo:
        center += period
    return FringeFit(
        offset=float(offset),
        contrast=float(contrast),
        center=float(center),
        period=float(period),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        covariance=cov,
        window=scan.window,
        interrogation=scan.sequence.interrogation,
        order=scan.order,
        mode=scan.mode,
    )


@dataclass
class GravityEstimate:
    g: float
    g_stderr: float
    alpha0: float
    alpha0_stderr: float
    selected: list[float]
    candidates: list[list[float]]
    spread: float
    report: dict = field(default_factory=dict)


def extract_g(cfg: BraggConfig, fits, nsigma: float = 3.0, rtol: float = 1e-9) -> GravityEstimate:
    """Common-minimum gravity estimate from fringe fits at several interrogation times.

    Parameters
    ----------
    cfg : BraggConfig
    fits : sequence of FringeFit or (T, FringeFit)
        Sweep-rate fits; at least two distinct interrogation times.
    nsigma : float
        A candidate set is consistent when every member lies within
        ``nsigma`` combined standard errors (plus ``rtol`` relative slack)
        of the set's weighted mean.

    Each fit contributes the candidate centres ``center + m*period`` inside
    the intersection of all scanned windows. Exactly one consistent
    combination must exist, otherwise :class:`AmbiguityError` is raised.
    """
    fits = [f[1] if isinstance(f, tuple) else f for f in fits]
    if any(f.mode != SWEEP for f in fits):
        raise ValueError("gravity extraction needs sweep-rate fits")
    times = {round(f.interrogation, 12) for f in fits}
    if len(times) < 2:
        raise ValueError("gravity extraction needs fits at >= 2 distinct interrogation times")

    lo = max(f.window[0] for f in fits)
    hi = min(f.window[1] for f in fits)
    if lo > hi:
        raise AmbiguityError("scanned windows do not overlap", [])
    cands = [f.candidates(lo, hi) for f in fits]
    listing = [c.tolist() for c in cands]
    if any(c.size == 0 for c in cands):
        raise AmbiguityError("some fit has no candidate minimum in the common window", listing)

    sig = np.array([f.center_stderr for f in fits])
    consistent = []
    for combo in itertools.product(*cands):
        vals = np.asarray(combo)
        mean, err = _weighted_mean(vals, sig)
        tol = nsigma * np.sqrt(sig**2 + err**2) + rtol * abs(mean)
        if np.all(np.abs(vals - mean) <= tol):
            consistent.append((float(np.ptp(vals)), mean, err, vals))
    if not consistent:
        raise AmbiguityError("no candidate common to all interrogation times", listing)
    if len(consistent) > 1:
        sets = [c[3].tolist() for c in sorted(consistent, key=lambda c: c[0])]
        raise AmbiguityError(f"{len(consistent)} candidate sets are consistent; ambiguity unresolved", sets)

    spread, alpha0, alpha_err, vals = consistent[0]
    scale = math.pi / (cfg.alignment * cfg.k)
    g = alpha0 * scale
    report = {
        "g_m_s2": g,
        "g_stderr_m_s2": alpha_err * scale,
        "alpha0_hz_s": alpha0,
        "alpha0_stderr_hz_s": alpha_err,
        "interrogation_times_s": [f.interrogation for f in fits],
        "selected_centers_hz_s": vals.tolist(),
        "candidates_hz_s": listing,
        "spread_hz_s": spread,
        "common_window_hz_s": [lo, hi],
    }
    return GravityEstimate(g, alpha_err * scale, alpha0, alpha_err, vals.tolist(), listing, spread, report)


def _weighted_mean(vals: np.ndarray, sig: np.ndarray):
    if np.all(sig > 0):
        w = 1.0 / sig**2
        return float(np.sum(w * vals) / np.sum(w)), float(1.0 / math.sqrt(np.sum(w)))
    return float(np.mean(vals)), 0.0


def write_scan_csv(scan: FringeScan, path) -> None:
    xname = "alpha_hz_per_s" if scan.mode == SWEEP else "phase_rad"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([xname, "population", "stderr"])
        for row in zip(scan.alphas, scan.populations, scan.stderr):
            w.writerow([repr(float(v)) for v in row])


def read_scan_csv(path, seq: PulseSequence, order: int = 1) -> FringeScan:
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh))
    mode = PHASE if header and header[0] == "phase_rad" else SWEEP
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return FringeScan(seq, order, data[:, 0], data[:, 1], data[:, 2], 1, None, None, mode)
