import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aigrav.fringe import (
    PHASE,
    AmbiguityError,
    FringeFit,
    FringeFitError,
    FringeScan,
    extract_g,
    fit_fringe,
    fringe_period,
    read_scan_csv,
    simulate_scan,
    write_scan_csv,
)
from aigrav.physics import BraggConfig, PulseSequence, chirp_for_gravity

G_TRUE = 9.7833
CFG = BraggConfig()
ALPHA0 = chirp_for_gravity(CFG, G_TRUE)


def seq_for(T):
    return PulseSequence.from_pulse_duration(50e-6, T)


def grid(T, periods=2.0, offset=1234.5, points=40):
    p = fringe_period(seq_for(T))
    c = ALPHA0 + offset
    return np.linspace(c - periods * p / 2, c + periods * p / 2, points)


def noiseless(T, contrast=0.5, **kw):
    return simulate_scan(CFG, seq_for(T), G_TRUE, grid(T, **kw), atoms=None, contrast=contrast)


def test_period_at_10_ms():
    assert fringe_period(seq_for(10e-3)) == pytest.approx(1e4, rel=1e-12)
    assert fringe_period(seq_for(10e-3), order=2) == pytest.approx(5e3, rel=1e-12)
    assert fringe_period(seq_for(10e-3), mode=PHASE) == pytest.approx(2 * math.pi)


def test_resonance_is_fringe_extremum():
    scan = simulate_scan(CFG, seq_for(10e-3), G_TRUE, [ALPHA0 - 2500, ALPHA0, ALPHA0 + 2500], atoms=None)
    assert scan.populations[1] == pytest.approx(0.75, rel=1e-12)
    assert scan.populations[0] == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("contrast", [0.25, 0.5, 0.9])
def test_noiseless_fit_recovers_parameters(contrast):
    fit = fit_fringe(noiseless(10e-3, contrast))
    assert fit.contrast == pytest.approx(contrast, rel=1e-10)
    assert fit.offset == pytest.approx(0.5, rel=1e-10)
    k = round((fit.center - ALPHA0) / fit.period)
    assert fit.center - k * fit.period == pytest.approx(ALPHA0, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(-2e4, 2e4))
def test_argmin_invariance(contrast, offset):
    fit = fit_fringe(noiseless(10e-3, contrast, offset=offset))
    resid = math.remainder(fit.center - ALPHA0, fit.period)
    assert abs(resid) < 1e-6


def test_centre_lies_in_first_period_of_window():
    fit = fit_fringe(noiseless(10e-3))
    assert fit.window[0] <= fit.center < fit.window[0] + fit.period
    c = fit.candidates()
    assert np.all((c >= fit.window[0]) & (c <= fit.window[1]))
    assert np.allclose(np.diff(c), fit.period)


def test_zero_contrast_does_not_converge():
    scan = simulate_scan(CFG, seq_for(10e-3), G_TRUE, grid(10e-3), atoms=50_000, contrast=0.0, seed=1)
    with pytest.raises(FringeFitError):
        fit_fringe(scan)
    with pytest.raises(FringeFitError):
        fit_fringe(noiseless(10e-3, contrast=0.0))


def test_too_few_points():
    with pytest.raises(FringeFitError):
        fit_fringe(noiseless(10e-3, points=3))


def test_qpn_covariance_matches_replication_spread():
    T = 10e-3
    centres, reported = [], []
    for seed in range(200):
        scan = simulate_scan(CFG, seq_for(T), G_TRUE, grid(T), atoms=50_000, contrast=0.5, shots_per_point=5, seed=seed)
        fit = fit_fringe(scan)
        centres.append(math.remainder(fit.center - ALPHA0, fit.period))
        reported.append(fit.center_stderr)
    ratio = np.std(centres, ddof=1) / np.median(reported)
    assert 1 / 1.5 < ratio < 1.5


def test_qpn_scaling_with_atom_number():
    shots = 200
    alphas = grid(10e-3, points=20)
    p = 0.5 * (1 + 0.5 * np.cos(2 * math.pi * 1e-4 * (ALPHA0 - alphas)))
    for atoms in (5_000, 10_000, 40_000):
        scan = simulate_scan(CFG, seq_for(10e-3), G_TRUE, alphas, atoms=atoms, contrast=0.5, shots_per_point=shots, seed=atoms)
        measured = scan.stderr * math.sqrt(shots * atoms)
        assert np.mean(measured) == pytest.approx(np.mean(np.sqrt(p * (1 - p))), rel=0.10)


def test_simulation_is_seeded():
    kw = dict(atoms=1000, contrast=0.5, shots_per_point=3)
    a = simulate_scan(CFG, seq_for(7e-3), G_TRUE, grid(7e-3), seed=5, **kw)
    b = simulate_scan(CFG, seq_for(7e-3), G_TRUE, grid(7e-3), seed=5, **kw)
    c = simulate_scan(CFG, seq_for(7e-3), G_TRUE, grid(7e-3), seed=6, **kw)
    assert np.array_equal(a.populations, b.populations)
    assert not np.array_equal(a.populations, c.populations)


def test_phase_kicks_wash_out_contrast():
    scan = simulate_scan(CFG, seq_for(10e-3), G_TRUE, grid(10e-3), atoms=None, contrast=0.5, shots_per_point=400, phase_noise=1.0, seed=2)
    fit = fit_fringe(scan)
    assert fit.contrast == pytest.approx(0.5 * math.exp(-0.5), rel=0.1)


def test_detection_noise_widens_errors():
    kw = dict(atoms=50_000, contrast=0.5, shots_per_point=10, seed=3)
    quiet = simulate_scan(CFG, seq_for(10e-3), G_TRUE, grid(10e-3), **kw)
    noisy = simulate_scan(CFG, seq_for(10e-3), G_TRUE, grid(10e-3), detection_noise=0.02, **kw)
    assert np.mean(noisy.stderr) > 3 * np.mean(quiet.stderr)


def test_phase_scan_mode():
    phis = np.linspace(-math.pi, 3 * math.pi, 41)
    scan = simulate_scan(CFG, seq_for(10e-3), G_TRUE, phis, atoms=None, contrast=0.5, mode=PHASE)
    fit = fit_fringe(scan)
    assert fit.period == pytest.approx(2 * math.pi)
    assert math.remainder(fit.center, 2 * math.pi) == pytest.approx(0.0, abs=1e-9)


def test_scan_validation():
    seq = seq_for(10e-3)
    with pytest.raises(ValueError):
        FringeScan(seq, 1, np.array([1.0, 1.0]), np.array([0.5, 0.5]), np.zeros(2), 1, None, None)
    with pytest.raises(ValueError):
        FringeScan(seq, 1, np.array([1.0, 2.0]), np.array([0.5, 1.5]), np.zeros(2), 1, None, None)
    with pytest.raises(ValueError):
        simulate_scan(CFG, seq, G_TRUE, grid(10e-3), contrast=1.2)


def test_noiseless_extraction_three_times():
    fits = [fit_fringe(noiseless(T)) for T in (3.4e-3, 7e-3, 10e-3)]
    est = extract_g(CFG, fits)
    assert est.g == pytest.approx(G_TRUE, rel=1e-9)
    assert est.report["interrogation_times_s"] == [3.4e-3, 7e-3, 10e-3]


def test_commensurate_periods_are_ambiguous():
    # periods 1e4 and 2e4 Hz/s share every second candidate
    T1 = 10e-3
    T2 = T1 / math.sqrt(2)
    fits = [fit_fringe(noiseless(T, periods=p, points=80)) for T, p in ((T1, 4.0), (T2, 2.0))]
    with pytest.raises(AmbiguityError) as info:
        extract_g(CFG, fits)
    assert len(info.value.candidates) >= 2


def test_single_time_is_rejected():
    fit = fit_fringe(noiseless(10e-3))
    with pytest.raises(ValueError, match="2 distinct"):
        extract_g(CFG, [fit, fit])


def test_disjoint_windows():
    a = fit_fringe(noiseless(10e-3))
    b = fit_fringe(noiseless(7e-3, offset=2e5))
    with pytest.raises(AmbiguityError, match="overlap"):
        extract_g(CFG, [a, b])


def test_fit_dict_round_trip():
    fit = fit_fringe(noiseless(10e-3))
    back = FringeFit.from_dict(fit.to_dict())
    assert back.center == fit.center and np.array_equal(back.covariance, fit.covariance)
    assert fit.covariance.shape == (4, 4) and not np.any(fit.covariance[3])


def test_scan_csv_round_trip(tmp_path):
    scan = simulate_scan(CFG, seq_for(10e-3), G_TRUE, grid(10e-3), atoms=50_000, seed=1)
    write_scan_csv(scan, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "alpha_hz_per_s,population,stderr"
    back = read_scan_csv(tmp_path / "s.csv", seq_for(10e-3))
    assert np.array_equal(back.alphas, scan.alphas) and np.array_equal(back.populations, scan.populations)
    assert fit_fringe(back).center == pytest.approx(fit_fringe(scan).center, rel=1e-12)
