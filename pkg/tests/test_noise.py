import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aigrav.noise import (
    MIN_SAMPLES,
    Band,
    BeatConfig,
    NoiseSpec,
    NoiseSpecError,
    TimeSeries,
    Tone,
    band_limited_noise,
    generate_phase_noise,
    read_series,
    read_series_binary,
    read_series_csv,
    synth_beat,
    write_series,
    write_series_binary,
    write_series_csv,
)
from oracles import parseval_band_variance


def test_empty_spec_gives_zero_phase():
    assert not np.any(generate_phase_noise(NoiseSpec(), 1e5, 0.1).samples)


def test_single_tone_rms():
    ph = generate_phase_noise(NoiseSpec(tones=[(800.0, 0.010)], seed=1), 1e6, 1.0)
    assert np.sqrt(np.mean(ph.samples**2)) == pytest.approx(0.010, rel=0.02)


def test_shaped_band_variance_mean_over_seeds():
    target = parseval_band_variance(1e-9, 100.0, 10e3)
    spec = NoiseSpec(shaped_bands=[(100.0, 10e3, 1e-9)])
    var = [np.var(generate_phase_noise(NoiseSpec(shaped_bands=spec.shaped_bands, seed=s), 1e5, 1.0).samples) for s in range(20)]
    assert np.mean(var) == pytest.approx(target, rel=0.05)


def test_shaped_band_variance_spread_across_seeds():
    target = parseval_band_variance(2e-9, 500.0, 5e3)
    var = np.array(
        [np.var(generate_phase_noise(NoiseSpec(shaped_bands=[(500.0, 5e3, 2e-9)], seed=s), 5e4, 0.5).samples) for s in range(50)]
    )
    spread = var.std(ddof=1)
    assert abs(var.mean() - target) < 3 * spread / math.sqrt(var.size) + 1e-3 * target


def test_band_noise_has_no_power_outside_band():
    rng = np.random.default_rng(0)
    x = band_limited_noise(rng, 100_000, 1e5, 1e3, 2e3, 1e-8)
    spec = np.abs(np.fft.rfft(x)) ** 2
    f = np.fft.rfftfreq(x.size, 1e-5)
    outside = (f < 1e3) | (f > 2e3)
    assert spec[outside].max() < 1e-20 * spec.max()


def test_determinism_bitwise():
    spec = NoiseSpec(tones=[(300.0, 1e-3)], shaped_bands=[(10.0, 1e3, 1e-10)], additive_rms=1e-3, multiplicative_rms=1e-3, seed=42)
    cfg = BeatConfig(duration=0.01)
    a, b = synth_beat(cfg, spec), synth_beat(cfg, spec)
    assert a.samples.tobytes() == b.samples.tobytes()
    c = synth_beat(cfg, NoiseSpec(**{**spec.__dict__, "seed": 43}))
    assert not np.array_equal(a.samples, c.samples)


def test_noiseless_beat_mean_equals_amplitude():
    s = synth_beat(BeatConfig(amplitude=2.0, contrast=1.0, carrier=15e3, duration=0.1), NoiseSpec())
    assert np.mean(s.samples) == pytest.approx(2.0, rel=1e-3)
    assert s.samples.max() == pytest.approx(4.0, rel=1e-6)


def test_zero_contrast_is_constant_plus_noise():
    s = synth_beat(BeatConfig(contrast=0.0, duration=0.01), NoiseSpec(additive_rms=1e-3, seed=2))
    assert np.std(s.samples) == pytest.approx(1e-3, rel=0.05)


def test_acquisition_sample_count():
    assert BeatConfig(fs=2.5e9, duration=2e-3, carrier=15e3).n_samples == 5_000_000
    assert BeatConfig().n_samples == 100_000


def test_phase_record_reuse_matches_internal_generation():
    spec = NoiseSpec(tones=[(500.0, 0.01)], seed=3)
    cfg = BeatConfig(duration=0.01)
    ph = generate_phase_noise(spec, cfg.fs, cfg.duration)
    assert np.array_equal(synth_beat(cfg, spec, ph).samples, synth_beat(cfg, spec).samples)
    with pytest.raises(NoiseSpecError):
        synth_beat(cfg, spec, TimeSeries(cfg.fs, np.zeros(100)))


def test_nyquist_checks():
    with pytest.raises(NoiseSpecError, match="tones\\[0\\]"):
        generate_phase_noise(NoiseSpec(tones=[(6e3, 1e-3)]), 1e4, 0.1)
    with pytest.raises(NoiseSpecError, match="shaped_bands\\[0\\]"):
        generate_phase_noise(NoiseSpec(shaped_bands=[(10.0, 6e3, 1e-9)]), 1e4, 0.1)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"tones": [(-1.0, 1e-3)]},
        {"tones": [(10.0, -1e-3)]},
        {"shaped_bands": [(100.0, 50.0, 1e-9)]},
        {"shaped_bands": [(10.0, 50.0, -1.0)]},
        {"additive_rms": -1.0},
        {"seed": -1},
    ],
)
def test_invalid_noise_specs(kwargs):
    with pytest.raises(NoiseSpecError):
        NoiseSpec(**kwargs)


@pytest.mark.parametrize(
    "kwargs",
    [{"contrast": 1.5}, {"carrier": 6e5}, {"fs": 0.0}, {"fs": 1e6, "duration": 1.5e-6 + 1e-9}],
)
def test_invalid_beat_configs(kwargs):
    with pytest.raises(NoiseSpecError):
        BeatConfig(**kwargs)


def test_scaled_spec():
    spec = NoiseSpec(tones=[Tone(10.0, 1.0)], shaped_bands=[Band(1.0, 2.0, 4.0)], additive_rms=0.5)
    s = spec.scaled(2.0)
    assert s.tones[0].rms == 2.0 and s.shaped_bands[0].psd == 16.0 and s.additive_rms == 0.5


def test_time_series_validation_and_slicing():
    with pytest.raises(ValueError):
        TimeSeries(1e3, np.zeros(0))
    with pytest.raises(NoiseSpecError):
        generate_phase_noise(NoiseSpec(), 1e3, (MIN_SAMPLES - 1) / 1e3)
    ts = TimeSeries(1e3, np.arange(100.0), t0=1.0)
    part = ts.slice(10, 20)
    assert len(part) == 10 and part.t0 == pytest.approx(1.01)
    assert ts.duration == pytest.approx(0.1)


@settings(max_examples=25, deadline=None)
@given(st.integers(MIN_SAMPLES, 400), st.floats(1.0, 1e7), st.floats(-10.0, 10.0))
def test_binary_round_trip(tmp_path_factory, n, fs, t0):
    path = tmp_path_factory.mktemp("bin") / "s.bin"
    ts = TimeSeries(fs, np.random.default_rng(n).standard_normal(n), t0)
    write_series_binary(ts, path)
    back = read_series_binary(path)
    assert back.fs == fs and back.t0 == t0 and np.array_equal(back.samples, ts.samples)
    assert path.stat().st_size == 32 + 8 * n


def test_csv_round_trip(tmp_path):
    ts = TimeSeries(1e4, np.random.default_rng(0).standard_normal(64), 0.5)
    write_series_csv(ts, tmp_path / "s.csv")
    back = read_series_csv(tmp_path / "s.csv")
    assert back.fs == pytest.approx(1e4, rel=1e-9)
    assert np.array_equal(back.samples, ts.samples)


def test_format_detection(tmp_path):
    ts = TimeSeries(1e3, np.ones(32))
    write_series(ts, tmp_path / "a.bin")
    write_series(ts, tmp_path / "a.csv")
    assert (tmp_path / "a.bin").read_bytes()[:7] == b"AIGRVTS"
    assert np.array_equal(read_series(tmp_path / "a.bin").samples, read_series(tmp_path / "a.csv").samples)


def test_corrupt_binary(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"NOTMAGIC" + bytes(40))
    with pytest.raises(ValueError):
        read_series_binary(p)
    ts = TimeSeries(1e3, np.ones(32))
    write_series_binary(ts, p)
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(ValueError, match="announces"):
        read_series_binary(p)


def test_non_uniform_csv_rejected(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("t_s,value\n0,1\n0.1,1\n0.3,1\n")
    with pytest.raises(ValueError, match="uniformly"):
        read_series_csv(p)
