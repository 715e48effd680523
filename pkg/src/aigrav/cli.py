"""Command-line interface.

Exit codes: 0 success, 2 invalid input, 3 numerical or convergence failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import pipeline
from .fringe import AmbiguityError, FringeFit, FringeFitError, extract_g, fit_fringe, read_scan_csv, write_scan_csv
from .noise import read_series, synth_beat, write_series
from .physics import RB87, AtomSpecies, BraggConfig, PulseSequence, from_microgal, to_microgal
from .plotting import Trace, decimate_for_plot, emit_plot, format_title
from .scenario import Scenario, ScenarioError, load_scenario
from .sensitivity import characteristic_frequencies, transfer_grid
from .spectral import (
    RAD2_PER_HZ,
    demodulate,
    SIGNAL2_PER_HZ,
    estimate_psd,
    integrated_phase_noise,
    psd_to_dbm,
    read_psd_csv,
    write_psd_csv,
)
from .stability import (
    ShotSeries,
    StabilityError,
    allan_deviation,
    qpn_limit,
    read_shots_csv,
    sensitivity_at_tau,
    write_allan_csv,
    write_shots_csv,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERIC = 3
OUT_ENV = "AIGRAV_OUT_DIR"


class CliError(Exception):
    def __init__(self, message, code=EXIT_INVALID):
        super().__init__(message)
        self.code = code


class Context:
    def __init__(self, args):
        self.args = args
        out = args.out or os.environ.get(OUT_ENV) or "."
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def path(self, command: str, name: str, suffix: str) -> Path:
        return self.out / f"{command}-{name}{suffix}"

    def say(self, msg: str) -> None:
        if not self.args.quiet:
            print(msg)

    def json(self, path: Path, data: dict) -> None:
        path.write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self.written.append(path)

    def plot(self, path: Path, traces, **kw) -> None:
        if self.args.no_svg:
            return
        emit_plot(traces, path, timestamp=not self.args.no_timestamp, **kw)
        self.written.append(path)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _scenario(ctx: Context, required=False) -> Scenario | None:
    ref = ctx.args.scenario
    if ref is None:
        if required:
            raise CliError("--scenario is required for this command")
        return None
    sc = load_scenario(ref)
    if ctx.args.seed is not None:
        sc = sc.with_seed(ctx.args.seed)
    return sc


def _sequence_from_args(args, sc: Scenario | None) -> PulseSequence:
    base = sc.sequence if sc else PulseSequence.from_pulse_duration(50e-6, 10e-3)
    tau = args.tau_r if getattr(args, "tau_r", None) is not None else base.beamsplitter_duration
    T = args.t if getattr(args, "t", None) is not None else base.interrogation
    rabi = getattr(args, "rabi", None)
    if rabi is None:
        # keep the scenario Rabi frequency unless the pulse length changed
        if getattr(args, "tau_r", None) is None:
            return PulseSequence(base.rabi, tau, T, base.cycle_time)
        return PulseSequence.from_pulse_duration(tau, T, base.cycle_time)
    return PulseSequence(rabi, tau, T, base.cycle_time)


def _name(sc: Scenario | None, fallback: str) -> str:
    return sc.name if sc else fallback


# --- commands --------------------------------------------------------------


def cmd_transfer(ctx: Context) -> dict:
    a = ctx.args
    sc = _scenario(ctx)
    seq = _sequence_from_args(a, sc)
    name = _name(sc, a.name)
    grid = transfer_grid(seq, a.f_min, a.f_max, a.points, log=not a.linear)
    feats = characteristic_frequencies(seq, a.band)
    csv_path = ctx.path("transfer", name, ".csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("f_hz,weight\n")
        for f, w in zip(grid.frequencies, grid.weights):
            fh.write(f"{float(f)!r},{float(w)!r}\n")
    ctx.written.append(csv_path)
    meta = {
        "rabi_rad_s": seq.rabi,
        "tau_r_s": seq.beamsplitter_duration,
        "t_s": seq.interrogation,
        "nominal_pulse": seq.nominal,
        "zeros_hz": feats["zeros"],
        "cutoff_hz": feats["cutoff"],
        "band_hz": a.band,
    }
    ctx.json(ctx.path("transfer", name, ".json"), meta)
    x, y = decimate_for_plot(grid.frequencies, grid.weights, log=not a.linear)
    ctx.plot(
        ctx.path("transfer", name, ".svg"),
        Trace(x, y, "|H(2 pi f)|^2"),
        style="loglog",
        xlabel="frequency (Hz)",
        ylabel="weighting |H|^2 (dimensionless)",
        title=format_title("Phase-noise transfer function", name, None),
        markers=[(feats["cutoff"], "cutoff")],
    )
    ctx.say(f"cutoff {feats['cutoff']:.2f} Hz; first zero {feats['zeros'][0]:.4f} Hz" if feats["zeros"] else
            f"cutoff {feats['cutoff']:.2f} Hz")
    return meta


def cmd_synth(ctx: Context) -> dict:
    sc = _scenario(ctx, required=True)
    beat = synth_beat(sc.beat, sc.noise)
    suffix = ".bin" if ctx.args.format == "bin" else ".csv"
    path = ctx.path("synth", sc.name, suffix)
    write_series(beat, path)
    ctx.written.append(path)
    n = min(len(beat), int(round(5 * beat.fs / sc.beat.carrier)))
    ctx.plot(
        ctx.path("synth", sc.name, ".svg"),
        Trace(1e3 * beat.times[:n], beat.samples[:n], "S(t)"),
        xlabel="time (ms)",
        ylabel="detector signal (V)",
        title=format_title("Synthetic beat note", sc.name, sc.seed),
    )
    ctx.say(f"wrote {len(beat)} samples at {beat.fs:g} Hz to {path}")
    return {"samples": len(beat), "fs_hz": beat.fs, "path": str(path)}


def cmd_psd(ctx: Context) -> dict:
    a = ctx.args
    series = read_series(a.input)
    name = a.name or Path(a.input).stem
    if a.demodulate is not None:
        series = demodulate(series, a.demodulate, a.lp_cutoff).settled().phase
        unit = RAD2_PER_HZ
    else:
        unit = SIGNAL2_PER_HZ if a.unit == "signal" else RAD2_PER_HZ
    psd = estimate_psd(series, a.rbw, unit)
    ylabel = f"PSD ({unit})"
    if a.dbm:
        psd = psd_to_dbm(psd, a.impedance)
        ylabel = f"power per {psd.rbw:.4g} Hz RBW (dBm, {a.impedance:g} ohm)"
    path = ctx.path("psd", name, ".csv")
    write_psd_csv(psd, path)
    ctx.written.append(path)
    x, y = psd.frequencies[1:], psd.values[1:]
    if a.dbm:
        x, y = decimate_for_plot(x, y)
        style = "line"
    else:
        x, y = decimate_for_plot(x, y, log=True)
        style = "loglog"
    ctx.plot(
        ctx.path("psd", name, ".svg"),
        Trace(x, y, ""),
        style=style,
        xlabel="frequency (Hz)",
        ylabel=ylabel,
        title=format_title("Power spectral density", name, None),
        note=f"RBW {psd.rbw:.4g} Hz, Hann, {psd.segments} segment(s)",
    )
    ctx.say(f"PSD with RBW {psd.rbw:.4g} Hz over {psd.segments} segment(s) -> {path}")
    return {"rbw_hz": psd.rbw, "segments": psd.segments, "unit": psd.unit}


def cmd_integrate(ctx: Context) -> dict:
    a = ctx.args
    sc = _scenario(ctx)
    seq = _sequence_from_args(a, sc)
    psd = read_psd_csv(a.psd)
    f_lo = a.f_lo if a.f_lo is not None else float(psd.frequencies[psd.frequencies > 0][0])
    sigma = integrated_phase_noise(psd, seq, f_lo, a.f_hi)
    name = a.name or Path(a.psd).stem
    out = {"sigma_rad": sigma, "sigma_mrad": 1e3 * sigma, "f_lo_hz": f_lo, "f_hi_hz": a.f_hi, "t_s": seq.interrogation}
    ctx.json(ctx.path("integrate-noise", name, ".json"), out)
    ctx.say(f"phase noise per shot: {1e3 * sigma:.3f} mrad ({f_lo:g} to {a.f_hi:g} Hz)")
    return out


def cmd_fringe(ctx: Context) -> dict:
    sc = _scenario(ctx, required=True)
    runs = pipeline.run_fringes(sc)
    xlabel = "chirp rate (Hz/s)" if sc.fringe.mode == "sweep" else "final-pulse phase (rad)"
    traces, fits = [], []
    for r in runs:
        tag = f"{sc.name}-T{1e3 * r.interrogation:g}ms"
        write_scan_csv(r.scan, ctx.path("fringe", tag, ".csv"))
        ctx.written.append(ctx.path("fringe", tag, ".csv"))
        ctx.json(ctx.path("fringe", tag, "-fit.json"), r.fit.to_dict())
        fits.append(r.fit.to_dict())
        traces.append(Trace(r.scan.alphas, r.scan.populations, f"T = {1e3 * r.interrogation:g} ms", "o-"))
        ctx.say(
            f"T = {1e3 * r.interrogation:g} ms: centre {r.fit.center:.3f} +/- {r.fit.center_stderr:.3f}, "
            f"contrast {r.fit.contrast:.3f}"
        )
    ctx.plot(
        ctx.path("fringe", sc.name, ".svg"),
        traces,
        xlabel=xlabel,
        ylabel="first-order population",
        title=format_title(f"Fringe scan, contrast {sc.fringe.contrast:g}", sc.name, sc.seed),
    )
    result = {"fits": fits}
    if len({round(r.interrogation, 12) for r in runs}) >= 2 and sc.fringe.mode == "sweep":
        est = pipeline.run_extraction(sc, runs)
        ctx.json(ctx.path("extract-g", sc.name, ".json"), est.report)
        ctx.say(f"g = {est.g:.9f} +/- {est.g_stderr:.2e} m/s^2")
        result["g"] = est.report
    return result


def cmd_fit(ctx: Context) -> dict:
    a = ctx.args
    seq = _sequence_from_args(a, _scenario(ctx))
    scan = read_scan_csv(a.input, seq, a.order)
    fit = fit_fringe(scan)
    name = a.name or Path(a.input).stem
    ctx.json(ctx.path("fit", name, ".json"), fit.to_dict())
    ctx.say(f"centre {fit.center!r} +/- {fit.center_stderr:.4g}, contrast {fit.contrast:.4f}")
    return fit.to_dict()


def cmd_extract(ctx: Context) -> dict:
    a = ctx.args
    sc = _scenario(ctx)
    cfg = sc.bragg if sc else BraggConfig(RB87, a.order)
    fits = []
    for p in a.fits:
        try:
            fits.append(FringeFit.from_dict(json.loads(Path(p).read_text(encoding="utf-8"))))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise CliError(f"{p}: not a fit file ({exc})") from None
    est = extract_g(cfg, fits)
    ctx.json(ctx.path("extract-g", _name(sc, a.name), ".json"), est.report)
    ctx.say(f"g = {est.g:.9f} +/- {est.g_stderr:.2e} m/s^2")
    return est.report


def cmd_allan(ctx: Context) -> dict:
    """Shot values are m/s^2 on disk; ``--unit`` selects the reporting unit."""
    a = ctx.args
    sc = _scenario(ctx)
    if a.input:
        if a.cycle_time is None:
            raise CliError("--cycle-time is required with --input")
        values = read_shots_csv(a.input)
        series = ShotSeries(values, a.cycle_time)
        name, seed, tau_ref = a.name or Path(a.input).stem, None, a.tau_ref
        overlapping = a.overlapping
    elif sc is not None:
        shots_ugal, _ = pipeline.run_allan(sc)
        values = from_microgal(shots_ugal)
        write_shots_csv(values, ctx.path("allan", sc.name, "-shots.csv"))
        ctx.written.append(ctx.path("allan", sc.name, "-shots.csv"))
        series = ShotSeries(values, sc.stability.cycle_time)
        name, seed = sc.name, sc.seed
        tau_ref = a.tau_ref if a.tau_ref is not None else sc.stability.tau_ref
        overlapping = a.overlapping or sc.stability.overlapping
    else:
        raise CliError("give --input or --scenario")
    tau_ref = 200.0 if tau_ref is None else tau_ref
    scale, unit = (1e8, "uGal") if a.unit == "ugal" else (1.0, "m/s^2")
    res = allan_deviation(series, overlapping=overlapping).scaled(scale)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = sensitivity_at_tau(res, tau_ref)
    write_allan_csv(res, ctx.path("allan", name, ".csv"))
    ctx.written.append(ctx.path("allan", name, ".csv"))
    out = report.to_dict()
    out["unit"] = unit
    out["overlapping"] = overlapping
    out["warnings"] = [str(w.message) for w in caught]
    ctx.json(ctx.path("allan", name, ".json"), out)
    fitted = report.amplitude * res.taus**-0.5
    ctx.plot(
        ctx.path("allan", name, ".svg"),
        [Trace(res.taus, res.adev, "Allan deviation", "o"), Trace(res.taus, fitted, "tau^-1/2 fit", "--")],
        style="loglog",
        xlabel="averaging time tau (s)",
        ylabel=f"Allan deviation ({unit})",
        title=format_title("Gravity stability", name, seed),
    )
    ctx.say(f"sensitivity {report.amplitude:.4g} {unit} at 1 s (slope {report.slope:.3f})")
    ctx.say(f"white-noise extrapolation to {tau_ref:g} s: {report.at_tau:.4g} {unit}")
    for w in out["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    return out


def cmd_limit(ctx: Context) -> dict:
    a = ctx.args
    species = AtomSpecies(RB87.mass, a.wavelength, RB87.label) if a.wavelength else RB87
    k_eff = BraggConfig(species, a.order).k_eff
    dg = qpn_limit(a.contrast, a.atoms, a.g, k_eff, a.t)
    ctx.say(f"projection-noise limit dg/g = {dg:.4g} per shot ({to_microgal(dg * a.g):.4g} uGal)")
    return {"dg_over_g": dg, "dg_ugal": to_microgal(dg * a.g)}


def cmd_demo(ctx: Context) -> dict:
    sc = _scenario(ctx, required=True)
    run = pipeline.run_noise(sc)
    summary = run.summary()
    summary["scenario"] = sc.name
    summary["seed"] = sc.seed
    ctx.say(f"{sc.name}: phase noise {summary['sigma_mrad']:.2f} mrad per shot "
            f"(expected {1e3 * run.expected:.2f} mrad)")
    ref_name = sc.analysis.compare_to
    if ref_name:
        ref = load_scenario(ref_name)
        if ctx.args.seed is not None:
            ref = ref.with_seed(ctx.args.seed)
        ref_run = pipeline.run_noise(ref)
        ratio = run.sigma / ref_run.sigma
        summary["reference"] = {"scenario": ref.name, "sigma_mrad": 1e3 * ref_run.sigma}
        summary["ratio"] = ratio
        ctx.say(f"{ref.name}: phase noise {1e3 * ref_run.sigma:.2f} mrad per shot")
        ctx.say(f"ratio {sc.name} / {ref.name} = {ratio:.3f}")
    ctx.json(ctx.path("demo", sc.name, ".json"), summary)

    a = sc.analysis
    plot_psd = estimate_psd(run.demod.phase, a.plot_rbw)
    write_psd_csv(plot_psd, ctx.path("demo", sc.name, "-phase-psd.csv"))
    ctx.written.append(ctx.path("demo", sc.name, "-phase-psd.csv"))
    dbm = psd_to_dbm(pipeline.beat_psd(run.beat, a.beat_rbw), a.impedance)
    write_psd_csv(dbm, ctx.path("demo", sc.name, "-beat-dbm.csv"))
    ctx.written.append(ctx.path("demo", sc.name, "-beat-dbm.csv"))
    if not ctx.args.no_svg:
        x, y = decimate_for_plot(plot_psd.frequencies[1:], plot_psd.values[1:], log=True)
        ctx.plot(
            ctx.path("demo", sc.name, "-phase-psd.svg"),
            Trace(x, y, "demodulated phase"),
            style="loglog",
            xlabel="offset frequency (Hz)",
            ylabel="phase PSD (rad^2/Hz)",
            title=format_title("Phase-noise spectrum", sc.name, sc.seed),
            note=f"RBW {plot_psd.rbw:.4g} Hz",
        )
        band = (dbm.frequencies > 0) & (dbm.frequencies <= 2 * sc.beat.carrier)
        ctx.plot(
            ctx.path("demo", sc.name, "-beat-dbm.svg"),
            Trace(dbm.frequencies[band] / 1e3, dbm.values[band], "beat note"),
            xlabel="frequency (kHz)",
            ylabel=f"power (dBm per {dbm.rbw:.4g} Hz, {a.impedance:g} ohm)",
            title=format_title("Beat-note spectrum", sc.name, sc.seed),
        )
    return summary


# --- parser ----------------------------------------------------------------


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="bundled scenario name or path to a scenario JSON file")
    common.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or the working directory)")
    common.add_argument("--seed", type=_seed, help="override the scenario seed")
    common.add_argument("--no-svg", action="store_true", help="skip figure output")
    common.add_argument("--no-timestamp", action="store_true", help="omit the creation date from SVG files")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    seq = argparse.ArgumentParser(add_help=False)
    seq.add_argument("--t", type=_positive, help="interrogation time T (s)")
    seq.add_argument("--tau-r", type=_positive, help="beam-splitter pulse duration (s)")
    seq.add_argument("--rabi", type=_positive, help="effective Rabi frequency (rad/s)")

    p = argparse.ArgumentParser(prog="aigrav", description="Atom-interferometric gravimeter noise and stability toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("transfer", parents=[common, seq], help="tabulate the phase-noise weighting")
    s.add_argument("--f-min", type=_positive, default=1.0)
    s.add_argument("--f-max", type=_positive, default=1e5)
    s.add_argument("--points", type=int, default=20001)
    s.add_argument("--linear", action="store_true", help="linear instead of logarithmic grid")
    s.add_argument("--band", type=_positive, default=1e3, help="list weighting zeros up to this frequency (Hz)")
    s.add_argument("--name", default="custom")
    s.set_defaults(func=cmd_transfer)

    s = sub.add_parser("synth", parents=[common], help="synthesise a beat-note record")
    s.add_argument("--format", choices=("csv", "bin"), default="bin")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("psd", parents=[common], help="Welch PSD of a recorded series")
    s.add_argument("--input", required=True)
    s.add_argument("--rbw", type=_positive, default=500.0, help="resolution bandwidth (Hz)")
    s.add_argument("--unit", choices=("phase", "signal"), default="signal")
    s.add_argument("--demodulate", type=_positive, metavar="CARRIER_HZ", help="demodulate first and take the phase PSD")
    s.add_argument("--lp-cutoff", type=_positive)
    s.add_argument("--dbm", action="store_true", help="report power per RBW in dBm")
    s.add_argument("--impedance", type=_positive, default=50.0)
    s.add_argument("--name")
    s.set_defaults(func=cmd_psd)

    s = sub.add_parser("integrate-noise", parents=[common, seq], help="weighted phase noise per shot from a phase PSD")
    s.add_argument("--psd", required=True)
    s.add_argument("--f-lo", type=float)
    s.add_argument("--f-hi", type=_positive, default=10e3)
    s.add_argument("--name")
    s.set_defaults(func=cmd_integrate)

    s = sub.add_parser("fringe", parents=[common], help="simulate and fit fringe scans")
    s.set_defaults(func=cmd_fringe)

    s = sub.add_parser("fit", parents=[common, seq], help="fit a fringe scan CSV")
    s.add_argument("--input", required=True)
    s.add_argument("--order", type=int, default=1)
    s.add_argument("--name")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("extract-g", parents=[common], help="common-minimum gravity from several fits")
    s.add_argument("fits", nargs="+", help="fit JSON files")
    s.add_argument("--order", type=int, default=1)
    s.add_argument("--name", default="custom")
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("allan", parents=[common], help="Allan deviation and sensitivity")
    s.add_argument("--input", help="shot CSV (shot_index,value)")
    s.add_argument("--cycle-time", type=_positive)
    s.add_argument("--overlapping", action="store_true")
    s.add_argument("--tau-ref", type=_positive)
    s.add_argument("--unit", choices=("ugal", "ms2"), default="ugal")
    s.add_argument("--name")
    s.set_defaults(func=cmd_allan)

    s = sub.add_parser("limit", parents=[common], help="projection-noise limited sensitivity")
    s.add_argument("--contrast", type=_positive, required=True)
    s.add_argument("--atoms", type=_positive, required=True)
    s.add_argument("--t", type=_positive, required=True)
    s.add_argument("--g", type=_positive, default=9.7833)
    s.add_argument("--order", type=int, default=1)
    s.add_argument("--wavelength", type=_positive)
    s.set_defaults(func=cmd_limit)

    s = sub.add_parser("demo", parents=[common], help="end-to-end phase-noise budget for a scenario")
    s.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        ctx = Context(args)
        args.func(ctx)
    except ScenarioError as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (FringeFitError, AmbiguityError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        if isinstance(exc, AmbiguityError) and exc.candidates:
            print(f"candidates: {exc.candidates}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError, StabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
