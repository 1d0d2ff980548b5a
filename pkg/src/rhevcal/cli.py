"""Command-line front end: one subcommand per experiment, CSV artifacts out.

CSVs are the source of truth and are byte-identical across runs with the same
config and seed; SVG output is an optional thin plotting layer on top.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments
from .array_model import (
    amplitude_to_db,
    preset_array,
    schedule_single_channel,
    schedule_two_channel,
    with_state_errors,
    wrap_phase,
)
from .config import RunConfig, load_config
from .errors import ConfigFileError, RhevcalError
from .experiments import Scenario
from .rhev import calibrate_full, sweep_delay, two_channel_power
from .signal_engine import add_noise, synthesize_received


def _fmt(value) -> str:
    """Stable scalar formatting: shortest round-trip repr for floats."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _write_svg(path: Path, x, series: dict, xlabel: str, ylabel: str, title: str):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, y in series.items():
        ax.plot(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.4)
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def _scenario_from_config(cfg: RunConfig, seed: int) -> Scenario:
    return Scenario(
        element_count=cfg.get("array", "elements"),
        amp_spread_db=cfg.get("array", "amp_spread_db"),
        phase_spread_deg=cfg.get("array", "phase_spread_deg"),
        spacing=cfg.get("array", "spacing_wavelengths"),
        carrier_frequency=cfg.get("source", "frequency_hz"),
        incident_angle_deg=cfg.get("source", "incident_angle_deg"),
        modulation_frequency=cfg.get("modulation", "frequency_hz"),
        n_be=cfg.get("modulation", "bits"),
        snr_db=cfg.get("noise", "snr_db"),
        sampling=cfg.sampling,
        method=cfg.get("run", "method"),
        trials=cfg.get("run", "trials"),
        base_seed=seed,
        error_mode=cfg.get("run", "error_mode"),
        error_deg=cfg.get("run", "error_deg"),
        rev_state_error_deg=cfg.get("run", "rev_state_error_deg"),
        phase_method=cfg.get("estimator", "phase_method"),
        amplitude_from=cfg.get("estimator", "amplitude_from"),
        ratio_method=cfg.get("estimator", "ratio_method"),
    )


def _preset_from_config(cfg: RunConfig, seed: int):
    """Preset array for the one-shot subcommands, error model applied."""
    aut = preset_array(
        cfg.get("array", "elements"),
        cfg.get("array", "amp_spread_db"),
        cfg.get("array", "phase_spread_deg"),
        seed,
    )
    aut = replace(aut, spacing=cfg.get("array", "spacing_wavelengths"))
    mode = cfg.get("run", "error_mode")
    if mode == "common":
        aut = with_state_errors(aut, 0.0, math.radians(cfg.get("run", "error_deg")))
    elif mode == "per_channel":
        rng = np.random.default_rng([seed, 3])
        mag = abs(math.radians(cfg.get("run", "error_deg")))
        aut = with_state_errors(aut, 0.0, rng.uniform(-mag, mag, aut.element_count))
    return aut


def _power_db(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(values)


# ---------------------------------------------------------------------------
# subcommand handlers (each returns a list of written artifact paths)
# ---------------------------------------------------------------------------


def _cmd_sweep_delay(cfg: RunConfig, seed: int, out: Path, formats: list[str]):
    scenario = _scenario_from_config(cfg, seed)
    aut = _preset_from_config(cfg, seed)
    source = scenario.source()
    sampling = cfg.sampling.resolve_bits(scenario.n_be)
    test_index = cfg.get("sweep_delay", "channel") - 1
    rng = np.random.default_rng(seed)
    measure = lambda eta: two_channel_power(
        aut, source, test_index, eta, scenario.snr_db, sampling, rng,
        modulation_frequency=scenario.modulation_frequency,
    )
    curve = sweep_delay(measure, scenario.n_be)
    rows = [
        (k, eta, 360.0 * eta, p, float(_power_db(np.array([p]))[0]))
        for k, (eta, p) in enumerate(zip(curve.delays, curve.powers))
    ]
    paths = [_write_csv(out / "sweep_delay.csv",
                        ["k", "eta", "phase_deg", "power_linear", "power_db"], rows)]
    if "svg" in formats:
        paths.append(_write_svg(
            out / "sweep_delay.svg", curve.delays,
            {"+1st harmonic power (dB)": _power_db(curve.powers)},
            "normalized delay", "power (dB)", "harmonic power vs modulation delay"))
    return paths


def _cmd_calibrate(cfg: RunConfig, seed: int, out: Path, formats: list[str]):
    scenario = _scenario_from_config(cfg, seed)
    aut = _preset_from_config(cfg, seed)
    source = scenario.source()
    result = calibrate_full(
        aut, source, scenario.n_be, scenario.snr_db, cfg.sampling, seed,
        phase_method=scenario.phase_method,
        amplitude_from=scenario.amplitude_from,
        ratio_method=scenario.ratio_method,
    )
    mask = np.arange(aut.element_count) != aut.reference_index
    true_gamma_db = amplitude_to_db(aut.amplitude_ratios()[mask])
    true_dphi_deg = np.rad2deg(aut.phase_differences()[mask])
    est_gamma_db = amplitude_to_db(result.amplitude_ratios())
    est_dphi_deg = np.rad2deg(result.phase_differences())
    err_dphi_deg = np.rad2deg(wrap_phase(np.deg2rad(est_dphi_deg - true_dphi_deg)))
    rows = []
    for i, est in enumerate(result.channels):
        rows.append((
            est.channel + 1,
            float(true_gamma_db[i]), float(est_gamma_db[i]),
            float(est_gamma_db[i] - true_gamma_db[i]),
            float(true_dphi_deg[i]), float(est_dphi_deg[i]), float(err_dphi_deg[i]),
            est.branch,
        ))
    header = ["channel", "preset_gamma_db", "est_gamma_db", "gamma_err_db",
              "preset_dphi_deg", "est_dphi_deg", "dphi_err_deg", "branch"]
    paths = [_write_csv(out / "calibrate.csv", header, rows)]
    if "svg" in formats:
        channels = [r[0] for r in rows]
        paths.append(_write_svg(
            out / "calibrate.svg", channels,
            {"amplitude error (dB)": [r[3] for r in rows],
             "phase error (deg)": [r[6] for r in rows]},
            "channel", "estimation error", "per-channel calibration errors"))
    return paths


def _cmd_monte_carlo(cfg: RunConfig, seed: int, out: Path, formats: list[str]):
    scenario = _scenario_from_config(cfg, seed)
    report = experiments.sweep_scenario(
        scenario, cfg.get("sweep", "axis"), cfg.get("sweep", "values"))
    rows = [
        (report.axis, p.axis_value, p.rmse_amplitude_ratio,
         math.degrees(p.rmse_phase_difference), p.trials, p.excluded)
        for p in report.points
    ]
    header = ["axis", "value", "rmse_ar", "rmse_pd_deg", "trials", "excluded"]
    paths = [_write_csv(out / "monte_carlo.csv", header, rows)]
    if "svg" in formats:
        xs = [p.axis_value for p in report.points]
        paths.append(_write_svg(
            out / "monte_carlo.svg", xs,
            {"amplitude-ratio RMSE": [p.rmse_amplitude_ratio for p in report.points],
             "phase RMSE (deg)": [math.degrees(p.rmse_phase_difference) for p in report.points]},
            report.axis, "RMSE", f"calibration RMSE vs {report.axis}"))
    return paths


def _cmd_compare_rev(cfg: RunConfig, seed: int, out: Path, formats: list[str]):
    scenario = _scenario_from_config(cfg, seed)
    values = cfg.get("sweep", "values")
    rhev_report = experiments.sweep_scenario(replace(scenario, method="rhev"), "snr", values)
    rev_report = experiments.sweep_scenario(replace(scenario, method="rev"), "snr", values)
    rows = [
        (a.axis_value, a.rmse_amplitude_ratio, math.degrees(a.rmse_phase_difference),
         b.rmse_amplitude_ratio, math.degrees(b.rmse_phase_difference), a.trials)
        for a, b in zip(rhev_report.points, rev_report.points)
    ]
    header = ["snr_db", "rhev_rmse_ar", "rhev_rmse_pd_deg",
              "rev_rmse_ar", "rev_rmse_pd_deg", "trials"]
    paths = [_write_csv(out / "compare_rev.csv", header, rows)]
    if "svg" in formats:
        xs = [r[0] for r in rows]
        paths.append(_write_svg(
            out / "compare_rev.svg", xs,
            {"harmonic method phase RMSE (deg)": [r[2] for r in rows],
             "rotation baseline phase RMSE (deg)": [r[4] for r in rows]},
            "SNR (dB)", "phase RMSE (deg)", "method comparison"))
    return paths


def _cmd_pattern(cfg: RunConfig, seed: int, out: Path, formats: list[str], quiet: bool):
    scenario = _scenario_from_config(cfg, seed)
    aut = _preset_from_config(cfg, seed)
    source = scenario.source()
    result = calibrate_full(
        aut, source, scenario.n_be, scenario.snr_db, cfg.sampling, seed,
        phase_method=scenario.phase_method,
        amplitude_from=scenario.amplitude_from,
        ratio_method=scenario.ratio_method,
    )
    weights = experiments.compensation_weights(
        result, cfg.get("pattern", "compensation_bits"))
    steer = math.radians(cfg.get("pattern", "steer_deg"))
    if steer:
        weights = weights * experiments.steering_phases(
            aut.element_count, aut.spacing, steer)
    angles = experiments.default_angle_grid(cfg.get("pattern", "angle_points"))
    report = experiments.array_factor(aut, weights, angles, command_angle=steer)
    rows = [
        (float(np.rad2deg(t)), float(b), float(a), float(i))
        for t, b, a, i in zip(report.angles, report.before_db,
                              report.after_db, report.ideal_db)
    ]
    header = ["theta_deg", "before_db", "after_db", "ideal_db"]
    paths = [_write_csv(out / "pattern.csv", header, rows)]
    if not quiet:
        sll = "n/a" if report.sidelobe_db is None else f"{report.sidelobe_db:.2f} dB"
        print(f"peak {math.degrees(report.peak_direction):.2f} deg, "
              f"gain delta {report.gain_delta_db:+.2f} dB, peak sidelobe {sll}")
    if "svg" in formats:
        deg = np.rad2deg(report.angles)
        paths.append(_write_svg(
            out / "pattern.svg", deg,
            {"before": report.before_db, "after": report.after_db,
             "ideal": report.ideal_db},
            "angle (deg)", "normalized power (dB)", "array power pattern"))
    return paths


def _cmd_spectrum(cfg: RunConfig, seed: int, out: Path, formats: list[str]):
    scenario = _scenario_from_config(cfg, seed)
    aut = _preset_from_config(cfg, seed)
    source = scenario.source()
    sampling = cfg.sampling.resolve_bits(scenario.n_be)
    channel = cfg.get("spectrum", "channel") - 1
    eta = cfg.get("spectrum", "eta")
    if cfg.get("spectrum", "mode") == "two_channel":
        schedule = schedule_two_channel(aut, scenario.modulation_frequency, channel, eta)
    else:
        schedule = schedule_single_channel(aut, scenario.modulation_frequency, channel)
    stream = synthesize_received(aut, source, schedule, sampling)
    stream = add_noise(stream, scenario.snr_db, seed,
                       reference_power=source.power * aut.reference.amplitude**2)
    n = len(stream.samples)
    bins = np.fft.fftshift(np.fft.fft(stream.samples) / n)
    freqs = np.fft.fftshift(np.fft.fftfreq(n, d=1.0 / stream.sample_rate))
    power = np.abs(bins) ** 2
    rows = [
        (k, float(freqs[k]), float(power[k]), float(_power_db(power[[k]])[0]))
        for k in range(n)
    ]
    header = ["bin", "freq_offset_hz", "power_linear", "power_db"]
    paths = [_write_csv(out / "spectrum.csv", header, rows)]
    if "svg" in formats:
        paths.append(_write_svg(
            out / "spectrum.svg", freqs / 1e6, {"power (dB)": _power_db(power)},
            "baseband frequency (MHz)", "power (dB)", "received-signal spectrum"))
    return paths


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rhevcal",
        description="Time-modulated phased-array calibration simulator",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="subcommand")
    for name, help_text in [
        ("sweep-delay", "measure one +1st-harmonic power-vs-delay curve"),
        ("calibrate", "run the full two-stage calibration on a preset array"),
        ("monte-carlo", "RMSE of the estimates over a parameter sweep"),
        ("compare-rev", "harmonic method vs rotating-element baseline, RMSE vs SNR"),
        ("pattern", "array power pattern before/after compensation"),
        ("spectrum", "baseband DFT magnitude dump of one received stream"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the INI run config")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the seed from the config file")
        p.add_argument("--format", default="csv",
                       help="comma-separated output formats: csv[,svg]")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def run(args) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.get("run", "seed")
    formats = [f.strip().lower() for f in args.format.split(",") if f.strip()]
    for fmt in formats:
        if fmt not in ("csv", "svg"):
            raise ConfigFileError(f"unknown output format {fmt!r}")
    if "csv" not in formats:
        raise ConfigFileError("csv output cannot be disabled")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.subcommand == "sweep-delay":
        paths = _cmd_sweep_delay(cfg, seed, out, formats)
    elif args.subcommand == "calibrate":
        paths = _cmd_calibrate(cfg, seed, out, formats)
    elif args.subcommand == "monte-carlo":
        paths = _cmd_monte_carlo(cfg, seed, out, formats)
    elif args.subcommand == "compare-rev":
        paths = _cmd_compare_rev(cfg, seed, out, formats)
    elif args.subcommand == "pattern":
        paths = _cmd_pattern(cfg, seed, out, formats, args.quiet)
    else:
        paths = _cmd_spectrum(cfg, seed, out, formats)

    if not args.quiet:
        for path in paths:
            print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RhevcalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - single-line diagnostic contract
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
