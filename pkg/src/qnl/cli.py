"""Config-driven experiment runner.

Usage: qnl <experiment> --config <file> [--seed N] [--jobs N] [--out DIR]

Writes results.json, CSV data, gnuplot-ready overlay files, and a
manifest.json with content digests. Payload files carry no timestamps,
so a rerun with the same config and seed is bit-identical regardless of
worker count. Exit codes: 0 success, 2 config error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import hashlib
import json
import math
import os
import sys
import types
from pathlib import Path

import numpy as np

from . import __version__
from .config import (EXPERIMENTS, ExperimentConfig, build_noise_model, build_pulses,
                     build_ramsey_config, build_rb_config, load_config)
from .drift import drift_sigma, fidelity_vs_detuning, psd_slope, track_frequency, welch_psd
from .errors import ConfigError, FitFailureError, InvalidInputError, QnlError
from .rb import calibrate_duration, run_rb
from .snrfit import (fit_snr_model, read_points_csv, required_snr, runs_test_pvalue,
                     snr_sweep)

OVERLAY_POINTS = 200


def _resolve_jobs(arg_jobs: int | None) -> int:
    if arg_jobs is not None:
        return max(1, arg_jobs)
    env = os.environ.get("QNL_JOBS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"QNL_JOBS must be an integer, got {env!r}") from exc
    return 1


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _sanitize(obj):
    """Replace non-finite floats so the JSON payload stays strictly valid."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


class ArtifactWriter:
    """Collects output files and their digests for the run manifest."""

    def __init__(self, out_dir: Path, cfg: ExperimentConfig):
        self.out_dir = out_dir
        self.cfg = cfg
        self.files: dict[str, str] = {}

    def header(self, description: str, columns: str) -> tuple:
        return (description, f"columns: {columns}",
                f"config sha256: {self.cfg.source_sha256}, seed: {self.cfg.seed}, "
                f"qnl version: {__version__}")

    def register(self, name: str) -> None:
        digest = hashlib.sha256((self.out_dir / name).read_bytes()).hexdigest()
        self.files[name] = digest

    def write_text(self, name: str, text: str) -> None:
        (self.out_dir / name).write_text(text)
        self.register(name)

    def write_json(self, name: str, payload: dict) -> None:
        body = json.dumps(_sanitize(payload), indent=2, sort_keys=True,
                          default=_json_default)
        self.write_text(name, body + "\n")

    def write_table(self, name: str, description: str, columns: str,
                    blocks) -> None:
        """Gnuplot-style data: comment header, blocks separated by blank pairs."""
        lines = [f"# {h}" for h in self.header(description, columns)]
        for label, rows in blocks:
            lines.append(f"# block: {label}")
            for row in rows:
                lines.append(" ".join(repr(float(v)) for v in row))
            lines.append("")
            lines.append("")
        self.write_text(name, "\n".join(lines[:-2]) + "\n")


def emit_plotdata(result, kind: str, writer: ArtifactWriter) -> list:
    """Write plot-ready data files for a result; returns the file names.

    kinds: "rb" (survival + decay overlay), "snr" (sweep + model overlay in
    both with-offset and offset-free variants), "psd" (log-log-ready columns).
    """
    if kind == "rb":
        blocks = [("measured survival",
                   [(m, p, s) for m, p, s in
                    zip(result.lengths, result.mean_survival, result.sem_survival)])]
        if result.fit is not None:
            m_dense = np.linspace(min(result.lengths), max(result.lengths), OVERLAY_POINTS)
            fit = result.fit
            curve = fit.amplitude * np.power(fit.decay, m_dense) + fit.baseline
            blocks.append(("fit overlay A*p^m + B", list(zip(m_dense, curve))))
        writer.write_table("rb_decay.dat",
                           "benchmarking survival vs sequence length",
                           "m (Cliffords), P (ground-state fraction), sem", blocks)
        return ["rb_decay.dat"]
    if kind == "snr":
        blocks = [("measured error vs SNR",
                   [(p.snr, p.error_rate, p.error_rate_uncertainty or 0.0)
                    for p in result.points])]
        if result.fit is not None:
            snrs = [p.snr for p in result.points]
            dense = np.geomspace(min(snrs), max(snrs), OVERLAY_POINTS)
            with_off = result.fit.evaluate(dense, include_offset=True)
            bare = result.fit.evaluate(dense, include_offset=False)
            blocks.append(("model overlay: col2 = full model (red solid), "
                           "col3 = offset-free (green dashed)",
                           list(zip(dense, with_off, bare))))
        writer.write_table("snr_sweep.dat",
                           "gate error vs control-pulse SNR",
                           "snr (linear), error (percent), uncertainty (percent)",
                           blocks)
        return ["snr_sweep.dat"]
    if kind == "psd":
        blocks = [("Welch estimate",
                   list(zip(result.frequencies, result.power)))]
        writer.write_table("drift_psd.dat",
                           "frequency-drift power spectral density",
                           "freq (Hz), PSD (Hz^2/Hz)", blocks)
        return ["drift_psd.dat"]
    raise InvalidInputError(f"unknown plotdata kind {kind!r}")


def _fit_payload(fit, targets_pct) -> dict:
    thresholds = {}
    for target in targets_pct:
        try:
            thresholds[f"{target}"] = required_snr(target, fit, include_offset=False)
        except QnlError as exc:
            thresholds[f"{target}"] = f"unachievable: {exc}"
    payload = fit.to_json_dict()
    payload["required_snr_offset_free"] = thresholds
    return payload


def _run_rb_baseline(cfg: ExperimentConfig, jobs: int, writer: ArtifactWriter) -> dict:
    rb_config = build_rb_config(cfg)
    calibration = None
    cal_target = cfg.get("calibration", "target_fidelity_pct")
    if cal_target is not None:
        bracket = (cfg.get("calibration", "bracket_low_ns", 10.0) * 1e-9,
                   cfg.get("calibration", "bracket_high_ns", 40.0) * 1e-9)
        calibration = calibrate_duration(cal_target / 100.0, rb_config,
                                         bracket=bracket, n_jobs=jobs)
        pulses = dataclasses.replace(rb_config.pulses, duration=calibration.duration)
        rb_config = dataclasses.replace(rb_config, pulses=pulses)
    result = run_rb(rb_config, n_jobs=jobs)
    result.write_csv(writer.out_dir / "rb_decay.csv",
                     header_lines=writer.header(
                         "benchmarking survival (mean over sequences)",
                         "m, mean_P, sem_P"))
    writer.register("rb_decay.csv")
    emit_plotdata(result, "rb", writer)

    payload = {"experiment": "rb-baseline", "rb": result.to_json_dict(),
               "pulse_duration_ns": rb_config.pulses.duration * 1e9}
    if calibration is not None:
        payload["calibration"] = calibration.to_json_dict()

    print(f"rb-baseline: {len(result.lengths)} lengths x "
          f"{result.per_sequence.shape[1]} sequences x {result.shots} shots")
    if calibration is not None:
        print(f"  calibrated pi/2 duration: {calibration.duration * 1e9:.3f} ns "
              f"(target F = {100 * calibration.target:.3f}%)")
    if result.succeeded:
        print(f"  F = {100 * result.fidelity:.4f}% +- {100 * result.fidelity_stderr:.4f}%")
        print(f"  decay p = {result.fit.decay:.6f}, A = {result.fit.amplitude:.4f}, "
              f"B = {result.fit.baseline:.4f}")
        print(f"  error per Clifford = {100 * result.error_per_clifford:.4f}%")
    else:
        print(f"  FIT FAILED: {result.fit_error}")
        raise FitFailureError(result.fit_error or "benchmarking decay fit failed",
                              diagnostics=result.to_json_dict())
    return payload


def _run_snr_sweep(cfg: ExperimentConfig, jobs: int, writer: ArtifactWriter) -> dict:
    values = cfg.get("snr", "values_linear",
                     [10.0, 20.0, 40.0, 80.0, 160.0, 320.0, 640.0, 10000.0])
    targets = cfg.get("snr", "targets_pct", [0.1, 0.01])
    rb_config = build_rb_config(cfg)
    result = snr_sweep(values, rb_config, seed=cfg.seed, n_jobs=jobs)
    result.write_csv(writer.out_dir / "snr_sweep.csv",
                     header_lines=writer.header(
                         "gate error vs control-pulse SNR",
                         "snr (linear), error_pct, err_unc_pct"))
    writer.register("snr_sweep.csv")
    emit_plotdata(result, "snr", writer)

    payload = {"experiment": "snr-sweep", "sweep": result.to_json_dict()}
    print(f"snr-sweep: {len(values)} points, "
          f"baseline error {result.baseline_error_pct:.4f}% "
          f"+- {result.baseline_error_unc_pct:.4f}%")
    if result.fit is not None:
        payload["fit"] = _fit_payload(result.fit, targets)
        residuals = np.array([p.error_rate for p in result.points]) \
            - result.fit.evaluate([p.snr for p in result.points])
        payload["runs_test_pvalue"] = runs_test_pvalue(residuals)
        print(f"  fit: A = {result.fit.a_coeff:.4f}%, b = {result.fit.b_coeff:.4g} "
              f"per 1e6 SNR, offset = {result.fit.offset:.4f}% (fixed)")
        print(f"  reduced chi-square = {result.fit.reduced_chi_square:.3f}, "
              f"runs-test p = {payload['runs_test_pvalue']:.3f}")
        for target, snr in payload["fit"]["required_snr_offset_free"].items():
            label = f"{snr:.4g}" if isinstance(snr, float) else snr
            print(f"  SNR required for {target}% (offset-free): {label}")
    else:
        print(f"  FIT FAILED: {result.fit_error}")
        raise FitFailureError(result.fit_error or "sweep model fit failed",
                              diagnostics=result.to_json_dict())
    return payload


def _run_ramsey_drift(cfg: ExperimentConfig, jobs: int, writer: ArtifactWriter) -> dict:
    del jobs  # the tracker is a serial scan
    ramsey = build_ramsey_config(cfg)
    hours = cfg.get("ramsey", "run_duration_hours", 20.0)
    duration_s = hours * 3600.0
    model = build_noise_model(cfg, duration=duration_s, sample_period=ramsey.cadence_s)
    source = cfg.get("drift", "source", "qubit")

    tracking = track_frequency(model, hours, ramsey)
    truth, est = tracking.truth, tracking.estimated
    truth = dataclasses.replace(truth, source=source)
    est = dataclasses.replace(est, source=source)

    truth.to_csv(writer.out_dir / "truth_trace.csv",
                 header_lines=writer.header("synthesized drift trace (ground truth)",
                                            "time_s, offset_hz"))
    writer.register("truth_trace.csv")
    est.to_csv(writer.out_dir / "estimated_trace.csv",
               header_lines=writer.header("tracked drift trace (Ramsey estimates)",
                                          "time_s, offset_hz"))
    writer.register("estimated_trace.csv")

    psd = welch_psd(truth.frequency_offsets, truth.sample_period)
    psd.to_csv(writer.out_dir / "drift_psd.csv",
               header_lines=writer.header("drift PSD (truth trace)", "freq_hz, psd"))
    writer.register("drift_psd.csv")
    emit_plotdata(psd, "psd", writer)

    try:
        slope = psd_slope(psd, f_max=model.corner_hz)
    except InvalidInputError:
        # corner too low to resolve; fall back to the whole band
        slope = psd_slope(psd)
    sigma_truth = drift_sigma(truth)
    sigma_est = drift_sigma(est)
    payload = {"experiment": "ramsey-drift",
               "noise_model": {"white_level_hz2_per_hz": model.white_level,
                               "pink_coefficient_hz2": model.pink_coefficient,
                               "corner_hz": model.corner_hz},
               "sigma_truth_hz": sigma_truth, "sigma_estimated_hz": sigma_est,
               "psd_loglog_slope": slope, "n_gaps": tracking.n_gaps,
               "n_points": truth.n_samples, "source": source}
    print(f"ramsey-drift: {hours:.1f} h at {ramsey.cadence_s:.0f} s cadence "
          f"({truth.n_samples} scans, {tracking.n_gaps} gaps)")
    print(f"  drift sigma: truth {sigma_truth:.4g} Hz, estimated {sigma_est:.4g} Hz")
    print(f"  PSD log-log slope: {slope:.3f} (corner {model.corner_hz:.4g} Hz)")
    return payload


def _run_detuning_sweep(cfg: ExperimentConfig, jobs: int, writer: ArtifactWriter) -> dict:
    offsets = cfg.get("detuning", "offsets_hz",
                      [-5e6, -5e3, 0.0, 5e3, 5e6])
    rb_config = build_rb_config(cfg)
    points = fidelity_vs_detuning(offsets, rb_config, n_jobs=jobs)

    lines = [f"# {h}" for h in writer.header(
        "benchmarking fidelity vs carrier detuning",
        "offset_hz, fidelity_pct, fidelity_stderr_pct")]
    lines.append("offset_hz,fidelity_pct,fidelity_stderr_pct")
    for p in points:
        lines.append(f"{p.offset_hz!r},{100 * p.fidelity!r},{100 * p.fidelity_stderr!r}")
    writer.write_text("detuning_sweep.csv", "\n".join(lines) + "\n")

    payload = {"experiment": "detuning-sweep",
               "points": [{"offset_hz": p.offset_hz, "fidelity_pct": 100 * p.fidelity,
                           "fidelity_stderr_pct": 100 * p.fidelity_stderr}
                          for p in points]}
    print(f"detuning-sweep: {len(points)} offsets")
    for p in points:
        print(f"  {p.offset_hz:>12.4g} Hz: F = {100 * p.fidelity:.4f}% "
              f"+- {100 * p.fidelity_stderr:.4f}%")
    return payload


def _run_fit_only(cfg: ExperimentConfig, jobs: int, writer: ArtifactWriter) -> dict:
    del jobs
    csv_path = cfg.get("fit", "input_csv")
    points = read_points_csv(csv_path)
    mode = cfg.get("fit", "offset_mode", "fixed")
    if mode not in ("fixed", "free"):
        raise ConfigError(f"offset_mode must be 'fixed' or 'free', got {mode!r}")
    offset_value = cfg.get("fit", "offset_value_pct", 0.0)
    targets = cfg.get("fit", "targets_pct", [0.1, 0.01])
    include = cfg.get("fit", "include_offset", False)

    fit = fit_snr_model(points, offset_mode=mode, offset_value=offset_value)
    thresholds = {}
    for target in targets:
        thresholds[f"{target}"] = required_snr(target, fit, include_offset=include)
    residuals = np.array([p.error_rate for p in points]) \
        - fit.evaluate([p.snr for p in points])
    emit_plotdata(types.SimpleNamespace(points=points, fit=fit), "snr", writer)

    payload = {"experiment": "fit-only", "n_points": len(points),
               "fit": fit.to_json_dict(),
               "required_snr": thresholds, "include_offset": include,
               "runs_test_pvalue": runs_test_pvalue(residuals)}
    print(f"fit-only: {len(points)} points from {csv_path}")
    print(f"  A = {fit.a_coeff:.4f}%, b = {fit.b_coeff:.4g} per 1e6 SNR, "
          f"offset = {fit.offset:.4f}% ({'fixed' if fit.offset_fixed else 'free'})")
    print(f"  reduced chi-square = {fit.reduced_chi_square:.3f}")
    for target, snr in thresholds.items():
        print(f"  SNR required for {target}%: {snr:.4g}")
    return payload


_RUNNERS = {
    "rb-baseline": _run_rb_baseline,
    "snr-sweep": _run_snr_sweep,
    "ramsey-drift": _run_ramsey_drift,
    "detuning-sweep": _run_detuning_sweep,
    "fit-only": _run_fit_only,
}


def run(config_path: str, experiment: str, seed: int | None = None,
        jobs: int | None = None, out_dir: str | None = None) -> int:
    """Execute one experiment; returns the process exit code."""
    started = datetime.datetime.now(datetime.timezone.utc)
    try:
        cfg = load_config(config_path, experiment)
        if seed is not None:
            cfg = dataclasses.replace(cfg, seed=seed)
        if out_dir is not None:
            cfg = dataclasses.replace(cfg, out_dir=out_dir)
        n_jobs = _resolve_jobs(jobs)
    except (ConfigError, InvalidInputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    writer = ArtifactWriter(out, cfg)

    try:
        payload = _RUNNERS[experiment](cfg, n_jobs, writer)
    except (ConfigError, InvalidInputError) as exc:
        # domain validation of config-supplied values is still a config problem
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except QnlError as exc:
        diagnostics = {"error": type(exc).__name__, "message": str(exc),
                       "diagnostics": getattr(exc, "diagnostics", None)}
        writer.write_json("diagnostics.json", diagnostics)
        print(f"experiment failed: {exc}", file=sys.stderr)
        print(f"diagnostics written to {out / 'diagnostics.json'}", file=sys.stderr)
        return 3

    payload["config_sha256"] = cfg.source_sha256
    payload["seed"] = cfg.seed
    payload["version"] = __version__
    writer.write_json("results.json", payload)

    finished = datetime.datetime.now(datetime.timezone.utc)
    manifest = {"config_sha256": cfg.source_sha256, "seed": cfg.seed,
                "experiment": experiment, "version": __version__,
                "started_utc": started.isoformat(), "finished_utc": finished.isoformat(),
                "files": writer.files}
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"artifacts in {out}/ ({len(writer.files)} files + manifest.json)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qnl",
        description="Pulse-level qubit noise characterization experiments.")
    parser.add_argument("experiment", choices=EXPERIMENTS,
                        help="which experiment to run")
    parser.add_argument("--config", required=True, help="TOML config file")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed (overrides [run] seed)")
    parser.add_argument("--jobs", type=int, default=None,
                        help="worker processes (default: QNL_JOBS or 1)")
    parser.add_argument("--out", default=None,
                        help="output directory (overrides [output] dir)")
    args = parser.parse_args(argv)
    return run(args.config, args.experiment, seed=args.seed, jobs=args.jobs,
               out_dir=args.out)


if __name__ == "__main__":
    sys.exit(main())
