"""End-to-end command-line runs: artifacts, manifests, exit codes."""

import hashlib
import json
import math

import numpy as np
import pytest
import scipy.optimize

from qnl.cli import main, run

# tiny-statistics fits legitimately have singular covariance
pytestmark = pytest.mark.filterwarnings(
    "ignore::scipy.optimize.OptimizeWarning")

RB_TOML = """\
[run]
experiment = "rb-baseline"
seed = 0

[rb]
lengths = [2, 4, 8]
n_sequences = 2
shots = 50
"""

CAL_TOML = """\
[run]
experiment = "rb-baseline"
seed = 0

[coherence]
t1_us = 8.66
t2_us = 9.08

[rb]
n_sequences = 4
shots = 300

[calibration]
target_fidelity_pct = 99.8
"""

SNR_TOML = """\
[run]
experiment = "snr-sweep"
seed = 0

[rb]
lengths = [2, 4, 8, 16]
n_sequences = 3
shots = 100

[snr]
values_linear = [10.0, 100.0, 1000.0, 10000.0]
targets_pct = [0.1, 0.01]
"""

DRIFT_TOML = """\
[run]
experiment = "ramsey-drift"
seed = 0

[drift]
sigma_target_hz = 5000.0

[ramsey]
run_duration_hours = 1.0
"""

DET_TOML = """\
[run]
experiment = "detuning-sweep"
seed = 0

[rb]
lengths = [2, 4, 8]
n_sequences = 2
shots = 50

[detuning]
offsets_hz = [-5e3, 0.0, 5e3]
"""


def write_cfg(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def reference_csv(tmp_path, offset=0.0):
    snr = np.geomspace(0.4e6, 6e6, 10)
    path = tmp_path / "points.csv"
    with open(path, "w") as fh:
        fh.write("snr,error_pct,err_unc_pct\n")
        for s in snr:
            err = 1.682 * math.exp(-0.9898 * s / 1e6) + offset
            fh.write(f"{float(s)!r},{float(err)!r},\n")
    return path


def check_manifest(out, expected_files):
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["files"]) == expected_files
    for name, digest in manifest["files"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    return manifest


def test_rb_baseline_artifacts(tmp_path, capsys):
    cfg = write_cfg(tmp_path, RB_TOML)
    out = tmp_path / "out"
    assert run(cfg, "rb-baseline", out_dir=str(out)) == 0
    manifest = check_manifest(out, {"rb_decay.csv", "rb_decay.dat", "results.json"})
    assert manifest["experiment"] == "rb-baseline"
    assert manifest["seed"] == 0
    results = json.loads((out / "results.json").read_text())
    # default coherence is the reference device, so F sits just under 1
    assert results["rb"]["fit"]["fidelity"] == pytest.approx(1.0, abs=1e-3)
    assert results["config_sha256"] == manifest["config_sha256"]
    # per-file headers carry the provenance line
    assert f"config sha256: {manifest['config_sha256']}" in (out / "rb_decay.csv").read_text()
    assert "F = 100.0000%" in capsys.readouterr().out


def test_rb_baseline_with_calibration(tmp_path):
    cfg = write_cfg(tmp_path, CAL_TOML)
    out = tmp_path / "out"
    assert run(cfg, "rb-baseline", out_dir=str(out)) == 0
    results = json.loads((out / "results.json").read_text())
    cal = results["calibration"]
    assert 10e-9 <= cal["duration_s"] <= 40e-9
    assert cal["fidelity"] == pytest.approx(0.998, abs=5e-4)
    assert results["pulse_duration_ns"] == pytest.approx(cal["duration_s"] * 1e9)
    sweep = cal["sweep"]
    assert len(sweep) >= 3
    durations = [p["duration_s"] for p in sweep]
    assert durations == sorted(durations)


def test_rb_plotdata_block_structure(tmp_path):
    cfg = write_cfg(tmp_path, RB_TOML)
    out = tmp_path / "out"
    assert run(cfg, "rb-baseline", out_dir=str(out)) == 0
    lines = (out / "rb_decay.dat").read_text().splitlines()
    assert lines[0].startswith("# benchmarking survival")
    assert lines[1].startswith("# columns:")
    assert lines[2].startswith("# config sha256:")
    assert lines[3] == "# block: measured survival"
    measured = lines[4:7]
    assert all(len(row.split()) == 3 for row in measured)
    assert lines[7] == "" and lines[8] == ""
    assert lines[9].startswith("# block: fit overlay")
    overlay = [row for row in lines[10:] if row]
    assert len(overlay) == 200
    assert all(len(row.split()) == 2 for row in overlay)


def test_snr_sweep_artifacts_and_overlay(tmp_path):
    cfg = write_cfg(tmp_path, SNR_TOML)
    out = tmp_path / "out"
    assert run(cfg, "snr-sweep", out_dir=str(out)) == 0
    check_manifest(out, {"snr_sweep.csv", "snr_sweep.dat", "results.json"})
    results = json.loads((out / "results.json").read_text())
    assert "required_snr_offset_free" in results["fit"]
    assert set(results["fit"]["required_snr_offset_free"]) == {"0.1", "0.01"}
    assert "runs_test_pvalue" in results
    text = (out / "snr_sweep.dat").read_text()
    assert "col2 = full model (red solid), col3 = offset-free (green dashed)" in text
    overlay_rows = [row for row in text.splitlines()
                    if row and not row.startswith("#")]
    three_col = [row for row in overlay_rows if len(row.split()) == 3]
    # 4 measured points + 200 overlay samples, all three-column
    assert len(three_col) == 204


def test_payloads_bit_identical_across_worker_counts(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, SNR_TOML)
    out1, out3, outenv = (tmp_path / d for d in ("j1", "j3", "jenv"))
    assert run(cfg, "snr-sweep", jobs=1, out_dir=str(out1)) == 0
    assert run(cfg, "snr-sweep", jobs=3, out_dir=str(out3)) == 0
    monkeypatch.setenv("QNL_JOBS", "2")
    assert run(cfg, "snr-sweep", out_dir=str(outenv)) == 0
    for name in ("snr_sweep.csv", "snr_sweep.dat", "results.json"):
        ref = (out1 / name).read_bytes()
        assert (out3 / name).read_bytes() == ref
        assert (outenv / name).read_bytes() == ref
    m1 = json.loads((out1 / "manifest.json").read_text())
    m3 = json.loads((out3 / "manifest.json").read_text())
    assert m1["files"] == m3["files"]  # digests identical; timestamps may differ


def test_ramsey_drift_artifacts(tmp_path):
    cfg = write_cfg(tmp_path, DRIFT_TOML)
    out = tmp_path / "out"
    assert run(cfg, "ramsey-drift", out_dir=str(out)) == 0
    check_manifest(out, {"truth_trace.csv", "estimated_trace.csv", "drift_psd.csv",
                         "drift_psd.dat", "results.json"})
    results = json.loads((out / "results.json").read_text())
    assert results["n_points"] == 120  # 1 h at 30 s cadence
    assert results["sigma_truth_hz"] > 0
    assert abs(results["sigma_estimated_hz"] - results["sigma_truth_hz"]) < 50.0
    assert results["source"] == "qubit"
    truth_lines = (out / "truth_trace.csv").read_text().splitlines()
    assert truth_lines[0].startswith("# frequency trace")


def test_detuning_sweep_artifacts(tmp_path):
    cfg = write_cfg(tmp_path, DET_TOML)
    out = tmp_path / "out"
    assert run(cfg, "detuning-sweep", out_dir=str(out)) == 0
    check_manifest(out, {"detuning_sweep.csv", "results.json"})
    results = json.loads((out / "results.json").read_text())
    by_offset = {p["offset_hz"]: p["fidelity_pct"] for p in results["points"]}
    assert by_offset[0.0] == pytest.approx(100.0, abs=1e-3)
    assert all(99.0 < f <= 100.0 + 1e-9 for f in by_offset.values())
    rows = [line for line in (out / "detuning_sweep.csv").read_text().splitlines()
            if line and not line.startswith("#")]
    assert rows[0] == "offset_hz,fidelity_pct,fidelity_stderr_pct"
    assert len(rows) == 4


def test_fit_only_reproduces_reference_thresholds(tmp_path):
    points = reference_csv(tmp_path)
    cfg = write_cfg(tmp_path, f"""\
[run]
experiment = "fit-only"

[fit]
input_csv = "{points}"
targets_pct = [0.1, 0.01]
""")
    out = tmp_path / "out"
    assert run(cfg, "fit-only", out_dir=str(out)) == 0
    check_manifest(out, {"snr_sweep.dat", "results.json"})
    results = json.loads((out / "results.json").read_text())
    assert results["fit"]["a_coeff_pct"] == pytest.approx(1.682, abs=1e-6)
    assert results["fit"]["b_coeff_per_1e6_snr"] == pytest.approx(0.9898, abs=1e-6)
    thresholds = results["required_snr"]
    assert thresholds["0.1"] == pytest.approx(2.9e6, rel=0.05)
    assert thresholds["0.01"] == pytest.approx(5.2e6, rel=0.05)
    assert thresholds["0.1"] == pytest.approx(math.log(1.682 / 0.1) / 0.9898 * 1e6,
                                              rel=1e-4)


def test_exit_code_2_on_bad_config(tmp_path, capsys):
    cfg = write_cfg(tmp_path, RB_TOML.replace("lengths", "lenghts"))
    assert run(cfg, "rb-baseline", out_dir=str(tmp_path / "o")) == 2
    err = capsys.readouterr().err
    assert "config error:" in err
    assert "lenghts" in err and "lengths" in err  # names the key and the fix


def test_exit_code_2_on_bad_jobs_env(tmp_path, monkeypatch, capsys):
    cfg = write_cfg(tmp_path, RB_TOML)
    monkeypatch.setenv("QNL_JOBS", "many")
    assert run(cfg, "rb-baseline", out_dir=str(tmp_path / "o")) == 2
    assert "QNL_JOBS" in capsys.readouterr().err


def test_exit_code_2_on_runtime_domain_error(tmp_path, capsys):
    # a structurally valid config whose values fail domain validation
    short = tmp_path / "short.csv"
    short.write_text("snr,error_pct\n1e6,0.5\n2e6,0.3\n")
    cfg = write_cfg(tmp_path, f"""\
[run]
experiment = "fit-only"

[fit]
input_csv = "{short}"
""")
    assert run(cfg, "fit-only", out_dir=str(tmp_path / "o")) == 2
    assert "at least 4 points" in capsys.readouterr().err


def test_exit_code_3_writes_diagnostics(tmp_path, capsys):
    points = reference_csv(tmp_path, offset=0.167)
    cfg = write_cfg(tmp_path, f"""\
[run]
experiment = "fit-only"

[fit]
input_csv = "{points}"
offset_mode = "free"
targets_pct = [0.1]
include_offset = true
""")
    out = tmp_path / "out"
    assert run(cfg, "fit-only", out_dir=str(out)) == 3
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["error"] == "UnachievableTargetError"
    assert "floor" in diag["message"]
    assert not (out / "results.json").exists()
    assert "experiment failed" in capsys.readouterr().err


def test_seed_override_flows_to_manifest(tmp_path):
    cfg = write_cfg(tmp_path, RB_TOML)
    out = tmp_path / "out"
    assert run(cfg, "rb-baseline", seed=5, out_dir=str(out)) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 5
    results = json.loads((out / "results.json").read_text())
    assert results["seed"] == 5
    assert results["rb"]["seed"] == 5


def test_main_argv_round_trip(tmp_path):
    cfg = write_cfg(tmp_path, RB_TOML)
    out = tmp_path / "out"
    assert main(["rb-baseline", "--config", cfg, "--out", str(out), "--jobs", "1"]) == 0
    assert (out / "results.json").exists()
    with pytest.raises(SystemExit) as exc:
        main(["mystery-experiment", "--config", cfg])
    assert exc.value.code == 2
