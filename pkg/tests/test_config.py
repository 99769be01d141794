"""Strict TOML config loading and builder unit conversions."""

import hashlib
import math

import pytest

from qnl.config import (build_coherence, build_noise_model, build_pulses,
                        build_ramsey_config, build_rb_config, load_config)
from qnl.dynamics import DEFAULT_ANHARMONICITY
from qnl.errors import ConfigError

GOOD_RB = """\
[run]
experiment = "rb-baseline"
seed = 7

[coherence]
t1_us = 8.66
t2_us = 9.08

[rb]
lengths = [2, 4, 8]
n_sequences = 4
shots = 100
"""


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_minimal_config_loads_with_defaults(tmp_path):
    path = write(tmp_path, GOOD_RB)
    cfg = load_config(path, "rb-baseline")
    assert cfg.experiment == "rb-baseline"
    assert cfg.seed == 7
    assert cfg.out_dir == "qnl-out"
    assert cfg.source_sha256 == hashlib.sha256(path.read_bytes()).hexdigest()
    assert cfg.get("rb", "shots") == 100
    assert cfg.get("rb", "missing", 42) == 42


def test_unknown_experiment_name(tmp_path):
    path = write(tmp_path, GOOD_RB)
    with pytest.raises(ConfigError, match="unknown experiment 'calibrate'"):
        load_config(path, "calibrate")


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read config file"):
        load_config("/nonexistent/qnl.toml", "rb-baseline")


def test_parse_error(tmp_path):
    path = write(tmp_path, "[run\nexperiment = ")
    with pytest.raises(ConfigError, match="config parse error"):
        load_config(path, "rb-baseline")


def test_unknown_section_carries_line_and_suggestion(tmp_path):
    path = write(tmp_path, GOOD_RB + "\n[couherence]\nt1_us = 1.0\n")
    with pytest.raises(ConfigError) as err:
        load_config(path, "rb-baseline")
    msg = str(err.value)
    assert "unknown section [couherence]" in msg
    assert "(line 14)" in msg
    assert "did you mean [coherence]?" in msg


def test_unknown_key_carries_line_and_suggestion(tmp_path):
    text = GOOD_RB.replace("t1_us = 8.66", "t1 = 8.66")
    path = write(tmp_path, text)
    with pytest.raises(ConfigError) as err:
        load_config(path, "rb-baseline")
    msg = str(err.value)
    assert "unknown key 't1' in section [coherence]" in msg
    assert "(line 6)" in msg
    assert "did you mean 't1_us'?" in msg


def test_section_from_other_experiment_rejected(tmp_path):
    path = write(tmp_path, GOOD_RB + "\n[snr]\nvalues_linear = [10.0]\n")
    with pytest.raises(ConfigError, match=r"unknown section \[snr\].*rb-baseline"):
        load_config(path, "rb-baseline")


def test_type_errors(tmp_path):
    path = write(tmp_path, GOOD_RB.replace("seed = 7", "seed = true"))
    with pytest.raises(ConfigError, match="'seed' in section \\[run\\].*must be a integer"):
        load_config(path, "rb-baseline")
    path = write(tmp_path, GOOD_RB.replace("lengths = [2, 4, 8]", "lengths = [2, 4.5]"))
    with pytest.raises(ConfigError, match="must be a list of integers"):
        load_config(path, "rb-baseline")
    path = write(tmp_path, GOOD_RB.replace('t1_us = 8.66', 't1_us = "large"'))
    with pytest.raises(ConfigError, match="must be a number"):
        load_config(path, "rb-baseline")
    path = write(tmp_path, GOOD_RB.replace("lengths = [2, 4, 8]", "lengths = []"))
    with pytest.raises(ConfigError, match="must be a list of integers"):
        load_config(path, "rb-baseline")


def test_declared_experiment_must_match_request(tmp_path):
    path = write(tmp_path, GOOD_RB)
    with pytest.raises(ConfigError) as err:
        load_config(path, "detuning-sweep")
    msg = str(err.value)
    assert "declares experiment 'rb-baseline'" in msg
    assert "'detuning-sweep' was requested" in msg


def test_bare_top_level_key_rejected(tmp_path):
    path = write(tmp_path, 'run = 3\n')
    with pytest.raises(ConfigError, match="top-level key 'run'.*not allowed"):
        load_config(path, "rb-baseline")


def test_fit_only_requires_input_csv(tmp_path):
    path = write(tmp_path, '[run]\nexperiment = "fit-only"\n')
    with pytest.raises(ConfigError, match="requires \\[fit\\] input_csv"):
        load_config(path, "fit-only")
    path = write(tmp_path, '[fit]\noffset_mode = "free"\n')
    with pytest.raises(ConfigError, match="input_csv"):
        load_config(path, "fit-only")


def test_drift_parameterizations_are_exclusive(tmp_path):
    both = ('[drift]\nsigma_target_hz = 5000.0\nwhite_level_hz2_per_hz = 1.0\n'
            'pink_coefficient_hz2 = 10.0\n')
    path = write(tmp_path, both)
    with pytest.raises(ConfigError, match="choose one parameterization"):
        load_config(path, "ramsey-drift")
    half = write(tmp_path, "[drift]\nwhite_level_hz2_per_hz = 1.0\n", "half.toml")
    with pytest.raises(ConfigError, match="not 'pink_coefficient_hz2'"):
        load_config(half, "ramsey-drift")


def test_build_coherence_converts_microseconds(tmp_path):
    cfg = load_config(write(tmp_path, GOOD_RB), "rb-baseline")
    coh = build_coherence(cfg)
    assert coh.t1 == pytest.approx(8.66e-6, rel=1e-12)
    assert coh.t2 == pytest.approx(9.08e-6, rel=1e-12)
    bare = load_config(write(tmp_path, "[run]\nseed = 1\n", "bare.toml"), "rb-baseline")
    defaults = build_coherence(bare)
    assert defaults.t1 == pytest.approx(8.66e-6)


def test_build_pulses_converts_units(tmp_path):
    text = GOOD_RB + ('\n[pulse]\nshape = "square"\nduration_ns = 25.0\n'
                      'sample_period_ns = 0.25\ndetuning_hz = 5000.0\n')
    cfg = load_config(write(tmp_path, text), "rb-baseline")
    pulses = build_pulses(cfg)
    assert pulses.shape == "square"
    assert pulses.duration == pytest.approx(25e-9)
    assert pulses.sample_period == pytest.approx(0.25e-9)
    assert pulses.detuning == pytest.approx(2 * math.pi * 5000.0)


def test_build_rb_config_defaults_and_units(tmp_path):
    text = GOOD_RB + "\n[pulse]\nduration_ns = 30.0\n"
    cfg = load_config(write(tmp_path, text), "rb-baseline")
    rb = build_rb_config(cfg, snr=100.0)
    assert rb.lengths == (2, 4, 8)
    assert rb.n_sequences == 4
    assert rb.seed == 7
    assert rb.snr_value == 100.0
    assert rb.pulses.duration == pytest.approx(30e-9)
    assert rb.anharmonicity == DEFAULT_ANHARMONICITY
    with_anh = GOOD_RB.replace("shots = 100", "shots = 100\nanharmonicity_mhz = -250.0")
    cfg2 = load_config(write(tmp_path, with_anh, "anh.toml"), "rb-baseline")
    assert build_rb_config(cfg2).anharmonicity == pytest.approx(-2 * math.pi * 250e6)


def test_build_noise_model_paths(tmp_path):
    explicit = ('[run]\nexperiment = "ramsey-drift"\n[drift]\n'
                'white_level_hz2_per_hz = 2.0\npink_coefficient_hz2 = 40.0\n')
    cfg = load_config(write(tmp_path, explicit), "ramsey-drift")
    model = build_noise_model(cfg, duration=72000.0, sample_period=30.0)
    assert model.white_level == 2.0
    assert model.pink_coefficient == 40.0
    tuned_text = '[drift]\nsigma_target_hz = 200.0\ncorner_hz = 0.001\n'
    cfg2 = load_config(write(tmp_path, tuned_text, "tuned.toml"), "ramsey-drift")
    model2 = build_noise_model(cfg2, duration=72000.0, sample_period=30.0)
    assert model2.corner_hz == pytest.approx(0.001)
    bare = load_config(write(tmp_path, "[run]\nseed = 0\n", "b.toml"), "ramsey-drift")
    model3 = build_noise_model(bare, duration=72000.0, sample_period=30.0)
    assert model3.corner_hz == pytest.approx((0.5 / 30.0) / 8.0)  # tuned at 5 kHz default


def test_build_ramsey_config(tmp_path):
    text = ('[ramsey]\ndetuning_hz = 2e6\nmax_delay_us = 10.0\nn_delays = 31\n'
            'shots = 0\ncadence_s = 15.0\nrun_duration_hours = 2.0\n')
    cfg = load_config(write(tmp_path, text), "ramsey-drift")
    ram = build_ramsey_config(cfg)
    assert ram.detuning_hz == pytest.approx(2e6)
    assert ram.max_delay_s == pytest.approx(10e-6)
    assert ram.n_delays == 31
    assert ram.shots is None  # 0 means exact probabilities
    assert ram.cadence_s == 15.0
    shot_text = text.replace("shots = 0", "shots = 500")
    cfg2 = load_config(write(tmp_path, shot_text, "shots.toml"), "ramsey-drift")
    assert build_ramsey_config(cfg2).shots == 500
