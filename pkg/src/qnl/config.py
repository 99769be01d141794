"""Strict TOML experiment configuration.

Every physical key carries its unit in the name (t1_us, duration_ns,
snr values as plain linear ratios under values_linear). Unknown sections
and unknown keys are rejected with the offending name and, where it can
be located, the line in the file. Silent misconfiguration of units is
the failure mode this is designed against.
"""

from __future__ import annotations

import difflib
import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .cliffords import PulseSettings
from .dynamics import DEFAULT_ANHARMONICITY, CoherenceParams
from .drift import NoiseModel1f, RamseyConfig
from .errors import ConfigError
from .rb import DEFAULT_LENGTHS, RBConfig

EXPERIMENTS = ("rb-baseline", "snr-sweep", "ramsey-drift", "detuning-sweep", "fit-only")

_BOOL = bool
_INT = int
_FLOAT = (int, float)
_STR = str
_LIST_NUM = "list-of-numbers"
_LIST_INT = "list-of-ints"


def _type_ok(value, expected):
    if expected is _BOOL:
        return isinstance(value, bool)
    if expected is _INT:
        return isinstance(value, int) and not isinstance(value, bool)
    if expected is _FLOAT:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if expected is _STR:
        return isinstance(value, str)
    if expected == _LIST_NUM:
        return isinstance(value, list) and len(value) > 0 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    if expected == _LIST_INT:
        return isinstance(value, list) and len(value) > 0 and all(
            isinstance(v, int) and not isinstance(v, bool) for v in value)
    raise AssertionError(expected)


def _type_name(expected):
    return {_BOOL: "boolean", _INT: "integer", _FLOAT: "number", _STR: "string",
            _LIST_NUM: "list of numbers", _LIST_INT: "list of integers"}[expected]


# section -> key -> expected type. Keys absent here are rejected.
_COMMON_SECTIONS = {
    "run": {"experiment": _STR, "seed": _INT},
    "coherence": {"t1_us": _FLOAT, "t2_us": _FLOAT},
    "pulse": {"shape": _STR, "duration_ns": _FLOAT, "sample_period_ns": _FLOAT,
              "detuning_hz": _FLOAT},
    "output": {"dir": _STR},
}

_RB_SECTION = {
    "lengths": _LIST_INT, "n_sequences": _INT, "shots": _INT,
    "readout_error_prob": _FLOAT, "dim": _INT, "anharmonicity_mhz": _FLOAT,
}

_SCHEMAS = {
    "rb-baseline": {
        "rb": _RB_SECTION,
        "calibration": {"target_fidelity_pct": _FLOAT, "bracket_low_ns": _FLOAT,
                        "bracket_high_ns": _FLOAT},
    },
    "snr-sweep": {
        "rb": _RB_SECTION,
        "snr": {"values_linear": _LIST_NUM, "targets_pct": _LIST_NUM},
    },
    "ramsey-drift": {
        "drift": {"source": _STR, "sigma_target_hz": _FLOAT, "corner_hz": _FLOAT,
                  "white_level_hz2_per_hz": _FLOAT, "pink_coefficient_hz2": _FLOAT},
        "ramsey": {"detuning_hz": _FLOAT, "max_delay_us": _FLOAT, "n_delays": _INT,
                   "shots": _INT, "cadence_s": _FLOAT, "run_duration_hours": _FLOAT},
    },
    "detuning-sweep": {
        "rb": _RB_SECTION,
        "detuning": {"offsets_hz": _LIST_NUM},
    },
    "fit-only": {
        "fit": {"input_csv": _STR, "offset_mode": _STR, "offset_value_pct": _FLOAT,
                "targets_pct": _LIST_NUM, "include_offset": _BOOL},
    },
}


def _section_line(text: str, section: str) -> int | None:
    pat = re.compile(r"^\s*\[\s*" + re.escape(section) + r"\s*\]")
    for i, line in enumerate(text.splitlines(), start=1):
        if pat.match(line):
            return i
    return None


def _key_line(text: str, section: str, key: str) -> int | None:
    in_section = section == ""
    key_pat = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
    for i, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"^\s*\[\s*([^\]]+?)\s*\]", line)
        if m:
            in_section = m.group(1) == section
            continue
        if in_section and key_pat.match(line):
            return i
    return None


def _at(line: int | None) -> str:
    return f" (line {line})" if line is not None else ""


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated config for one experiment run."""

    experiment: str
    seed: int
    out_dir: str
    source_sha256: str
    sections: dict = field(repr=False)

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)


def load_config(path: str | Path, experiment: str) -> ExperimentConfig:
    """Parse and strictly validate a TOML config for the given experiment."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment '{experiment}'; "
                          f"expected one of: {', '.join(EXPERIMENTS)}")
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    text = raw.decode("utf-8", errors="replace")
    try:
        parsed = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc

    allowed = dict(_COMMON_SECTIONS)
    allowed.update(_SCHEMAS[experiment])

    for section, content in parsed.items():
        if section not in allowed:
            hint = ""
            close = difflib.get_close_matches(section, allowed, n=1)
            if close:
                hint = f"; did you mean [{close[0]}]?"
            raise ConfigError(
                f"unknown section [{section}]{_at(_section_line(text, section))} "
                f"for experiment '{experiment}'{hint}")
        if not isinstance(content, dict):
            raise ConfigError(
                f"top-level key '{section}'{_at(_key_line(text, '', section))} "
                f"is not allowed; all settings live in sections")
        for key, value in content.items():
            if key not in allowed[section]:
                hint = ""
                close = difflib.get_close_matches(key, allowed[section], n=1, cutoff=0.5)
                if close:
                    hint = f"; did you mean '{close[0]}'?"
                raise ConfigError(
                    f"unknown key '{key}' in section [{section}]"
                    f"{_at(_key_line(text, section, key))}{hint}")
            expected = allowed[section][key]
            if not _type_ok(value, expected):
                raise ConfigError(
                    f"key '{key}' in section [{section}]"
                    f"{_at(_key_line(text, section, key))} must be a "
                    f"{_type_name(expected)}, got {value!r}")

    declared = parsed.get("run", {}).get("experiment")
    if declared is not None and declared != experiment:
        raise ConfigError(
            f"config declares experiment '{declared}'"
            f"{_at(_key_line(text, 'run', 'experiment'))} but "
            f"'{experiment}' was requested on the command line")

    if experiment == "fit-only":
        if "fit" not in parsed or "input_csv" not in parsed.get("fit", {}):
            raise ConfigError("experiment 'fit-only' requires [fit] input_csv")
    if experiment == "ramsey-drift":
        drift = parsed.get("drift", {})
        explicit = {"white_level_hz2_per_hz", "pink_coefficient_hz2"} & drift.keys()
        tuned = {"sigma_target_hz"} & drift.keys()
        if explicit and tuned:
            raise ConfigError(
                "section [drift] mixes explicit noise levels "
                "(white_level_hz2_per_hz/pink_coefficient_hz2) with sigma_target_hz; "
                "choose one parameterization")
        if len(explicit) == 1:
            missing = ({"white_level_hz2_per_hz", "pink_coefficient_hz2"} - explicit).pop()
            raise ConfigError(f"section [drift] sets one explicit noise level "
                              f"but not '{missing}'")

    return ExperimentConfig(
        experiment=experiment,
        seed=int(parsed.get("run", {}).get("seed", 0)),
        out_dir=str(parsed.get("output", {}).get("dir", "qnl-out")),
        source_sha256=hashlib.sha256(raw).hexdigest(),
        sections=parsed,
    )


def build_coherence(cfg: ExperimentConfig) -> CoherenceParams:
    """Coherence from [coherence], defaulting to the reference device values."""
    t1 = cfg.get("coherence", "t1_us", 8.66) * 1e-6
    t2 = cfg.get("coherence", "t2_us", 9.08) * 1e-6
    return CoherenceParams(t1=t1, t2=t2)


def build_pulses(cfg: ExperimentConfig) -> PulseSettings:
    return PulseSettings(
        shape=cfg.get("pulse", "shape", "gaussian"),
        duration=cfg.get("pulse", "duration_ns", 20.0) * 1e-9,
        sample_period=cfg.get("pulse", "sample_period_ns", 0.5) * 1e-9,
        detuning=2.0 * math.pi * cfg.get("pulse", "detuning_hz", 0.0),
    )


def build_rb_config(cfg: ExperimentConfig, snr=None) -> RBConfig:
    anh_mhz = cfg.get("rb", "anharmonicity_mhz")
    anh = DEFAULT_ANHARMONICITY if anh_mhz is None else 2.0 * math.pi * anh_mhz * 1e6
    return RBConfig(
        lengths=tuple(cfg.get("rb", "lengths", list(DEFAULT_LENGTHS))),
        n_sequences=cfg.get("rb", "n_sequences", 30),
        shots=cfg.get("rb", "shots", 1000),
        coherence=build_coherence(cfg),
        snr=snr,
        pulses=build_pulses(cfg),
        seed=cfg.seed,
        readout_error=cfg.get("rb", "readout_error_prob", 0.0),
        dim=cfg.get("rb", "dim", 2),
        anharmonicity=anh,
    )


def build_noise_model(cfg: ExperimentConfig, duration: float,
                      sample_period: float) -> NoiseModel1f:
    white = cfg.get("drift", "white_level_hz2_per_hz")
    pink = cfg.get("drift", "pink_coefficient_hz2")
    if white is not None and pink is not None:
        return NoiseModel1f(white_level=float(white), pink_coefficient=float(pink))
    sigma = cfg.get("drift", "sigma_target_hz", 5000.0)
    corner = cfg.get("drift", "corner_hz")
    return NoiseModel1f.tuned(target_sigma=float(sigma), duration=duration,
                              sample_period=sample_period,
                              corner_hz=None if corner is None else float(corner))


def build_ramsey_config(cfg: ExperimentConfig) -> RamseyConfig:
    shots = cfg.get("ramsey", "shots", 0)
    return RamseyConfig(
        coherence=build_coherence(cfg),
        detuning_hz=cfg.get("ramsey", "detuning_hz", 1e6),
        max_delay_s=cfg.get("ramsey", "max_delay_us", 18.0) * 1e-6,
        n_delays=cfg.get("ramsey", "n_delays", 61),
        shots=None if shots in (0, None) else int(shots),
        cadence_s=cfg.get("ramsey", "cadence_s", 30.0),
        seed=cfg.seed,
    )
