"""Randomized benchmarking engine: sequence runs, decay fits, calibration.

Survival statistics follow the standard single-qubit protocol: m uniform
random Cliffords plus the exact group recovery, ground-state survival
averaged over sequences, fit to P(m) = A*p^m + B, fidelity F = 1 - (1-p)/2.

Each (length, sequence) pair is an independent task with seeds derived from
the master seed, so results are bit-identical for any worker count.  Noise
is drawn fresh per sequence and shared across the shots of that sequence;
shot counts are sampled binomially from the evolved ground population.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import curve_fit

from .cliffords import PulseSettings, compile_sequence, compiled_phase_quarters, random_sequence
from .dynamics import (DEFAULT_ANHARMONICITY, CoherenceParams, DensityMatrix, evolve,
                       ordered_product, step_propagators)
from .errors import FitFailureError, InvalidInputError
from .pulses import SnrSpec, noise_rms_for_snr, snr_linear, white_noise
from .seeding import DOMAIN_NOISE, DOMAIN_SEQUENCE, DOMAIN_SHOTS, child_seed, rng_for

DEFAULT_LENGTHS = (2, 4, 8, 16, 32, 64, 128, 256)


@dataclass(frozen=True)
class RBConfig:
    """Inputs for one benchmarking run."""

    lengths: tuple = DEFAULT_LENGTHS
    n_sequences: int = 30
    shots: int = 1000
    coherence: CoherenceParams | None = None
    snr: object = None
    pulses: PulseSettings = field(default_factory=PulseSettings)
    seed: int = 0
    readout_error: float = 0.0
    dim: int = 2
    anharmonicity: float = DEFAULT_ANHARMONICITY
    decay21_rate: float | None = None

    def __post_init__(self):
        lengths = tuple(int(m) for m in self.lengths)
        object.__setattr__(self, "lengths", lengths)
        if not lengths:
            raise InvalidInputError("lengths must be non-empty")
        if any(m < 1 for m in lengths) or any(b <= a for a, b in zip(lengths, lengths[1:])):
            raise InvalidInputError(f"lengths must be increasing and >= 1, got {lengths}")
        if self.n_sequences < 2:
            raise InvalidInputError(f"need at least 2 sequences, got {self.n_sequences}")
        if self.shots < 1:
            raise InvalidInputError(f"need at least 1 shot, got {self.shots}")
        if not (0.0 <= self.readout_error <= 0.5):
            raise InvalidInputError(f"readout error must be in [0, 0.5], got {self.readout_error}")
        if self.dim not in (2, 3):
            raise InvalidInputError(f"dim must be 2 or 3, got {self.dim}")
        if self.snr_value is not None and not (self.snr_value > 0.0):
            raise InvalidInputError(f"SNR must be positive, got {self.snr_value}")

    @property
    def snr_value(self) -> float | None:
        """Linear SNR; accepts a number or an SnrSpec in the snr field."""
        if self.snr is None:
            return None
        if isinstance(self.snr, SnrSpec):
            return snr_linear(self.snr)
        return float(self.snr)


@dataclass(frozen=True)
class RBFit:
    """Parameters of P(m) = amplitude * decay^m + baseline."""

    amplitude: float
    baseline: float
    decay: float
    stderrs: tuple
    covariance: np.ndarray

    def __iter__(self):
        return iter((self.amplitude, self.baseline, self.decay, self.stderrs))

    @property
    def fidelity(self) -> float:
        return fidelity_from_p(self.decay)

    @property
    def fidelity_stderr(self) -> float:
        return self.stderrs[2] / 2.0

    @property
    def error_per_clifford(self) -> float:
        return (1.0 - self.decay) / 2.0


@dataclass(frozen=True)
class RBResult:
    """Survival data and decay fit for one benchmarking run."""

    lengths: tuple
    mean_survival: np.ndarray
    sem_survival: np.ndarray
    per_sequence: np.ndarray
    shots: int
    seed: int
    fit: RBFit | None
    fit_error: str | None = None

    @property
    def succeeded(self) -> bool:
        return self.fit is not None

    def _require_fit(self) -> RBFit:
        if self.fit is None:
            raise FitFailureError("run has no successful decay fit",
                                  diagnostics={"fit_error": self.fit_error,
                                               "lengths": list(self.lengths),
                                               "mean_survival": self.mean_survival.tolist()})
        return self.fit

    @property
    def fidelity(self) -> float:
        return self._require_fit().fidelity

    @property
    def fidelity_stderr(self) -> float:
        return self._require_fit().fidelity_stderr

    @property
    def error_per_clifford(self) -> float:
        return self._require_fit().error_per_clifford

    def to_json_dict(self) -> dict:
        fit = None
        if self.fit is not None:
            fit = {"amplitude": self.fit.amplitude, "baseline": self.fit.baseline,
                   "decay": self.fit.decay,
                   "stderr_amplitude": self.fit.stderrs[0],
                   "stderr_baseline": self.fit.stderrs[1],
                   "stderr_decay": self.fit.stderrs[2],
                   "fidelity": self.fit.fidelity,
                   "fidelity_stderr": self.fit.fidelity_stderr,
                   "error_per_clifford": self.fit.error_per_clifford}
        return {"lengths": list(self.lengths),
                "mean_survival": self.mean_survival.tolist(),
                "sem_survival": self.sem_survival.tolist(),
                "per_sequence": self.per_sequence.tolist(),
                "shots": self.shots, "seed": self.seed,
                "fit": fit, "fit_error": self.fit_error}

    def write_csv(self, path, header_lines=()) -> None:
        with open(path, "w") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write("m,mean_P,sem_P\n")
            for m, p, s in zip(self.lengths, self.mean_survival, self.sem_survival):
                fh.write(f"{m},{float(p)!r},{float(s)!r}\n")


def fidelity_from_p(p: float) -> float:
    """Average gate fidelity from the RB decay parameter (single qubit)."""
    if not (0.0 < p <= 1.0):
        raise InvalidInputError(f"decay parameter must be in (0, 1], got {p}")
    return 1.0 - (1.0 - p) / 2.0


def _decay_model(m, a, b, p):
    return a * np.power(p, m) + b


def fit_rb_decay(lengths, survivals, std_errs=None) -> RBFit:
    """Least-squares fit of P(m) = A*p^m + B with bounds 0<p<=1, 0<=B<=1.

    Initialization: B = min(P), A = max(P) - min(P), p from a log-linear
    regression of the positive residuals P - B.  Constant data short-circuits
    to an exact zero-amplitude fit (p = 1).
    """
    m = np.asarray(lengths, dtype=float)
    p_data = np.asarray(survivals, dtype=float)
    if m.ndim != 1 or m.shape != p_data.shape:
        raise InvalidInputError("lengths and survivals must be equal-length 1-d arrays")
    if np.unique(m).size < 3:
        raise InvalidInputError("need at least 3 distinct lengths to fit a decay")
    if not np.all(np.isfinite(p_data)):
        raise InvalidInputError("survival data contains non-finite values")
    if np.ptp(p_data) < 1e-12:
        level = float(p_data[0])
        return RBFit(amplitude=0.0, baseline=level, decay=1.0,
                     stderrs=(0.0, 0.0, 0.0), covariance=np.zeros((3, 3)))
    b0 = float(np.clip(p_data.min(), 0.0, 1.0))
    a0 = float(max(p_data.max() - p_data.min(), 1e-9))
    resid = p_data - b0
    mask = resid > 0
    if mask.sum() >= 2:
        slope = np.polyfit(m[mask], np.log(resid[mask]), 1)[0]
        p0 = float(np.clip(np.exp(slope), 1e-6, 1.0))
    else:
        p0 = 0.99
    sigma = None
    if std_errs is not None:
        sigma = np.asarray(std_errs, dtype=float)
        if sigma.shape != p_data.shape or not np.all(sigma > 0):
            sigma = None
    init = (a0, b0, p0)
    try:
        params, cov = curve_fit(_decay_model, m, p_data, p0=init, sigma=sigma,
                                absolute_sigma=sigma is not None,
                                bounds=([0.0, 0.0, 1e-12], [np.inf, 1.0, 1.0]),
                                maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitFailureError(
            f"decay fit did not converge: {exc}",
            diagnostics={"lengths": m.tolist(), "survivals": p_data.tolist(),
                         "init": list(init), "message": str(exc)}) from exc
    errs = tuple(float(x) for x in np.sqrt(np.clip(np.diag(cov), 0.0, np.inf)))
    return RBFit(amplitude=float(params[0]), baseline=float(params[1]),
                 decay=float(params[2]), stderrs=errs, covariance=cov)


_ENVELOPE_SUPEROPS = {}


def _envelope_superops(config: RBConfig) -> np.ndarray:
    """Whole-envelope propagators for the four grid phases, shape (4, d^2, d^2)."""
    key = (config.pulses, config.coherence, config.dim, config.anharmonicity,
           config.decay21_rate)
    if key not in _ENVELOPE_SUPEROPS:
        base = config.pulses.base_envelope()
        magnitude = np.abs(base.samples)
        stack = []
        for quarter in range(4):
            amps = magnitude * np.exp(1j * quarter * math.pi / 2.0)
            mats = step_propagators(amps, base.sample_period, base.rabi_scale,
                                    detuning=config.pulses.detuning,
                                    coherence=config.coherence, dim=config.dim,
                                    anharmonicity=config.anharmonicity,
                                    decay21_rate=config.decay21_rate)
            stack.append(ordered_product(mats))
        _ENVELOPE_SUPEROPS[key] = np.stack(stack)
    return _ENVELOPE_SUPEROPS[key]


def _survival_probability(config: RBConfig, length_index: int, seq_index: int) -> float:
    """Ground-state survival for one compiled sequence (before shot sampling)."""
    m = config.lengths[length_index]
    seq_seed = child_seed(config.seed, DOMAIN_SEQUENCE, length_index, seq_index)
    sequence = random_sequence(m, seq_seed)
    if config.snr_value is None:
        superops = _envelope_superops(config)
        quarters = compiled_phase_quarters(sequence)
        if not quarters:
            return 1.0
        total = ordered_product(superops[np.asarray(quarters, dtype=np.intp)])
        return float(total[0, 0].real)
    schedule = compile_sequence(sequence, config.pulses)
    noise = None
    if schedule.n_samples:
        rms = noise_rms_for_snr(config.snr_value, config.pulses.base_envelope().signal_rms())
        noise_seed = child_seed(config.seed, DOMAIN_NOISE, length_index, seq_index)
        noise = white_noise(noise_seed, rms, schedule.n_samples)
    rho0 = DensityMatrix.ground(config.dim)
    prop = evolve(rho0, schedule, coherence=config.coherence, noise=noise,
                  keep_trajectory=False, anharmonicity=config.anharmonicity,
                  decay21_rate=config.decay21_rate)
    return prop.final.population(0)


def _task(args) -> float:
    return _survival_probability(*args)


def run_rb(config: RBConfig, n_jobs: int | None = None) -> RBResult:
    """Run the full protocol; fit failures are reported in the result, not raised."""
    if isinstance(config, dict):
        config = RBConfig(**config)
    tasks = [(config, li, s) for li in range(len(config.lengths))
             for s in range(config.n_sequences)]
    if n_jobs is not None and n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            chunk = max(1, len(tasks) // (4 * n_jobs))
            probs = list(pool.map(_task, tasks, chunksize=chunk))
    else:
        probs = [_task(t) for t in tasks]
    per_sequence = np.empty((len(config.lengths), config.n_sequences))
    e = config.readout_error
    for (_, li, s), prob in zip(tasks, probs):
        p_meas = np.clip(prob * (1.0 - e) + (1.0 - prob) * e, 0.0, 1.0)
        # binomial draw by uniform thresholding: the same seed couples shot
        # outcomes monotonically in p across parameter sweeps
        draws = rng_for(config.seed, DOMAIN_SHOTS, li, s).random(config.shots)
        per_sequence[li, s] = int((draws < p_meas).sum()) / config.shots
    mean = per_sequence.mean(axis=1)
    sem = per_sequence.std(axis=1, ddof=1) / math.sqrt(config.n_sequences)
    try:
        fit = fit_rb_decay(config.lengths, mean, std_errs=sem)
        fit_error = None
    except FitFailureError as exc:
        fit, fit_error = None, str(exc)
    return RBResult(lengths=config.lengths, mean_survival=mean, sem_survival=sem,
                    per_sequence=per_sequence, shots=config.shots, seed=config.seed,
                    fit=fit, fit_error=fit_error)


@dataclass(frozen=True)
class CalibrationResult:
    """Outcome of the gate-duration sweep against a target fidelity."""

    duration: float
    fidelity: float
    fidelity_stderr: float
    target: float
    sweep: tuple

    def to_json_dict(self) -> dict:
        return {"duration_s": self.duration, "fidelity": self.fidelity,
                "fidelity_stderr": self.fidelity_stderr, "target": self.target,
                "sweep": [{"duration_s": d, "fidelity": f} for d, f in self.sweep]}


def calibrate_duration(target_fidelity: float, config: RBConfig,
                       bracket: tuple = (10e-9, 40e-9), iterations: int = 20,
                       n_jobs: int | None = None) -> CalibrationResult:
    """Bisect the half-pi duration so the run fidelity matches the target.

    Fidelity from decoherence alone falls monotonically with gate duration;
    the sweep holds every seed fixed so the objective is deterministic.
    Raises if the target is outside the bracket's fidelity range.
    """
    if not (0.5 < target_fidelity < 1.0):
        raise InvalidInputError(f"target fidelity must be in (0.5, 1), got {target_fidelity}")

    history = []

    def fidelity_at(duration: float) -> float:
        cfg = replace(config, pulses=replace(config.pulses, duration=duration))
        result = run_rb(cfg, n_jobs=n_jobs)
        history.append((duration, result.fidelity, result.fidelity_stderr))
        return result.fidelity

    lo, hi = bracket
    f_lo, f_hi = fidelity_at(lo), fidelity_at(hi)
    if not (f_hi <= target_fidelity <= f_lo):
        raise InvalidInputError(
            f"target {target_fidelity} outside bracket fidelities [{f_hi}, {f_lo}]")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        f_mid = fidelity_at(mid)
        if f_mid >= target_fidelity:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if abs(f_mid - target_fidelity) < 1e-6:
            break
    best = min(history, key=lambda entry: abs(entry[1] - target_fidelity))
    return CalibrationResult(duration=best[0], fidelity=best[1], fidelity_stderr=best[2],
                             target=target_fidelity,
                             sweep=tuple((d, f) for d, f, _ in sorted(history)))
