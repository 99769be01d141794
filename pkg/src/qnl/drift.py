"""Qubit-frequency drift: synthesis, Ramsey tracking, spectral statistics.

The drift model is a one-sided PSD S(f) = pink_coefficient/f + white_level.
Synthesis draws independent Gaussian spectral coefficients with the exact
per-bin variance implied by S, so the realized PSD is calibrated at every
frequency, not just asymptotically.  Traces are exactly zero-mean (the DC
bin is zeroed and the white stream is centered).

Frequency tracking follows the quasi-static picture: drift is frozen during
any single fringe scan, one Ramsey estimate per cadence interval.  The
estimator fits a decaying cosine with T2 held at its configured value and
the frequency initialized from an FFT peak.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import curve_fit
from scipy.signal import welch

from .dynamics import CoherenceParams, _batched_hamiltonians, liouvillian
from .errors import FitFailureError, InvalidInputError
from .pulses import PulseSchedule
from .rb import RBConfig, run_rb
from .seeding import DOMAIN_DRIFT, DOMAIN_SHOTS, child_seed, rng_for

TRACE_SOURCES = ("qubit", "controller")


@dataclass(frozen=True)
class FrequencyTrace:
    """Sampled qubit- or controller-frequency offset from nominal, in Hz."""

    times: np.ndarray
    frequency_offsets: np.ndarray
    source: str = "qubit"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        f = np.asarray(self.frequency_offsets, dtype=float)
        if t.ndim != 1 or t.shape != f.shape:
            raise InvalidInputError("times and offsets must be equal-length 1-d arrays")
        if t.size >= 2 and not np.all(np.diff(t) > 0):
            raise InvalidInputError("times must be strictly increasing")
        if self.source not in TRACE_SOURCES:
            raise InvalidInputError(f"source must be one of {TRACE_SOURCES}, got {self.source!r}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "frequency_offsets", f)

    @property
    def n_samples(self) -> int:
        return self.times.size

    @property
    def sample_period(self) -> float:
        if self.times.size < 2:
            raise InvalidInputError("need at least 2 samples for a sample period")
        return float(self.times[1] - self.times[0])

    def to_csv(self, path, header_lines=()) -> None:
        with open(path, "w") as fh:
            fh.write(f"# frequency trace, source={self.source}, offsets in Hz\n")
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write("time_s,offset_hz\n")
            for t, f in zip(self.times, self.frequency_offsets):
                fh.write(f"{float(t)!r},{float(f)!r}\n")

    @classmethod
    def from_csv(cls, path, source: str = "qubit") -> "FrequencyTrace":
        times, offsets = [], []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#") or line.startswith("time_s"):
                    continue
                t, f = line.split(",")[:2]
                times.append(float(t))
                offsets.append(float(f))
        return cls(times=np.array(times), frequency_offsets=np.array(offsets), source=source)


@dataclass(frozen=True)
class NoiseModel1f:
    """One-sided PSD model S(f) = pink_coefficient/f + white_level (Hz^2/Hz)."""

    white_level: float
    pink_coefficient: float

    def __post_init__(self):
        if self.white_level < 0 or self.pink_coefficient < 0:
            raise InvalidInputError("PSD coefficients must be >= 0")
        if self.white_level == 0 and self.pink_coefficient == 0:
            raise InvalidInputError("noise model cannot be identically zero")

    def psd(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if np.any(f <= 0):
            raise InvalidInputError("PSD defined for f > 0 only")
        return self.pink_coefficient / f + self.white_level

    @property
    def corner_hz(self) -> float:
        """Frequency where the pink and white contributions are equal."""
        if self.white_level == 0:
            return math.inf
        return self.pink_coefficient / self.white_level

    @classmethod
    def tuned(cls, target_sigma: float, duration: float, sample_period: float,
              corner_hz: float | None = None) -> "NoiseModel1f":
        """Model whose synthesized trace has expected sample std = target_sigma.

        corner_hz defaults to Nyquist/8 so the pink term dominates over most
        of the observable band.  The expected variance is computed from the
        same bin sum the synthesizer realizes, so the calibration is exact in
        expectation (individual realizations fluctuate, hardest at low f).
        """
        if not (target_sigma > 0):
            raise InvalidInputError(f"target sigma must be positive, got {target_sigma}")
        n = _trace_length(duration, sample_period)
        nyquist = 0.5 / sample_period
        if corner_hz is None:
            corner_hz = nyquist / 8.0
        if not (corner_hz > 0):
            raise InvalidInputError(f"corner must be positive, got {corner_hz}")
        # pink variance per unit coefficient, matching the synthesis bins
        k = np.arange(1, n // 2 + (0 if n % 2 == 0 else 1))
        pink_unit = float(np.sum(1.0 / k))
        if n % 2 == 0:
            pink_unit += 0.5 / (n // 2)
        pink_unit *= n / (n - 1)
        white_unit = nyquist / corner_hz
        coeff = target_sigma ** 2 / (pink_unit + white_unit)
        return cls(white_level=coeff / corner_hz, pink_coefficient=coeff)


def _trace_length(duration: float, sample_period: float) -> int:
    if not (sample_period > 0):
        raise InvalidInputError(f"sample period must be positive, got {sample_period}")
    if duration < 100.0 * sample_period:
        raise InvalidInputError("duration must cover at least 100 samples")
    return int(round(duration / sample_period))


def synthesize_drift(model: NoiseModel1f, duration: float, sample_period: float,
                     seed: int, source: str = "qubit") -> FrequencyTrace:
    """Zero-mean trace whose one-sided PSD realizes the model at every bin.

    The pink component is drawn in the frequency domain with per-bin variance
    n*S(f_k)/(2*dt) (DC zeroed, so the sample mean is exactly zero); the white
    component is drawn in the time domain with variance white_level/(2*dt) and
    centered.
    """
    if not isinstance(model, NoiseModel1f):
        raise InvalidInputError("model must be a NoiseModel1f")
    n = _trace_length(duration, sample_period)
    rng = np.random.default_rng(int(seed))
    spectrum = np.zeros(n // 2 + 1, dtype=complex)
    freqs = np.fft.rfftfreq(n, d=sample_period)
    if model.pink_coefficient > 0:
        sigma = np.sqrt(n * (model.pink_coefficient / freqs[1:]) / (2.0 * sample_period))
        interior = slice(1, spectrum.size - 1) if n % 2 == 0 else slice(1, spectrum.size)
        n_int = spectrum[interior].size
        spectrum[interior] = sigma[:n_int] * (
            rng.standard_normal(n_int) + 1j * rng.standard_normal(n_int)) / math.sqrt(2.0)
        if n % 2 == 0:
            spectrum[-1] = sigma[-1] * rng.standard_normal()
    pink = np.fft.irfft(spectrum, n)
    white = np.zeros(n)
    if model.white_level > 0:
        white = rng.standard_normal(n) * math.sqrt(model.white_level / (2.0 * sample_period))
        white -= white.mean()
    times = np.arange(n) * sample_period
    return FrequencyTrace(times=times, frequency_offsets=pink + white, source=source)


def drift_sigma(trace: FrequencyTrace) -> float:
    """Sample standard deviation of the trace offsets (gap samples ignored)."""
    offsets = trace.frequency_offsets
    if offsets.size < 100:
        raise InvalidInputError(f"need at least 100 samples, got {offsets.size}")
    return float(np.nanstd(offsets, ddof=1))


@dataclass(frozen=True)
class PsdEstimate:
    """One-sided Welch PSD, DC excluded."""

    frequencies: np.ndarray
    power: np.ndarray
    segment_length: int
    overlap_fraction: float

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        p = np.asarray(self.power, dtype=float)
        if f.shape != p.shape or f.ndim != 1:
            raise InvalidInputError("frequencies and power must be equal-length 1-d arrays")
        if f.size and (f[0] <= 0 or np.any(np.diff(f) <= 0)):
            raise InvalidInputError("frequencies must be increasing and exclude DC")
        if np.any(p < 0):
            raise InvalidInputError("power must be non-negative")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "power", p)

    def integrated_power(self) -> float:
        """Sum of PSD * bin width; approximates the sample variance."""
        df = self.frequencies[1] - self.frequencies[0]
        return float(np.sum(self.power) * df)

    def to_csv(self, path, header_lines=()) -> None:
        with open(path, "w") as fh:
            fh.write(f"# Welch PSD, Hann window, segment={self.segment_length}, "
                     f"overlap={self.overlap_fraction}\n")
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write("freq_hz,psd\n")
            for f, p in zip(self.frequencies, self.power):
                fh.write(f"{float(f)!r},{float(p)!r}\n")


def _previous_power_of_two(k: int) -> int:
    return 1 << max(k, 1).bit_length() - 1


def welch_psd(samples, sample_period: float, segment_length: int | None = None,
              overlap_fraction: float = 0.5) -> PsdEstimate:
    """Hann-windowed averaged periodogram; default segment is ~n/8 (power of two)."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1:
        raise InvalidInputError("samples must be a 1-d array")
    if not (sample_period > 0):
        raise InvalidInputError(f"sample period must be positive, got {sample_period}")
    if segment_length is None:
        segment_length = _previous_power_of_two(max(x.size // 8, 8))
    if segment_length < 8 or x.size < segment_length:
        raise InvalidInputError(
            f"need segment_length >= 8 and n >= segment_length, got {segment_length}, n={x.size}")
    if segment_length & (segment_length - 1):
        raise InvalidInputError(f"segment_length must be a power of two, got {segment_length}")
    if not (0.0 <= overlap_fraction <= 0.9):
        raise InvalidInputError(f"overlap fraction must be in [0, 0.9], got {overlap_fraction}")
    freqs, power = welch(x, fs=1.0 / sample_period, window="hann", nperseg=segment_length,
                         noverlap=int(overlap_fraction * segment_length),
                         detrend="constant", scaling="density")
    return PsdEstimate(frequencies=freqs[1:], power=power[1:],
                       segment_length=segment_length, overlap_fraction=overlap_fraction)


def psd_slope(psd: PsdEstimate, f_min: float | None = None,
              f_max: float | None = None) -> float:
    """Log-log slope of the PSD over an optional band."""
    mask = np.ones(psd.frequencies.size, dtype=bool)
    if f_min is not None:
        mask &= psd.frequencies >= f_min
    if f_max is not None:
        mask &= psd.frequencies <= f_max
    mask &= psd.power > 0
    if mask.sum() < 4:
        raise InvalidInputError("need at least 4 usable bins for a slope fit")
    return float(np.polyfit(np.log(psd.frequencies[mask]), np.log(psd.power[mask]), 1)[0])


def fit_noise_model(psd: PsdEstimate) -> NoiseModel1f:
    """Least-squares log-log decomposition of a PSD into pink + white parts."""
    f = psd.frequencies
    s = psd.power
    good = s > 0
    if good.sum() < 4:
        raise InvalidInputError("need at least 4 positive PSD bins")
    f, s = f[good], s[good]
    lc0 = math.log(max(s[0] * f[0], 1e-300))
    lw0 = math.log(max(s[-1], 1e-300))

    def log_model(freq, lc, lw):
        return np.log(np.exp(lc) / freq + np.exp(lw))

    try:
        params, _ = curve_fit(log_model, f, np.log(s), p0=(lc0, lw0), maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitFailureError(f"PSD decomposition failed: {exc}",
                              diagnostics={"freqs": f.tolist(), "psd": s.tolist()}) from exc
    return NoiseModel1f(white_level=float(np.exp(params[1])),
                        pink_coefficient=float(np.exp(params[0])))


def simulate_ramsey(delays, detuning: float, coherence: CoherenceParams,
                    frequency_offset: float = 0.0, pulses=None) -> np.ndarray:
    """Excited-state probability after pi/2 - wait(tau) - pi/2 for each delay.

    detuning and frequency_offset are in Hz and add.  With instantaneous
    pulses (pulses=None) the result is the exact analytic fringe
    0.5*(1 + exp(-tau/T2)*cos(2*pi*df*tau)); passing PulseSettings switches
    to full Lindblad propagation with finite drive segments.
    """
    tau = np.asarray(delays, dtype=float)
    if tau.ndim != 1 or tau.size == 0:
        raise InvalidInputError("delays must be a non-empty 1-d array")
    if np.any(tau < 0) or (tau.size >= 2 and np.any(np.diff(tau) <= 0)):
        raise InvalidInputError("delays must be >= 0 and strictly increasing")
    df = float(detuning) + float(frequency_offset)
    if pulses is None:
        return 0.5 * (1.0 + np.exp(-tau / coherence.t2) * np.cos(2.0 * math.pi * df * tau))
    from scipy.linalg import expm

    from .dynamics import DensityMatrix, ordered_product, step_propagators
    delta = 2.0 * math.pi * df
    base = pulses.base_envelope()
    props = step_propagators(base.samples, base.sample_period, base.rabi_scale,
                             detuning=delta, coherence=coherence)
    half_pi = ordered_product(props)
    h_idle = _batched_hamiltonians(np.zeros(1, complex), 0.0, delta, 2,
                                   0.0)[0]
    l_idle = liouvillian(h_idle, coherence)
    rho0 = DensityMatrix.ground().matrix.ravel()
    idle = expm(l_idle[None, :, :] * tau[:, None, None])
    out = np.empty(tau.size)
    start = half_pi @ rho0
    for j in range(tau.size):
        vec = half_pi @ (idle[j] @ start)
        out[j] = vec.reshape(2, 2)[1, 1].real
    return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class FringeFit:
    """Decaying-cosine fit a*exp(-tau/T2)*cos(2*pi*f*tau + phase) + offset."""

    frequency: float
    phase: float
    amplitude: float
    offset: float
    stderrs: tuple
    covariance: np.ndarray

    @property
    def frequency_stderr(self) -> float:
        return self.stderrs[0]


def fit_fringe(delays, probabilities, t2: float) -> FringeFit:
    """Fit one Ramsey fringe; T2 is held fixed, frequency seeded by FFT peak."""
    tau = np.asarray(delays, dtype=float)
    y = np.asarray(probabilities, dtype=float)
    if tau.shape != y.shape or tau.size < 8:
        raise InvalidInputError("need >= 8 fringe samples")
    if not (t2 > 0):
        raise InvalidInputError(f"t2 must be positive, got {t2}")
    step = tau[1] - tau[0]
    padded = np.fft.rfft((y - y.mean()) * np.hanning(tau.size), n=8 * tau.size)
    freqs = np.fft.rfftfreq(8 * tau.size, d=step)
    peak = 1 + int(np.argmax(np.abs(padded[1:])))
    f0 = freqs[peak]
    phi0 = float(np.angle(padded[peak]))
    a0 = max(2.0 * np.abs(padded[peak]) / tau.size, 1e-3)
    c0 = float(y.mean())

    def model(t, f, phi, a, c):
        return a * np.exp(-t / t2) * np.cos(2.0 * math.pi * f * t + phi) + c

    nyquist = 0.5 / step
    init = (min(max(f0, 1e-6), 1.5 * nyquist), phi0, min(a0, 2.0), c0)
    try:
        params, cov = curve_fit(model, tau, y, p0=init,
                                bounds=([0.0, -2.0 * math.pi, -2.0, -1.0],
                                        [1.5 * nyquist, 2.0 * math.pi, 2.0, 2.0]),
                                maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitFailureError(f"fringe fit failed: {exc}",
                              diagnostics={"delays": tau.tolist(), "data": y.tolist(),
                                           "init": list(init)}) from exc
    errs = tuple(float(v) for v in np.sqrt(np.clip(np.diag(cov), 0.0, np.inf)))
    return FringeFit(frequency=float(params[0]), phase=float(params[1]),
                     amplitude=float(params[2]), offset=float(params[3]),
                     stderrs=errs, covariance=cov)


@dataclass(frozen=True)
class RamseyConfig:
    """Per-estimate fringe scan settings for the frequency tracker."""

    coherence: CoherenceParams
    detuning_hz: float = 1e6
    max_delay_s: float = 18e-6
    n_delays: int = 61
    shots: int | None = None
    cadence_s: float = 30.0
    seed: int = 0

    def __post_init__(self):
        if self.n_delays < 8:
            raise InvalidInputError(f"need >= 8 delays, got {self.n_delays}")
        if not (self.max_delay_s > 0 and self.cadence_s > 0 and self.detuning_hz > 0):
            raise InvalidInputError("delay, cadence, and detuning must be positive")
        if self.shots is not None and self.shots < 1:
            raise InvalidInputError(f"shots must be >= 1 or None, got {self.shots}")

    def delays(self) -> np.ndarray:
        return np.linspace(0.0, self.max_delay_s, self.n_delays)


@dataclass(frozen=True)
class TrackingResult:
    """Estimated frequency trace plus the synthesized ground truth."""

    estimated: FrequencyTrace
    truth: FrequencyTrace
    gaps: tuple

    @property
    def n_gaps(self) -> int:
        return len(self.gaps)


def track_frequency(model: NoiseModel1f, run_duration_hours: float,
                    ramsey: RamseyConfig) -> TrackingResult:
    """Estimate the drift trace by repeated Ramsey fringe fits.

    One estimate per cadence interval; drift is frozen within each scan
    (quasi-static).  A failed fringe fit is flagged as a gap (NaN in the
    estimated trace), never fatal.
    """
    if not (run_duration_hours >= 1.0):
        raise InvalidInputError(f"run duration must be >= 1 h, got {run_duration_hours}")
    duration_s = run_duration_hours * 3600.0
    truth = synthesize_drift(model, duration_s, ramsey.cadence_s,
                             seed=child_seed(ramsey.seed, DOMAIN_DRIFT, 0))
    delays = ramsey.delays()
    estimated = np.empty(truth.n_samples)
    gaps = []
    for i, offset in enumerate(truth.frequency_offsets):
        probs = simulate_ramsey(delays, ramsey.detuning_hz, ramsey.coherence, offset)
        if ramsey.shots is not None:
            rng = rng_for(ramsey.seed, DOMAIN_SHOTS, i)
            probs = rng.binomial(ramsey.shots, probs) / ramsey.shots
        try:
            fit = fit_fringe(delays, probs, ramsey.coherence.t2)
            estimated[i] = fit.frequency - ramsey.detuning_hz
        except FitFailureError:
            estimated[i] = math.nan
            gaps.append(i)
    est_trace = FrequencyTrace(times=truth.times.copy(), frequency_offsets=estimated,
                               source=truth.source)
    return TrackingResult(estimated=est_trace, truth=truth, gaps=tuple(gaps))


class DetuningPoint(NamedTuple):
    offset_hz: float
    fidelity: float
    fidelity_stderr: float


def fidelity_vs_detuning(offsets, rb_config: RBConfig,
                         n_jobs: int | None = None) -> list:
    """Benchmarking fidelity with the drive carrier held off-resonance.

    Every point reuses the same master seed, so sequences and shot draws are
    common across offsets and the fidelity differences isolate the detuning.
    """
    from dataclasses import replace
    points = []
    for offset in offsets:
        delta = 2.0 * math.pi * float(offset)
        cfg = replace(rb_config, pulses=replace(rb_config.pulses, detuning=delta))
        result = run_rb(cfg, n_jobs=n_jobs)
        points.append(DetuningPoint(offset_hz=float(offset), fidelity=result.fidelity,
                                    fidelity_stderr=result.fidelity_stderr))
    return points
