"""Control-pulse envelopes, seeded noise processes, and SNR bookkeeping.

SNR here is defined in the rotating frame as (signal RMS power) / (total
injected quadrature-noise power): a target linear SNR s converts to a
per-quadrature noise RMS of signal_rms/sqrt(s), in the same dimensionless
units as the peak-normalized envelope.  The dBm/bandwidth fields of SnrSpec
are bookkeeping that maps lab power readings onto that ratio; the scaling
between DAC-referred and qubit-referred noise is a single config factor
(default 1) documented in the CLI module.

Noise streams are circularly symmetric (independent Gaussian in-phase and
quadrature components), so injecting them in the pulse frame or the lab frame
is statistically identical; the integrator uses the pulse frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

ENVELOPE_SHAPES = ("square", "gaussian", "cosine")


@dataclass(frozen=True)
class PulseSchedule:
    """Sampled complex drive envelope V(t)*e^{i*phi} plus frame metadata.

    samples are peak-normalized (|samples| <= 1); rabi_scale maps unit
    amplitude to the Rabi rate Omega_R in rad/s; detuning is the carrier
    offset dw in rad/s.  segment_phases/segment_bounds record the per-pulse
    phase offsets used for virtual-Z bookkeeping.
    """

    samples: np.ndarray
    sample_period: float
    rabi_scale: float
    detuning: float = 0.0
    segment_phases: np.ndarray = None
    segment_bounds: np.ndarray = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        object.__setattr__(self, "samples", samples)
        if not (self.sample_period > 0.0):
            raise InvalidInputError(f"sample period must be positive, got {self.sample_period}")
        if samples.size and np.abs(samples).max() > 1.0 + 1e-12:
            raise InvalidInputError("envelope samples must be peak-normalized (|V| <= 1)")
        if self.segment_phases is None:
            object.__setattr__(self, "segment_phases", np.zeros(1))
            object.__setattr__(self, "segment_bounds", np.array([0, samples.size]))
        else:
            phases = np.atleast_1d(np.asarray(self.segment_phases, dtype=float))
            bounds = np.asarray(self.segment_bounds, dtype=int)
            if bounds.shape != (phases.size + 1,) or bounds[0] != 0 or bounds[-1] != samples.size:
                raise InvalidInputError("segment bounds must cover the sample array")
            if (np.diff(bounds) < 0).any():
                raise InvalidInputError("segment bounds must be non-decreasing")
            object.__setattr__(self, "segment_phases", phases)
            object.__setattr__(self, "segment_bounds", bounds)

    @property
    def n_samples(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size * self.sample_period

    @property
    def times(self) -> np.ndarray:
        """Midpoint sample times."""
        return (np.arange(self.samples.size) + 0.5) * self.sample_period

    def phase_per_sample(self) -> np.ndarray:
        out = np.zeros(self.samples.size)
        for k, phase in enumerate(self.segment_phases):
            out[self.segment_bounds[k]:self.segment_bounds[k + 1]] = phase
        return out

    def envelope(self) -> np.ndarray:
        return np.abs(self.samples)

    def signal_rms(self) -> float:
        """RMS of the envelope magnitude over the schedule."""
        if self.samples.size == 0:
            return 0.0
        return float(np.sqrt(np.mean(np.abs(self.samples) ** 2)))

    def rotation_angle(self) -> float:
        """Integrated rotation angle 2*Omega_R*integral(V dt) in radians."""
        return float(2.0 * self.rabi_scale * np.sum(np.abs(self.samples)) * self.sample_period)

    def to_csv(self, path, component: str = "abs") -> None:
        """Write (time_s, value) columns; component in {abs, re, im}."""
        pick = {"abs": np.abs, "re": np.real, "im": np.imag}
        if component not in pick:
            raise InvalidInputError(f"unknown component {component!r}")
        values = pick[component](self.samples)
        with open(path, "w") as fh:
            fh.write(f"# pulse envelope ({component}), sample_period_s={self.sample_period}\n")
            fh.write("time_s,value\n")
            for t, v in zip(self.times, values):
                fh.write(f"{float(t)!r},{float(v)!r}\n")


def concatenate_schedules(schedules) -> PulseSchedule:
    """Join back-to-back schedules that share sample period, scale, and detuning."""
    schedules = [s for s in schedules]
    if not schedules:
        raise InvalidInputError("need at least one schedule")
    first = schedules[0]
    active = [s for s in schedules if s.n_samples]
    ref = active[0] if active else first
    for s in active:
        if not math.isclose(s.sample_period, ref.sample_period, rel_tol=1e-12):
            raise InvalidInputError("sample periods differ across concatenated schedules")
        if not math.isclose(s.rabi_scale, ref.rabi_scale, rel_tol=1e-9):
            raise InvalidInputError("rabi scales differ across concatenated schedules")
        if not math.isclose(s.detuning, ref.detuning, rel_tol=1e-12, abs_tol=1e-15):
            raise InvalidInputError("detunings differ across concatenated schedules")
    samples = np.concatenate([s.samples for s in active]) if active else np.zeros(0, complex)
    phases, bounds, offset = [], [0], 0
    for s in active:
        for kilo, phase in enumerate(s.segment_phases):
            lo, hi = s.segment_bounds[kilo], s.segment_bounds[kilo + 1]
            if hi > lo:
                phases.append(phase)
                bounds.append(offset + hi)
        offset += s.n_samples
    if not phases:
        phases, bounds = [0.0], [0, 0]
    return PulseSchedule(samples=samples, sample_period=ref.sample_period,
                         rabi_scale=ref.rabi_scale, detuning=ref.detuning,
                         segment_phases=np.array(phases), segment_bounds=np.array(bounds))


def make_envelope(shape: str, duration: float, area: float, sample_period: float,
                  phase: float = 0.0, detuning: float = 0.0) -> PulseSchedule:
    """Peak-normalized envelope whose integrated rotation angle equals area.

    The discrete midpoint quadrature is normalized exactly:
    2 * rabi_scale * sum(V_k) * dt = area, so the requested angle is met to
    machine precision at any sample rate.  The gaussian shape has sigma =
    duration/4 (support truncated at +-2 sigma); cosine is a Hann lobe.
    """
    if shape not in ENVELOPE_SHAPES:
        raise InvalidInputError(f"unknown envelope shape {shape!r}")
    if not (sample_period > 0.0):
        raise InvalidInputError(f"sample period must be positive, got {sample_period}")
    if duration < 2.0 * sample_period:
        raise InvalidInputError(
            f"duration {duration} too short to resolve at sample period {sample_period}")
    if area < 0.0:
        raise InvalidInputError(f"area must be >= 0, got {area}")
    n = int(round(duration / sample_period))
    t = (np.arange(n) + 0.5) * sample_period
    if area == 0.0:
        return PulseSchedule(samples=np.zeros(n, dtype=complex), sample_period=sample_period,
                             rabi_scale=0.0, detuning=detuning,
                             segment_phases=np.array([phase]), segment_bounds=np.array([0, n]))
    if shape == "square":
        v = np.ones(n)
    elif shape == "gaussian":
        sigma = duration / 4.0
        v = np.exp(-((t - duration / 2.0) ** 2) / (2.0 * sigma ** 2))
    else:
        v = np.sin(np.pi * t / duration) ** 2
    v = v / v.max()
    rabi_scale = area / (2.0 * v.sum() * sample_period)
    return PulseSchedule(samples=v * np.exp(1j * phase), sample_period=sample_period,
                         rabi_scale=rabi_scale, detuning=detuning,
                         segment_phases=np.array([phase]), segment_bounds=np.array([0, n]))


@dataclass(frozen=True)
class NoiseRealization:
    """Seeded in-phase/quadrature noise streams in envelope units."""

    seed: int
    in_phase: np.ndarray
    quadrature: np.ndarray
    rms: float
    kind: str = "white"

    def __post_init__(self):
        i = np.asarray(self.in_phase, dtype=float)
        q = np.asarray(self.quadrature, dtype=float)
        if i.shape != q.shape or i.ndim != 1:
            raise InvalidInputError("in-phase and quadrature streams must be equal-length 1-d")
        object.__setattr__(self, "in_phase", i)
        object.__setattr__(self, "quadrature", q)

    @property
    def length(self) -> int:
        return self.in_phase.size

    def mean_power(self) -> float:
        """Sample mean of (I^2 + Q^2)/2; approximates rms^2 for long streams."""
        return float(np.mean(self.in_phase ** 2 + self.quadrature ** 2) / 2.0)

    def scaled(self, rms: float) -> "NoiseRealization":
        """Same underlying streams rescaled to a new RMS (rms=0 zeroes them)."""
        if self.rms == 0.0:
            raise InvalidInputError("cannot rescale a zero-RMS realization")
        factor = rms / self.rms
        return NoiseRealization(seed=self.seed, in_phase=self.in_phase * factor,
                                quadrature=self.quadrature * factor, rms=rms, kind=self.kind)

    def to_csv(self, path, stream: str = "in_phase", sample_period: float = 1.0) -> None:
        """Write (time_s, value) columns for one stream."""
        if stream not in ("in_phase", "quadrature"):
            raise InvalidInputError(f"unknown stream {stream!r}")
        values = getattr(self, stream)
        with open(path, "w") as fh:
            fh.write(f"# noise stream {stream}, kind={self.kind}, rms={float(self.rms)!r}, "
                     f"seed={self.seed}\n")
            fh.write("time_s,value\n")
            for k, v in enumerate(values):
                fh.write(f"{(k + 0.5) * sample_period!r},{float(v)!r}\n")


def white_noise(seed: int, rms: float, n: int) -> NoiseRealization:
    """Independent zero-mean Gaussian quadrature streams, each with std rms."""
    if rms < 0.0:
        raise InvalidInputError(f"rms must be >= 0, got {rms}")
    if n < 1:
        raise InvalidInputError(f"need at least one sample, got n={n}")
    rng = np.random.default_rng(int(seed))
    in_phase = rng.standard_normal(n) * rms
    quadrature = rng.standard_normal(n) * rms
    return NoiseRealization(seed=int(seed), in_phase=in_phase, quadrature=quadrature,
                            rms=float(rms), kind="white")


def pink_noise(seed: int, n: int, sample_period: float, amplitude: float) -> np.ndarray:
    """Zero-mean 1/f stream synthesized by FFT spectral shaping.

    White spectral coefficients are shaped by a 1/sqrt(f) magnitude (DC bin
    zeroed) and inverse-transformed; the result is rescaled so its sample
    standard deviation equals amplitude.  The log-log PSD slope is -1
    regardless of sample_period, which only labels the frequency axis.
    """
    if n < 64 or (n & (n - 1)) != 0:
        raise InvalidInputError(f"n must be a power of two >= 64, got {n}")
    if not (sample_period > 0.0):
        raise InvalidInputError(f"sample period must be positive, got {sample_period}")
    rng = np.random.default_rng(int(seed))
    spectrum = np.fft.rfft(rng.standard_normal(n))
    k = np.arange(spectrum.size, dtype=float)
    k[0] = 1.0
    spectrum = spectrum / np.sqrt(k)
    spectrum[0] = 0.0
    stream = np.fft.irfft(spectrum, n)
    if amplitude == 0.0:
        return np.zeros(n)
    return stream * (amplitude / stream.std())


@dataclass(frozen=True)
class SnrSpec:
    """Lab-referred SNR bookkeeping: dBm powers at the combiner.

    linear SNR = 10^((signal + gain - noise)/10); noise_power_dbm is the RMS
    noise power within bandwidth_hz.
    """

    noise_power_dbm: float
    signal_power_dbm: float = -14.77
    gain_db: float = 15.5
    bandwidth_hz: float = 100e6

    def __post_init__(self):
        if not (self.bandwidth_hz > 0.0):
            raise InvalidInputError(f"bandwidth must be positive, got {self.bandwidth_hz}")


def snr_db(spec: SnrSpec) -> float:
    return spec.signal_power_dbm + spec.gain_db - spec.noise_power_dbm


def snr_linear(spec: SnrSpec) -> float:
    return 10.0 ** (snr_db(spec) / 10.0)


def noise_rms_for_snr(target_snr: float, signal_rms: float) -> float:
    """Per-quadrature noise RMS giving the requested signal/noise power ratio."""
    if not (target_snr > 0.0):
        raise InvalidInputError(f"target SNR must be positive, got {target_snr}")
    if signal_rms < 0.0:
        raise InvalidInputError(f"signal RMS must be >= 0, got {signal_rms}")
    return signal_rms / math.sqrt(target_snr)


def implied_snr(noise_rms: float, signal_rms: float) -> float:
    """Inverse of noise_rms_for_snr, for round-trip checks."""
    if not (noise_rms > 0.0):
        raise InvalidInputError(f"noise RMS must be positive, got {noise_rms}")
    return (signal_rms / noise_rms) ** 2
