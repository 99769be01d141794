"""Pulse-level simulation of noise in superconducting-qubit control.

Submodules: dynamics (density-matrix evolution), pulses (envelopes and
noise streams), cliffords (gate compilation), rb (randomized
benchmarking), drift (frequency-drift synthesis and Ramsey tracking),
snrfit (error-vs-SNR modeling), config/cli (experiment runner).
"""

__version__ = "0.1.0"

from .cliffords import (CliffordElement, PulseSettings, RBSequence, clifford_table,
                        compile_sequence, random_sequence)
from .dynamics import (CoherenceParams, DensityMatrix, DriveParams, dephasing_time,
                       drive_hamiltonian, evolve, liouvillian)
from .drift import (FrequencyTrace, NoiseModel1f, PsdEstimate, RamseyConfig,
                    TrackingResult, drift_sigma, fidelity_vs_detuning, fit_fringe,
                    fit_noise_model, psd_slope, simulate_ramsey, synthesize_drift,
                    track_frequency, welch_psd)
from .errors import (ConfigError, FitFailureError, InvalidInputError, QnlError,
                     UnachievableTargetError, UnphysicalCoherenceError)
from .pulses import (NoiseRealization, PulseSchedule, SnrSpec, make_envelope,
                     noise_rms_for_snr, pink_noise, white_noise)
from .rb import (CalibrationResult, RBConfig, RBFit, RBResult, calibrate_duration,
                 fidelity_from_p, fit_rb_decay, run_rb)
from .snrfit import (ErrorBudget, SnrFidelityPoint, SnrFit, SnrSweepResult,
                     error_budget, fit_snr_model, required_snr, runs_test_pvalue,
                     snr_sweep)

__all__ = [
    "__version__",
    "CoherenceParams", "DensityMatrix", "DriveParams", "dephasing_time",
    "drive_hamiltonian", "evolve", "liouvillian",
    "PulseSchedule", "NoiseRealization", "SnrSpec", "make_envelope",
    "white_noise", "pink_noise", "noise_rms_for_snr",
    "CliffordElement", "PulseSettings", "RBSequence", "clifford_table",
    "random_sequence", "compile_sequence",
    "RBConfig", "RBFit", "RBResult", "CalibrationResult", "run_rb",
    "fit_rb_decay", "fidelity_from_p", "calibrate_duration",
    "FrequencyTrace", "NoiseModel1f", "PsdEstimate", "RamseyConfig",
    "TrackingResult", "synthesize_drift", "drift_sigma", "welch_psd",
    "psd_slope", "fit_noise_model", "simulate_ramsey", "fit_fringe",
    "track_frequency", "fidelity_vs_detuning",
    "SnrFidelityPoint", "SnrFit", "SnrSweepResult", "ErrorBudget",
    "fit_snr_model", "required_snr", "error_budget", "snr_sweep",
    "runs_test_pvalue",
    "QnlError", "InvalidInputError", "UnphysicalCoherenceError",
    "FitFailureError", "UnachievableTargetError", "ConfigError",
]
