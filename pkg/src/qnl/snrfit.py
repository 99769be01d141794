"""Error-rate-vs-SNR model fitting, threshold inversion, and error budgets.

Unit convention (locked throughout): the fit abscissa is linear SNR divided
by 1e6 and the ordinate is gate error in percent, so the model reads
error(x) = a_coeff * exp(-b_coeff * x) + offset.  required_snr converts back
to absolute linear SNR.  Error rates here are per Clifford, 100 * (1 - F).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import curve_fit

from .errors import FitFailureError, InvalidInputError, UnachievableTargetError
from .rb import RBConfig, RBResult, run_rb

SNR_SCALE = 1e6


@dataclass(frozen=True)
class SnrFidelityPoint:
    """One sweep point: linear SNR and per-Clifford error in percent."""

    snr: float
    error_rate: float
    error_rate_uncertainty: float | None = None

    def __post_init__(self):
        if not (self.snr > 0):
            raise InvalidInputError(f"SNR must be positive, got {self.snr}")
        if not (0.0 <= self.error_rate <= 100.0):
            raise InvalidInputError(f"error rate must be in [0, 100] percent, got {self.error_rate}")
        if self.error_rate_uncertainty is not None and self.error_rate_uncertainty < 0:
            raise InvalidInputError("uncertainty must be >= 0")


@dataclass(frozen=True)
class SnrFit:
    """Fitted error(x) = a_coeff*exp(-b_coeff*x) + offset, x = SNR/1e6, y in %."""

    a_coeff: float
    b_coeff: float
    offset: float
    covariance: np.ndarray
    stderrs: tuple
    reduced_chi_square: float
    offset_fixed: bool
    n_points: int

    def evaluate(self, snr, include_offset: bool = True) -> np.ndarray:
        """Model curve at linear SNR; include_offset=False gives the bare exponential."""
        x = np.asarray(snr, dtype=float) / SNR_SCALE
        y = self.a_coeff * np.exp(-self.b_coeff * x)
        return y + self.offset if include_offset else y

    def to_json_dict(self) -> dict:
        return {"a_coeff_pct": self.a_coeff, "b_coeff_per_1e6_snr": self.b_coeff,
                "offset_pct": self.offset, "offset_fixed": self.offset_fixed,
                "stderrs": list(self.stderrs),
                "covariance": self.covariance.tolist(),
                "reduced_chi_square": self.reduced_chi_square,
                "n_points": self.n_points}


def read_points_csv(path) -> list:
    """Load sweep points from a (snr, error_pct, err_unc_pct) CSV.

    Comment lines and the column-header line are skipped; a missing or
    empty third column means the point carries no uncertainty.
    """
    points = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith("snr"):
                continue
            parts = [c.strip() for c in line.split(",")]
            if len(parts) < 2:
                raise InvalidInputError(f"bad sweep CSV line: {raw!r}")
            unc = float(parts[2]) if len(parts) > 2 and parts[2] else None
            points.append(SnrFidelityPoint(snr=float(parts[0]),
                                           error_rate=float(parts[1]),
                                           error_rate_uncertainty=unc))
    if not points:
        raise InvalidInputError(f"no data rows found in {path}")
    return points


def _coerce_points(points) -> list:
    out = []
    for p in points:
        if isinstance(p, SnrFidelityPoint):
            out.append(p)
        else:
            vals = tuple(p)
            unc = float(vals[2]) if len(vals) > 2 and vals[2] is not None else None
            out.append(SnrFidelityPoint(snr=float(vals[0]), error_rate=float(vals[1]),
                                        error_rate_uncertainty=unc))
    return out


def fit_snr_model(points, offset_mode: str = "fixed", offset_value: float = 0.0) -> SnrFit:
    """Weighted least squares of the exponential error-vs-SNR model.

    offset_mode "fixed" holds the additive floor at offset_value (the
    decoherence baseline); "free" fits it.  Points are inverse-variance
    weighted when every point carries a positive uncertainty, unweighted
    otherwise; the reduced chi-square uses the same weights (or the residual
    variance when unweighted).
    """
    pts = _coerce_points(points)
    if len(pts) < 4:
        raise InvalidInputError(f"need at least 4 points, got {len(pts)}")
    snr = np.array([p.snr for p in pts])
    if snr.max() / snr.min() < 10.0:
        raise InvalidInputError("points must span at least one decade of SNR")
    if offset_mode not in ("fixed", "free"):
        raise InvalidInputError(f"offset_mode must be 'fixed' or 'free', got {offset_mode!r}")
    if offset_mode == "fixed" and not (np.isfinite(offset_value) and offset_value >= 0):
        raise InvalidInputError(f"fixed offset must be finite and >= 0, got {offset_value}")
    x = snr / SNR_SCALE
    y = np.array([p.error_rate for p in pts])
    uncs = [p.error_rate_uncertainty for p in pts]
    sigma = None
    if all(u is not None and u > 0 for u in uncs):
        sigma = np.array(uncs, dtype=float)
    tiny = 1e-12
    if offset_mode == "fixed":
        model = lambda xx, a, b: a * np.exp(-b * xx) + offset_value
        init = (max(y.max() - offset_value, tiny), 1.0)
        bounds = ([tiny, tiny], [np.inf, np.inf])
    else:
        model = lambda xx, a, b, c: a * np.exp(-b * xx) + c
        init = (max(y.max() - y.min(), tiny), 1.0, max(y.min(), 0.0))
        bounds = ([tiny, tiny, 0.0], [np.inf, np.inf, 100.0])
    try:
        params, cov = curve_fit(model, x, y, p0=init, sigma=sigma,
                                absolute_sigma=sigma is not None,
                                bounds=bounds, maxfev=20000,
                                xtol=1e-14, ftol=1e-14, gtol=1e-14)
    except (RuntimeError, ValueError) as exc:
        raise FitFailureError(f"SNR model fit failed: {exc}",
                              diagnostics={"snr": snr.tolist(), "error_pct": y.tolist(),
                                           "init": list(init),
                                           "offset_mode": offset_mode}) from exc
    resid = y - model(x, *params)
    dof = max(len(pts) - len(params), 1)
    if sigma is not None:
        chi2 = float(np.sum((resid / sigma) ** 2) / dof)
    else:
        chi2 = float(np.sum(resid ** 2) / dof)
    errs = tuple(float(v) for v in np.sqrt(np.clip(np.diag(cov), 0.0, np.inf)))
    offset = offset_value if offset_mode == "fixed" else float(params[2])
    return SnrFit(a_coeff=float(params[0]), b_coeff=float(params[1]), offset=offset,
                  covariance=cov, stderrs=errs, reduced_chi_square=chi2,
                  offset_fixed=offset_mode == "fixed", n_points=len(pts))


def required_snr(target_error: float, fit: SnrFit, include_offset: bool = False) -> float:
    """Linear SNR at which the fitted model reaches the target error (percent).

    Inverts x = ln(A / (target - offset))/b and rescales by 1e6.  The raw
    value is returned even when negative (a negative abscissa means the
    target is already met at zero SNR on the fitted curve).
    """
    if fit.a_coeff <= 0 or fit.b_coeff <= 0:
        raise InvalidInputError("fit must have positive a_coeff and b_coeff")
    effective = target_error - (fit.offset if include_offset else 0.0)
    if include_offset and effective <= 0:
        raise UnachievableTargetError(
            f"target {target_error}% is at or below the model floor {fit.offset}%")
    if effective <= 0:
        raise InvalidInputError(f"target error must be positive, got {target_error}")
    return math.log(fit.a_coeff / effective) / fit.b_coeff * SNR_SCALE


@dataclass(frozen=True)
class Uncertain:
    """A value with a one-sigma uncertainty."""

    value: float
    uncertainty: float

    def __post_init__(self):
        if self.uncertainty < 0:
            raise InvalidInputError(f"uncertainty must be >= 0, got {self.uncertainty}")

    def __iter__(self):
        return iter((self.value, self.uncertainty))


@dataclass(frozen=True)
class ErrorBudget:
    """Decomposition of measured error into decoherence and everything else."""

    f_sim: Uncertain
    f_exp: Uncertain
    eps_cor: Uncertain
    eps_others: Uncertain

    def to_json_dict(self) -> dict:
        return {name: {"value_pct": q.value, "uncertainty_pct": q.uncertainty}
                for name, q in (("f_sim", self.f_sim), ("f_exp", self.f_exp),
                                ("eps_cor", self.eps_cor), ("eps_others", self.eps_others))}


def _as_uncertain(q) -> Uncertain:
    if isinstance(q, Uncertain):
        return q
    value, uncertainty = q
    return Uncertain(value=float(value), uncertainty=float(uncertainty))


def error_budget(f_sim, f_exp) -> ErrorBudget:
    """Error budget in percent: eps_cor = 100 - f_sim, eps_others = f_sim - f_exp.

    Both identities hold exactly (same floating-point subtraction); the
    eps_others uncertainty combines the inputs in quadrature.
    """
    f_sim = _as_uncertain(f_sim)
    f_exp = _as_uncertain(f_exp)
    for q in (f_sim, f_exp):
        if not (0.0 < q.value <= 100.0):
            raise InvalidInputError(f"fidelity must be in (0, 100] percent, got {q.value}")
    eps_cor = Uncertain(value=100.0 - f_sim.value, uncertainty=f_sim.uncertainty)
    eps_others = Uncertain(value=f_sim.value - f_exp.value,
                           uncertainty=math.hypot(f_sim.uncertainty, f_exp.uncertainty))
    return ErrorBudget(f_sim=f_sim, f_exp=f_exp, eps_cor=eps_cor, eps_others=eps_others)


@dataclass(frozen=True)
class SnrSweepResult:
    """Sweep points, the fixed-offset fit, and the noise-free baseline run."""

    points: tuple
    fit: SnrFit | None
    baseline: RBResult
    baseline_error_pct: float
    baseline_error_unc_pct: float
    fit_error: str | None = None

    def write_csv(self, path, header_lines=()) -> None:
        with open(path, "w") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write("snr,error_pct,err_unc_pct\n")
            for p in self.points:
                unc = ("" if p.error_rate_uncertainty is None
                       else repr(float(p.error_rate_uncertainty)))
                fh.write(f"{float(p.snr)!r},{float(p.error_rate)!r},{unc}\n")

    def to_json_dict(self) -> dict:
        return {"points": [{"snr": p.snr, "error_pct": p.error_rate,
                            "err_unc_pct": p.error_rate_uncertainty} for p in self.points],
                "fit": None if self.fit is None else self.fit.to_json_dict(),
                "fit_error": self.fit_error,
                "baseline_error_pct": self.baseline_error_pct,
                "baseline_error_unc_pct": self.baseline_error_unc_pct}


def snr_sweep(snr_values, rb_config: RBConfig, seed: int,
              n_jobs: int | None = None) -> SnrSweepResult:
    """Run the full error-vs-SNR pipeline on synthetic hardware.

    A noise-free run under the same seed provides the additive-floor offset;
    each SNR point reuses the same sequences and underlying noise draws
    (scaled to its RMS), so the measured curve is monotone by construction
    rather than by statistical luck.
    """
    values = [float(v) for v in snr_values]
    if len(values) < 4:
        raise InvalidInputError(f"need at least 4 SNR values, got {len(values)}")
    if any(v <= 0 for v in values):
        raise InvalidInputError("all SNR values must be positive")
    base_cfg = replace(rb_config, seed=seed, snr=None)
    baseline = run_rb(base_cfg, n_jobs=n_jobs)
    base_err = baseline.error_per_clifford * 100.0
    base_unc = baseline.fit.stderrs[2] / 2.0 * 100.0
    points = []
    for value in values:
        result = run_rb(replace(rb_config, seed=seed, snr=value), n_jobs=n_jobs)
        points.append(SnrFidelityPoint(
            snr=value, error_rate=result.error_per_clifford * 100.0,
            error_rate_uncertainty=result.fit.stderrs[2] / 2.0 * 100.0))
    try:
        fit = fit_snr_model(points, offset_mode="fixed", offset_value=base_err)
        fit_error = None
    except (FitFailureError, InvalidInputError) as exc:
        fit, fit_error = None, str(exc)
    return SnrSweepResult(points=tuple(points), fit=fit, baseline=baseline,
                          baseline_error_pct=base_err, baseline_error_unc_pct=base_unc,
                          fit_error=fit_error)


def runs_test_pvalue(residuals) -> float:
    """Wald-Wolfowitz runs test on residual signs; high p = no systematic trend."""
    signs = np.sign(np.asarray(residuals, dtype=float))
    signs = signs[signs != 0]
    n_pos = int((signs > 0).sum())
    n_neg = int((signs < 0).sum())
    if n_pos == 0 or n_neg == 0:
        return 1.0
    runs = 1 + int((signs[1:] != signs[:-1]).sum())
    n = n_pos + n_neg
    mean = 2.0 * n_pos * n_neg / n + 1.0
    var = (mean - 1.0) * (mean - 2.0) / (n - 1.0)
    if var <= 0:
        return 1.0
    z = (runs - mean) / math.sqrt(var)
    return math.erfc(abs(z) / math.sqrt(2.0))
