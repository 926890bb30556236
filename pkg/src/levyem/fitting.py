"""Log-log least squares for power-law decay measurements."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateExactError, DomainError


@dataclass(frozen=True)
class PowerLawFit:
    """y ~ exp(intercept) * x^exponent with a 2-standard-error half width."""

    exponent: float
    intercept: float
    half_width: float
    residual_rms: float


def fit_powerlaw(x, y) -> PowerLawFit:
    """Ordinary least squares of log y against log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 3:
        raise DomainError("need at least 3 matching points")
    if np.any(y <= 0):
        raise DegenerateExactError("non-positive values cannot be fitted on a log scale")
    lx, ly = np.log(x), np.log(y)
    mx = lx.mean()
    sxx = float(np.sum((lx - mx) ** 2))
    if sxx == 0:
        raise DomainError("x values are all equal")
    slope = float(np.sum((lx - mx) * (ly - ly.mean())) / sxx)
    intercept = float(ly.mean() - slope * mx)
    resid = ly - (intercept + slope * lx)
    dof = max(x.size - 2, 1)
    se = float(np.sqrt(np.sum(resid ** 2) / dof / sxx))
    return PowerLawFit(exponent=slope, intercept=intercept, half_width=2.0 * se,
                       residual_rms=float(np.sqrt(np.mean(resid ** 2))))


def fit_decay_rate(n_values, means) -> PowerLawFit:
    """Fit means ~ C n^(-rate); the returned exponent is the positive rate."""
    fit = fit_powerlaw(n_values, means)
    return PowerLawFit(exponent=-fit.exponent, intercept=fit.intercept,
                       half_width=fit.half_width, residual_rms=fit.residual_rms)
