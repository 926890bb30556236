"""Monte Carlo measurement of strong convergence rates.

For each path the fine increments are drawn once from a private counter
stream; the reference path at n_ref and every coupled coarse path share that
noise, so per-path sup errors isolate discretisation error.  Per-n means of
sup-error^p are fitted on a log-log scale and compared against the predicted
exponent min{1, p beta/gamma0, p eta}.

Paths are chunked and may be processed by a thread pool; results land in
preallocated slots indexed by path, so the report is bit-identical for any
thread count.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .engine import VARIANTS, DriftSpec, SimulationGrid
from .errors import (DegenerateExactError, DomainError, ExperimentAbortedError,
                     ShapeError)
from .fitting import PowerLawFit, fit_decay_rate
from .models import (LevyModel, RatePrediction, SubFamily, SubordinatorSpec,
                     predict_for_model)
from .rng import RngStream
from .samplers import increments

VERDICT_CONSISTENT = "consistent"
VERDICT_FASTER = "faster-than-bound"
VERDICT_VIOLATES = "violates-bound"
VERDICT_DEGENERATE = "degenerate-exact"


@dataclass(frozen=True)
class ExperimentConfig:
    model: LevyModel
    drift: DriftSpec
    x0: float | Sequence[float]
    T: float
    p: float
    n_list: tuple
    n_ref: int
    paths: int
    seed: int
    tol: float = 0.15
    variant: str = "frozen"
    threads: int = 0
    chunk: int = 256
    allow_small_ref: bool = False

    def __post_init__(self):
        if self.T <= 0 or self.p <= 0:
            raise DomainError("need T > 0 and p > 0")
        if self.paths < 100:
            raise DomainError("need at least 100 paths")
        if self.variant not in VARIANTS:
            raise DomainError(f"variant must be one of {VARIANTS}")
        ns = tuple(int(n) for n in self.n_list)
        if len(ns) < 1 or any(n < 1 for n in ns) or list(ns) != sorted(set(ns)):
            raise DomainError("n_list must be strictly increasing positive integers")
        object.__setattr__(self, "n_list", ns)
        for n in ns:
            if self.n_ref % n:
                raise DomainError(f"n_ref={self.n_ref} is not divisible by n={n}")
        if not self.allow_small_ref and self.n_ref < 8 * max(ns):
            raise DomainError("n_ref must be at least 8 x max(n_list)")

    def p_effective(self) -> float:
        gi = self.model.moments.gamma_inf
        if self.p > gi:
            warnings.warn(f"moment order p={self.p} exceeds gamma_inf={gi}; clamping",
                          stacklevel=2)
            return gi
        return self.p

    def prediction(self) -> RatePrediction:
        return predict_for_model(self.model, self.drift.beta, self.drift.eta, self.p)


@dataclass(frozen=True)
class ErrorTable:
    n_values: tuple
    means: tuple
    stderrs: tuple
    paths: int
    flagged: int


@dataclass(frozen=True)
class ConvergenceReport:
    config_summary: dict
    table: ErrorTable
    prediction: RatePrediction
    verdict: str
    fitted: Optional[PowerLawFit] = None
    notes: tuple = field(default_factory=tuple)

    @property
    def slope(self) -> Optional[float]:
        return None if self.fitted is None else self.fitted.exponent

    def to_dict(self) -> dict:
        return {
            "config": self.config_summary,
            "table": {
                "n": list(self.table.n_values),
                "mean": list(self.table.means),
                "stderr": list(self.table.stderrs),
                "paths": self.table.paths,
                "flagged": self.table.flagged,
            },
            "fit": None if self.fitted is None else {
                "slope": self.fitted.exponent,
                "slope_per_p": self.fitted.exponent / self.config_summary["p"],
                "intercept": self.fitted.intercept,
                "half_width": self.fitted.half_width,
                "residual_rms": self.fitted.residual_rms,
            },
            "predicted": {
                "rate": self.prediction.rate,
                "gamma0_eff": self.prediction.gamma0_eff,
                "is_supremum": self.prediction.is_supremum,
                "balance_ok": self.prediction.balance_ok,
            },
            "verdict": self.verdict,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        lines = ["n,mean,stderr,predicted_line"]
        anchor = None
        if self.fitted is not None:
            anchor = math.exp(self.fitted.intercept)
        for n, mean, se in zip(self.table.n_values, self.table.means, self.table.stderrs):
            pred = "" if anchor is None else repr(anchor * n ** (-self.prediction.rate))
            lines.append(f"{n},{mean!r},{se!r},{pred}")
        return "\n".join(lines) + "\n"


def _path_block(config: ExperimentConfig, p_eff: float, lo: int, hi: int):
    """Sup-error^p for paths lo..hi-1, one column per ladder entry."""
    model, drift = config.model, config.drift
    d = model.dim
    n_ref = config.n_ref
    x0 = np.atleast_1d(np.asarray(config.x0, dtype=float))
    if x0.shape != (d,):
        raise ShapeError(f"x0 must have dimension {d}")
    mc = hi - lo
    noise = np.empty((mc, n_ref, d))
    for k in range(mc):
        noise[k] = increments(model, config.T, n_ref, RngStream(config.seed, lo + k + 1)).values

    grid = SimulationGrid(config.T, n_ref)
    times = grid.times
    dt = grid.dt
    timeint = config.variant == "timeint"

    # reference path, all chunk paths at once
    ref = np.empty((mc, n_ref + 1, d))
    cur = np.broadcast_to(x0, (mc, d)).copy()
    ref[:, 0] = cur
    for i in range(n_ref):
        cur = cur + _drift_term(drift, times[i], dt, cur, timeint) + noise[:, i]
        ref[:, i + 1] = cur

    out = np.empty((mc, len(config.n_list)))
    for col, n in enumerate(config.n_list):
        factor = n_ref // n
        coarse_times = SimulationGrid(config.T, n).times
        cur = np.broadcast_to(x0, (mc, d)).copy()
        anchor = cur
        sup = np.zeros(mc)
        for i in range(n_ref):
            if i % factor == 0:
                anchor = cur
            t_arg = coarse_times[i // factor] if not timeint else times[i]
            cur = cur + _drift_term(drift, t_arg, dt, anchor, timeint) + noise[:, i]
            gap = np.linalg.norm(ref[:, i + 1] - cur, axis=1)
            sup = np.maximum(sup, gap)
        out[:, col] = sup ** p_eff
    return out


def _drift_term(drift: DriftSpec, t_lo: float, dt: float, x, timeint: bool):
    if not timeint:
        return drift(t_lo, x) * dt
    from .engine import _GL4_NODES, _GL4_WEIGHTS
    acc = 0.0
    for w, c in zip(_GL4_WEIGHTS, _GL4_NODES):
        acc = acc + w * drift(t_lo + c * dt, x)
    return acc * dt


def mc_strong_error(config: ExperimentConfig,
                    injected: Optional[Callable[[int], float]] = None) -> ErrorTable:
    """Per-n sample mean and standard error of sup-error^p over config.paths.

    ``injected`` replaces the per-path error functional by a deterministic
    value per n (harness self-test mode)."""
    p_eff = config.p_effective()
    M = config.paths
    cols = len(config.n_list)
    values = np.empty((M, cols))

    if injected is not None:
        for col, n in enumerate(config.n_list):
            values[:, col] = injected(n)
    else:
        spans = [(lo, min(lo + config.chunk, M)) for lo in range(0, M, config.chunk)]
        if config.threads and len(spans) > 1:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                futures = [pool.submit(_path_block, config, p_eff, lo, hi)
                           for lo, hi in spans]
                for (lo, hi), fut in zip(spans, futures):
                    values[lo:hi] = fut.result()
        else:
            for lo, hi in spans:
                values[lo:hi] = _path_block(config, p_eff, lo, hi)

    good = np.all(np.isfinite(values), axis=1)
    flagged = int(M - good.sum())
    if flagged > 0.001 * M:
        raise ExperimentAbortedError(
            f"{flagged} of {M} paths were flagged non-finite (> 0.1%)")
    kept = values[good]
    m_eff = kept.shape[0]
    # correctly-rounded sums: the injection self-test requires the mean of
    # identical per-path values to reproduce them exactly
    means, stderrs = [], []
    for col in kept.T:
        mean = math.fsum(col) / m_eff
        var = math.fsum((v - mean) ** 2 for v in col) / (m_eff - 1)
        means.append(mean)
        stderrs.append(math.sqrt(var / m_eff))
    return ErrorTable(n_values=tuple(config.n_list),
                      means=tuple(means), stderrs=tuple(stderrs),
                      paths=m_eff, flagged=flagged)


def fit_rate(n_values, means) -> PowerLawFit:
    """Exponent of n in means ~ C n^(-rate); raises DegenerateExactError on
    non-positive means."""
    return fit_decay_rate(n_values, means)


def compare_to_theory(fitted_rate: float, predicted_rate: float, tol: float = 0.15) -> str:
    if fitted_rate < predicted_rate - tol:
        return VERDICT_VIOLATES
    if fitted_rate > predicted_rate + tol:
        return VERDICT_FASTER
    return VERDICT_CONSISTENT


def run_experiment(config: ExperimentConfig,
                   injected: Optional[Callable[[int], float]] = None) -> ConvergenceReport:
    table = mc_strong_error(config, injected=injected)
    prediction = config.prediction()
    summary = {
        "model": config.model.describe(),
        "drift": config.drift.name,
        "beta": config.drift.beta,
        "eta": config.drift.eta,
        "x0": list(np.atleast_1d(np.asarray(config.x0, dtype=float))),
        "T": config.T,
        "p": config.p,
        "n_list": list(config.n_list),
        "n_ref": config.n_ref,
        "paths": config.paths,
        "seed": config.seed,
        "tol": config.tol,
        "variant": config.variant,
    }
    notes = []
    if config.p_effective() != config.p:
        notes.append(f"p clamped to gamma_inf={config.p_effective()}")
    try:
        fitted = fit_rate(table.n_values, table.means)
    except DegenerateExactError:
        return ConvergenceReport(config_summary=summary, table=table,
                                 prediction=prediction, verdict=VERDICT_DEGENERATE,
                                 fitted=None, notes=tuple(notes))
    verdict = compare_to_theory(fitted.exponent, prediction.rate, config.tol)
    return ConvergenceReport(config_summary=summary, table=table,
                             prediction=prediction, verdict=verdict,
                             fitted=fitted, notes=tuple(notes))


# ----------------------------------------------------------------------
# subordination inverse-moment diagnostic
# ----------------------------------------------------------------------

GAUSS_INV_NORM_3D = math.sqrt(2.0 / math.pi)  # E 1/|Z| for Z ~ N(0, I_3)


@dataclass(frozen=True)
class InverseMomentResult:
    t_values: tuple
    estimates: tuple        # E[S_t^(-1/2)] * E|B_1^(d+2)|^(-1) per t
    slope: Optional[float]
    target_slope: float
    norm_constant: float    # MC estimate of E|B_1^(d+2)|^(-1)
    norm_stderr: float
    diverged: bool = False


def _subordinator_draws(sub: SubordinatorSpec, t: float, M: int, rng) -> np.ndarray:
    from .samplers import sample_stable_subordinator, sample_tempered_subordinator
    if sub.family is SubFamily.STABLE:
        return np.asarray(sample_stable_subordinator(sub.rho, t, rng, size=M))
    if sub.family is SubFamily.TEMPERED_STABLE:
        return np.asarray(sample_tempered_subordinator(sub.rho, sub.m, t, rng, size=M))
    raise DomainError("inverse-moment diagnostic needs a stable or tempered subordinator")


def inverse_moment_scaling(sub: SubordinatorSpec, d: int, t_list, M: int,
                           seed: int) -> InverseMomentResult:
    """Fit the t-exponent of E[S_t^(-1/2)] E|B_1^(d+2)|^(-1).

    For a subordinator of lower index rho the product must scale like
    t^(-1/(2 rho)); the Brownian factor uses standard normal coordinates so
    the d+2 = 3 constant is sqrt(2/pi)."""
    if d < 1:
        raise DomainError("d must be >= 1")
    t_list = tuple(float(t) for t in t_list)
    if any(t <= 0 or t > 1 for t in t_list) or len(t_list) < 2:
        raise DomainError("t_list must contain at least two values in (0, 1]")
    z = RngStream(seed, 0).generator().standard_normal((M, d + 2))
    inv_norm = 1.0 / np.linalg.norm(z, axis=1)
    const = float(inv_norm.mean())
    const_se = float(inv_norm.std(ddof=1) / math.sqrt(M))

    estimates = []
    for k, t in enumerate(t_list):
        s = _subordinator_draws(sub, t, M, RngStream(seed, k + 1))
        with np.errstate(divide="ignore"):
            inv = s ** (-0.5)
        estimates.append(float(np.mean(inv)) * const)
    target = -1.0 / (2.0 * sub.rho)
    if not all(math.isfinite(e) for e in estimates):
        return InverseMomentResult(t_values=t_list, estimates=tuple(estimates),
                                   slope=None, target_slope=target,
                                   norm_constant=const, norm_stderr=const_se,
                                   diverged=True)
    fit = fit_decay_rate(np.asarray(t_list), np.asarray(estimates))
    # fit_decay_rate returns the positive decay exponent in 1/t; the slope in t is its negative
    return InverseMomentResult(t_values=t_list, estimates=tuple(estimates),
                               slope=-fit.exponent, target_slope=target,
                               norm_constant=const, norm_stderr=const_se)
