"""Euler-Maruyama scheme on a grid, and the common-noise fine/coarse coupling.

The default scheme freezes both drift arguments at the left grid point,
X_{i+1} = X_i + b(t_i, X_i) dt + dL_i.  A ``timeint`` variant instead
integrates b(s, X_i) exactly in s over each step (Gauss-Legendre in time)
for drifts with genuine time dependence; the two coincide for
time-independent drift.

Strong discretisation error is measured by running the coarse scheme on the
fine grid under the same increments: within each coarse step the drift
argument is held at the last coarse node while noise is added per fine
increment, so the gap to the fine path isolates the drift-freezing error
and is exactly zero for constant drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, OverflowPathError, ShapeError
from .samplers import IncrementBatch

# 4-point Gauss-Legendre on [0, 1], used by the time-integrated drift variant
_GL4_NODES = 0.5 * (1.0 + np.array([-0.8611363115940526, -0.3399810435848563,
                                    0.3399810435848563, 0.8611363115940526]))
_GL4_WEIGHTS = 0.5 * np.array([0.3478548451374538, 0.6521451548625461,
                               0.6521451548625461, 0.3478548451374538])

VARIANTS = ("frozen", "timeint")


@dataclass(frozen=True)
class SimulationGrid:
    """Uniform grid on [0, T] with n steps and left-endpoint step map."""

    T: float
    n: int

    def __post_init__(self):
        if self.T <= 0 or self.n < 1:
            raise DomainError("need T > 0 and n >= 1")

    @property
    def dt(self) -> float:
        return self.T / self.n

    @property
    def times(self) -> np.ndarray:
        return self.T * np.arange(self.n + 1) / self.n

    def step_index(self, s) -> np.ndarray:
        """Index i with times[i] <= s < times[i+1] (exact at grid points)."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(s > self.T):
            raise DomainError("s must lie in [0, T]")
        idx = np.minimum(np.floor(self.n * s / self.T).astype(int), self.n - 1)
        t = self.times
        # repair one-off floating errors of the floor so grid points map exactly
        idx = np.where((idx + 1 <= self.n - 1) & (t[np.minimum(idx + 1, self.n - 1)] <= s),
                       idx + 1, idx)
        idx = np.where(t[idx] > s, idx - 1, idx)
        return idx

    def eta(self, s):
        """Step map: the last grid time <= s."""
        out = self.times[self.step_index(s)]
        return float(out) if np.ndim(s) == 0 else out


@dataclass(frozen=True)
class DriftSpec:
    """Drift b(t, x) with declared Hoelder exponents and sup bound.

    ``fn`` must be vectorised over x (applied componentwise for d > 1).
    The declared (beta, eta, bound) are the catalog author's responsibility;
    :func:`drift_diagnostics` provides necessary-condition spot checks.
    """

    fn: Callable
    beta: float
    eta: float
    bound: float
    name: str = "custom"

    def __post_init__(self):
        if not (0.0 < self.beta <= 1.0) or not (0.0 < self.eta <= 1.0):
            raise DomainError("beta and eta must lie in (0, 1]")
        if self.bound <= 0:
            raise DomainError("bound must be positive")

    def __call__(self, t, x):
        return self.fn(t, x)


def drift_zero() -> DriftSpec:
    return DriftSpec(lambda t, x: np.zeros_like(x), beta=1.0, eta=1.0, bound=1e-300,
                     name="zero")


def drift_const(c: float) -> DriftSpec:
    return DriftSpec(lambda t, x: np.full_like(x, c), beta=1.0, eta=1.0,
                     bound=max(abs(c), 1e-300), name="const")


def drift_cos() -> DriftSpec:
    return DriftSpec(lambda t, x: np.cos(x), beta=1.0, eta=1.0, bound=1.0, name="cos")


def drift_rough(beta: float) -> DriftSpec:
    """b(x) = sgn(sin x) |sin x|^beta; beta-Hoelder in space, time-free."""
    if not (0.0 < beta < 1.0):
        raise DomainError("rough drift needs beta in (0, 1)")

    def fn(t, x):
        s = np.sin(x)
        return np.sign(s) * np.abs(s) ** beta

    return DriftSpec(fn, beta=beta, eta=1.0, bound=1.0, name="rough_sin")


def drift_cos_time() -> DriftSpec:
    """b(t, x) = cos(x + t): Lipschitz in both arguments."""
    return DriftSpec(lambda t, x: np.cos(x + t), beta=1.0, eta=1.0, bound=1.0,
                     name="cos_time")


DRIFT_CATALOG = {
    "zero": lambda **kw: drift_zero(),
    "const": lambda **kw: drift_const(kw.get("c", 1.0)),
    "cos": lambda **kw: drift_cos(),
    "rough_sin": lambda **kw: drift_rough(kw.get("beta", 0.5)),
    "cos_time": lambda **kw: drift_cos_time(),
}


def drift_diagnostics(drift: DriftSpec, rng, n_pairs: int = 10_000,
                      box: float = 10.0, t_max: float = 1.0) -> dict:
    """Necessary-condition spot checks of (bound, beta, eta) on random pairs."""
    gen = rng.generator() if hasattr(rng, "generator") else rng
    t = gen.uniform(0.0, t_max, n_pairs)
    x = gen.uniform(-box, box, n_pairs)
    dx = gen.uniform(-1.0, 1.0, n_pairs)
    dt = gen.uniform(0.0, 1.0, n_pairs)
    bx, bxdx = drift(t, x), drift(t, x + dx)
    btdt = drift(t + dt, x)
    eps = 1e-12
    return {
        "sup_abs": float(np.max(np.abs(bx))),
        "space_quotient": float(np.max(np.abs(bxdx - bx) / (np.abs(dx) + eps) ** drift.beta)),
        "time_quotient": float(np.max(np.abs(btdt - bx) / (dt + eps) ** drift.eta)),
    }


@dataclass(frozen=True)
class GridPath:
    """One simulated trajectory on a grid."""

    grid: SimulationGrid
    states: np.ndarray  # (n+1, d)
    x0: np.ndarray = field(default=None)

    def to_csv(self, path) -> None:
        d = self.states.shape[1]
        header = "t," + ",".join(f"x_{i + 1}" for i in range(d))
        data = np.column_stack([self.grid.times, self.states])
        np.savetxt(path, data, delimiter=",", header=header, comments="", newline="\n")


def _as_state(x0, d: int) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    if x.shape != (d,):
        raise ShapeError(f"x0 must have dimension {d}, got shape {x.shape}")
    return x


def _step_drift(drift: DriftSpec, t_lo: float, dt: float, x, variant: str):
    """Drift contribution of one step given the frozen state argument x."""
    if variant == "frozen":
        return drift(t_lo, x) * dt
    if variant == "timeint":
        acc = 0.0
        for w, c in zip(_GL4_WEIGHTS, _GL4_NODES):
            acc = acc + w * drift(t_lo + c * dt, x)
        return acc * dt
    raise DomainError(f"unknown scheme variant {variant!r}")


def em_path(drift: DriftSpec, x0, grid: SimulationGrid, batch: IncrementBatch,
            variant: str = "frozen") -> GridPath:
    """Run the scheme: states[i+1] = states[i] + b(t_i, states[i]) dt + dL_i."""
    if batch.n != grid.n:
        raise ShapeError(f"batch has {batch.n} increments, grid needs {grid.n}")
    d = batch.values.shape[1]
    x = _as_state(x0, d)
    dt = grid.dt
    times = grid.times
    states = np.empty((grid.n + 1, d))
    states[0] = x
    cur = x
    for i in range(grid.n):
        cur = cur + _step_drift(drift, times[i], dt, cur, variant) + batch.values[i]
        if not np.all(np.isfinite(cur)):
            raise OverflowPathError(i + 1)
        states[i + 1] = cur
    return GridPath(grid=grid, states=states, x0=x)


def coarsen(batch: IncrementBatch, factor: int) -> IncrementBatch:
    """Aggregate consecutive increments; repeated halving for dyadic factors so
    coarsen(coarsen(b, 2), 2) equals coarsen(b, 4) bit for bit."""
    if factor < 2:
        raise DomainError("factor must be >= 2")
    if batch.n % factor:
        raise ShapeError(f"factor {factor} does not divide {batch.n} rows")
    vals = batch.values
    dt = batch.dt
    f = factor
    while f % 2 == 0:
        vals = vals[0::2] + vals[1::2]
        dt *= 2.0
        f //= 2
    if f > 1:
        vals = vals.reshape(-1, f, vals.shape[1]).sum(axis=1)
        dt *= f
    return IncrementBatch(dt=dt, values=vals, model=batch.model, meta=batch.meta,
                          seed=batch.seed, stream_id=batch.stream_id)


def coupled_sup_error(drift: DriftSpec, x0, T: float, n_fine: int, n_coarse: int,
                      batch_fine: IncrementBatch, variant: str = "frozen") -> float:
    """Sup distance over the fine grid between the fine scheme and the coarse
    scheme evaluated on the fine grid, both driven by batch_fine."""
    if n_coarse < 1 or n_fine % n_coarse:
        raise ShapeError(f"n_coarse {n_coarse} must divide n_fine {n_fine}")
    if batch_fine.n != n_fine:
        raise ShapeError("batch does not match n_fine")
    factor = n_fine // n_coarse
    grid_f = SimulationGrid(T, n_fine)
    fine = em_path(drift, x0, grid_f, batch_fine, variant=variant).states

    d = batch_fine.values.shape[1]
    x = _as_state(x0, d)
    dt_f = grid_f.dt
    fine_times = grid_f.times
    coarse_times = SimulationGrid(T, n_coarse).times
    cur = x
    anchor = x
    sup = 0.0
    for i in range(n_fine):
        j = i // factor
        if i % factor == 0:
            anchor = cur
        # frozen: time argument pinned at the coarse node; timeint: only the
        # state is frozen while time runs over the fine substep
        t_arg = coarse_times[j] if variant == "frozen" else fine_times[i]
        cur = cur + _step_drift(drift, t_arg, dt_f, anchor, variant) \
            + batch_fine.values[i]
        if not np.all(np.isfinite(cur)):
            raise OverflowPathError(i + 1)
        gap = float(np.linalg.norm(fine[i + 1] - cur))
        if gap > sup:
            sup = gap
    return sup
