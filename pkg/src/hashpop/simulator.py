"""Generators for the read-count process X(t).

Three routes to the same law:

* :func:`simulate_events` draws shoot times from the inhomogeneous Poisson
  process of rate N w(t) by thinning, and a follower count for each shoot.
* :func:`simulate_micro` steps time in increments of ``dt`` and lets each of
  the N users shoot with probability w(t) dt.
* :func:`evolve_master_equation` integrates the forward equation for
  P(x, t) on the truncated state space 0..x_max with classical RK4.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, TruncationError, UnsupportedVariantError
from .model import (
    FINITE_SUPPORT,
    DegreeDistribution,
    NetworkParams,
    PopularitySpec,
    as_generator,
    degree_moments,
    degree_pmf,
    evaluate_popularity,
    peak_rate,
    sample_degree,
)
from .moments import cumulative_intensity

_MASK64 = (1 << 64) - 1
DEFAULT_LEAK_TOLERANCE = 1e-6
MICRO_WARN_THRESHOLD = 0.1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def replication_seed(seed: int, index: int) -> int:
    """Independent per-replication seed derived from a master seed."""
    return splitmix64((int(seed) + int(index)) & _MASK64)


@dataclass(frozen=True, eq=False)
class EventTrace:
    """Shoot times and the follower count carried by each shoot."""
    event_times: np.ndarray
    jump_sizes: np.ndarray

    @property
    def trajectory(self) -> np.ndarray:
        """X just after each event."""
        return np.cumsum(self.jump_sizes)

    def __len__(self):
        return len(self.event_times)

    def reads_at(self, t):
        """Step function X(t): total followers of shoots at times <= t."""
        cum = np.concatenate(([0], self.trajectory))
        idx = np.searchsorted(self.event_times, np.asarray(t, dtype=float), side="right")
        return cum[idx]


def _check_horizon(horizon):
    if not (horizon > 0 and math.isfinite(horizon)):
        raise DomainError(f"horizon must be positive and finite, got {horizon}")


def _empty_trace():
    return EventTrace(np.zeros(0), np.zeros(0, dtype=np.int64))


def simulate_events(params: NetworkParams, spec: PopularitySpec, dist: DegreeDistribution,
                    horizon: float, seed) -> EventTrace:
    """Thinning simulation of the shoot process on [0, horizon].

    Candidates come from a homogeneous process of rate N * w_max; each is
    kept with probability w(t) / w_max.
    """
    _check_horizon(horizon)
    rng = as_generator(seed)
    w_max = peak_rate(spec, horizon)
    majorant = params.n_users * w_max
    if majorant == 0:
        return _empty_trace()
    n_candidates = rng.poisson(majorant * horizon)
    candidates = np.sort(rng.uniform(0.0, horizon, size=n_candidates))
    keep = rng.uniform(size=n_candidates) * w_max < evaluate_popularity(spec, candidates)
    times = candidates[keep]
    jumps = sample_degree(dist, rng, size=len(times))
    return EventTrace(times, jumps)


def simulate_micro(params: NetworkParams, spec: PopularitySpec, dist: DegreeDistribution,
                   dt: float, horizon: float, seed) -> EventTrace:
    """Per-user discrete-time simulation.

    In every step each of the N users shoots independently with probability
    w(t_mid) * dt. The number of shooters in a step is therefore
    Binomial(N, w dt), which is how it is drawn. Shooters within one step are
    placed uniformly inside the step so event times stay distinct.
    """
    _check_horizon(horizon)
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt}")
    w_max = peak_rate(spec, horizon)
    if w_max * dt > 1:
        raise DomainError(f"w_max * dt = {w_max * dt} > 1 is not a probability")
    if params.n_users * w_max * dt > MICRO_WARN_THRESHOLD:
        warnings.warn(
            f"N * w_max * dt = {params.n_users * w_max * dt:.3g} exceeds "
            f"{MICRO_WARN_THRESHOLD}; the step is coarse", RuntimeWarning, stacklevel=2,
        )
    rng = as_generator(seed)
    n_steps = int(math.ceil(horizon / dt - 1e-12))
    starts = np.arange(n_steps) * dt
    widths = np.minimum(dt, horizon - starts)
    p = evaluate_popularity(spec, starts + 0.5 * widths) * widths
    shooters = rng.binomial(params.n_users, np.clip(p, 0.0, 1.0))
    step_of = np.repeat(np.arange(n_steps), shooters)
    times = np.sort(starts[step_of] + rng.uniform(size=len(step_of)) * widths[step_of])
    jumps = sample_degree(dist, rng, size=len(times))
    return EventTrace(times, jumps)


@dataclass(frozen=True, eq=False)
class DistributionGrid:
    """P(x, t) on x = 0..x_max, one row per requested time."""
    x_values: np.ndarray
    times: np.ndarray
    pmf: np.ndarray
    leak: np.ndarray

    def mean(self) -> np.ndarray:
        """Mean of each row, renormalised by the retained mass."""
        return self.pmf @ self.x_values / self.pmf.sum(axis=1)

    def variance(self) -> np.ndarray:
        mass = self.pmf.sum(axis=1)
        m1 = self.pmf @ self.x_values / mass
        m2 = self.pmf @ (self.x_values.astype(float) ** 2) / mass
        return m2 - m1 ** 2


def suggest_x_max(params: NetworkParams, spec: PopularitySpec, dist: DegreeDistribution,
                  t: float, sds: float = 12.0) -> int:
    """A truncation point about ``sds`` standard deviations above the mean of X(t)."""
    mom = degree_moments(dist)
    lam = cumulative_intensity(params, spec, t)
    support, _ = degree_pmf(dist)
    return int(math.ceil(mom.mean * lam + sds * math.sqrt(mom.mean_sq * lam) + support.max()))


def evolve_master_equation(params: NetworkParams, spec: PopularitySpec, dist: DegreeDistribution,
                           x_max: int, times, dt: float | None = None,
                           leak_tolerance: float = DEFAULT_LEAK_TOLERANCE) -> DistributionGrid:
    """Integrate dP(x)/dt = N w(t) [sum_i f(i) P(x - i) - P(x)] from P(x, 0) = delta(x).

    Mass pushed past ``x_max`` is lost; the per-row loss is reported as
    ``leak`` and must stay below ``leak_tolerance``.
    """
    if not isinstance(dist, FINITE_SUPPORT):
        raise UnsupportedVariantError("the master equation needs a finite-support degree law")
    if int(x_max) != x_max or x_max < 0:
        raise DomainError(f"x_max must be a non-negative integer, got {x_max}")
    x_max = int(x_max)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0 or times[0] < 0 or np.any(np.diff(times) < 0):
        raise DomainError("times must be a non-empty ascending array starting at t >= 0")

    support, probs = degree_pmf(dist)
    kernel = np.zeros(int(support.max()) + 1)
    kernel[support] = probs
    n = params.n_users
    size = x_max + 1

    if dt is None:
        peak = n * peak_rate(spec, times[-1])
        dt = 1.0 / (50.0 * peak) if peak > 0 else max(times[-1], 1.0)
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt}")

    def rhs(t, p):
        rate = n * evaluate_popularity(spec, t)
        if rate == 0:
            return np.zeros_like(p)
        return rate * (np.convolve(p, kernel)[:size] - p)

    state = np.zeros(size)
    state[0] = 1.0
    t_now = 0.0
    rows = []
    for target in times:
        span = target - t_now
        if span > 0:
            steps = int(math.ceil(span / dt - 1e-9))
            h = span / steps
            for i in range(steps):
                t0 = t_now + i * h
                k1 = rhs(t0, state)
                k2 = rhs(t0 + 0.5 * h, state + 0.5 * h * k1)
                k3 = rhs(t0 + 0.5 * h, state + 0.5 * h * k2)
                k4 = rhs(t0 + h, state + h * k3)
                state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t_now = float(target)
        rows.append(np.where(state < 0, 0.0, state))

    pmf = np.array(rows)
    leak = 1.0 - pmf.sum(axis=1)
    worst = int(np.argmax(leak))
    if leak[worst] > leak_tolerance:
        needed = max(suggest_x_max(params, spec, dist, times[worst]), int(math.ceil(1.5 * x_max)) + 1)
        raise TruncationError(
            f"leaked mass {leak[worst]:.3g} at t={times[worst]} exceeds {leak_tolerance:g}; "
            f"increase x_max to at least {needed}",
            required_x_max=needed,
        )
    return DistributionGrid(np.arange(size), times, pmf, leak)


@dataclass(frozen=True, eq=False)
class EnsembleStatistics:
    times: np.ndarray
    sample_mean: np.ndarray
    sample_var: np.ndarray
    standard_error: np.ndarray
    samples: np.ndarray

    @property
    def replications(self) -> int:
        return self.samples.shape[0]


def ensemble_statistics(params: NetworkParams, spec: PopularitySpec, dist: DegreeDistribution,
                        horizon: float, grid, replications: int, seed: int) -> EnsembleStatistics:
    """Sample mean and variance of X on ``grid`` over independent event traces."""
    if replications < 2:
        raise DomainError("ensemble statistics need at least two replications")
    grid = np.asarray(grid, dtype=float)
    samples = np.empty((replications, len(grid)))
    for r in range(replications):
        trace = simulate_events(params, spec, dist, horizon, replication_seed(seed, r))
        samples[r] = trace.reads_at(grid)
    mean = samples.mean(axis=0)
    var = samples.var(axis=0, ddof=1)
    return EnsembleStatistics(grid, mean, var, np.sqrt(var / replications), samples)
