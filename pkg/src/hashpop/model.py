"""Domain types, degree distributions and the popularity function w(t).

Every value type here is an immutable dataclass validated on construction.
Randomness is always supplied by the caller, either as a
``numpy.random.Generator`` or as an integer seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import DivergentMomentError, DomainError, UnsupportedVariantError


# --------------------------------------------------------------------------
# Records and network summary
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TweetRecord:
    """One observed tweet or retweet.

    ``timestamp`` is in seconds since the dataset origin and
    ``follower_count`` is the sender's out-degree when the message was sent.
    """
    timestamp: float
    user_id: str
    follower_count: int

    def __post_init__(self):
        if not math.isfinite(self.timestamp):
            raise DomainError(f"timestamp must be finite, got {self.timestamp}")
        if self.follower_count < 0:
            raise DomainError(f"follower_count must be >= 0, got {self.follower_count}")


@dataclass(frozen=True)
class NetworkParams:
    """Community size N and the first two moments of the follower count."""
    n_users: int
    mean_followers: float
    mean_sq_followers: float

    def __post_init__(self):
        if int(self.n_users) != self.n_users or self.n_users < 1:
            raise DomainError(f"n_users must be a positive integer, got {self.n_users}")
        if not (math.isfinite(self.mean_followers) and math.isfinite(self.mean_sq_followers)):
            raise DomainError("follower moments must be finite")
        if self.mean_followers <= 0:
            raise DomainError(f"mean_followers must be > 0, got {self.mean_followers}")
        # Jensen, with slack for rounding in the caller's arithmetic
        if self.mean_sq_followers < self.mean_followers ** 2 * (1 - 1e-12):
            raise DomainError(
                f"mean_sq_followers={self.mean_sq_followers} < mean_followers**2="
                f"{self.mean_followers ** 2}"
            )

    @property
    def dispersion(self) -> float:
        """Ratio <f^2>/<f>, which equals Var[X]/E[X] at every time."""
        return self.mean_sq_followers / self.mean_followers


# --------------------------------------------------------------------------
# Popularity function
# --------------------------------------------------------------------------

def _check_peak(c):
    if not (0.0 <= c <= 1.0):
        raise DomainError(f"peak value c must lie in [0, 1], got {c}")


@dataclass(frozen=True)
class Constant:
    c: float

    def __post_init__(self):
        _check_peak(self.c)


@dataclass(frozen=True)
class GammaKernel:
    """w(t) = c e^a / (a b)^a * t^a * exp(-t/b), peaking at c when t = a*b."""
    a: float
    b: float
    c: float

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise DomainError(f"shape a must be > 0, got {self.a}")
        if not (self.b > 0 and math.isfinite(self.b)):
            raise DomainError(f"scale b must be > 0, got {self.b}")
        _check_peak(self.c)


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear w(t) through the given knots; no extrapolation."""
    times: tuple
    rates: tuple

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        rates = tuple(float(r) for r in self.rates)
        if len(times) != len(rates) or len(times) < 2:
            raise DomainError("Tabulated needs at least two knots and equal-length arrays")
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise DomainError("Tabulated times must be strictly ascending")
        if any(not (r >= 0 and math.isfinite(r)) for r in rates):
            raise DomainError("Tabulated rates must be finite and non-negative")
        if times[0] < 0:
            raise DomainError("Tabulated times must be >= 0")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "rates", rates)


PopularitySpec = Union[Constant, GammaKernel, Tabulated]


class Landmarks(NamedTuple):
    t_max: float
    w_max: float
    t_inf: float


def evaluate_popularity(spec: PopularitySpec, t):
    """Evaluate w(t). Accepts a scalar or an array of times."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(~np.isfinite(t_arr)):
        raise DomainError("popularity is defined for finite t >= 0 only")

    if isinstance(spec, Constant):
        out = np.full_like(t_arr, spec.c)
    elif isinstance(spec, GammaKernel):
        a, b, c = spec.a, spec.b, spec.c
        out = np.zeros_like(t_arr)
        pos = t_arr > 0
        if c > 0:
            tp = t_arr[pos]
            out[pos] = np.exp(math.log(c) + a - a * math.log(a * b) + a * np.log(tp) - tp / b)
    elif isinstance(spec, Tabulated):
        lo, hi = spec.times[0], spec.times[-1]
        if np.any(t_arr < lo) or np.any(t_arr > hi):
            raise DomainError(f"t outside the tabulated range [{lo}, {hi}]")
        out = np.interp(t_arr, spec.times, spec.rates)
    else:
        raise UnsupportedVariantError(f"unknown popularity spec {type(spec).__name__}")

    if np.ndim(t) == 0:
        return float(out)
    return out


def popularity_landmarks(spec: PopularitySpec) -> Landmarks:
    """Peak time, peak value and the inflection point after the peak."""
    if not isinstance(spec, GammaKernel):
        raise UnsupportedVariantError("landmarks are only defined for GammaKernel")
    t_max = spec.a * spec.b
    return Landmarks(t_max=t_max, w_max=spec.c, t_inf=t_max + spec.b * math.sqrt(spec.a))


def peak_rate(spec: PopularitySpec, horizon=None) -> float:
    """An upper bound for w on [0, horizon] (tight for every variant)."""
    if isinstance(spec, (Constant, GammaKernel)):
        return spec.c
    if isinstance(spec, Tabulated):
        if horizon is None:
            return max(spec.rates)
        if horizon > spec.times[-1]:
            raise DomainError(
                f"horizon {horizon} exceeds the tabulated range ending at {spec.times[-1]}"
            )
        times = np.asarray(spec.times)
        inside = [r for tk, r in zip(spec.times, spec.rates) if tk <= horizon]
        inside.append(float(np.interp(horizon, times, spec.rates)))
        return max(inside)
    raise UnsupportedVariantError(f"unknown popularity spec {type(spec).__name__}")


# --------------------------------------------------------------------------
# Degree distributions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Degenerate:
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise DomainError(f"k must be a non-negative integer, got {self.k}")


@dataclass(frozen=True)
class Discrete:
    support: tuple
    probs: tuple

    def __post_init__(self):
        support = tuple(int(s) for s in self.support)
        probs = tuple(float(p) for p in self.probs)
        if len(support) != len(probs) or not support:
            raise DomainError("support and probs must be non-empty and of equal length")
        if any(s != s0 for s, s0 in zip(support, self.support)):
            raise DomainError("support values must be integers")
        if min(support) < 0:
            raise DomainError("support values must be >= 0")
        if len(set(support)) != len(support):
            raise DomainError("support values must be distinct")
        if any(p < 0 for p in probs):
            raise DomainError("probabilities must be >= 0")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise DomainError(f"probabilities sum to {math.fsum(probs)}, not 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)


@dataclass(frozen=True)
class EmpiricalSample:
    """Observed follower counts; each count is equally likely."""
    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if not counts:
            raise DomainError("EmpiricalSample needs at least one count")
        if min(counts) < 0:
            raise DomainError("follower counts must be >= 0")
        object.__setattr__(self, "counts", counts)


@dataclass(frozen=True)
class LogNormalDiscretized:
    """Log-normal follower counts rounded to the nearest integer."""
    mu: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma) and math.isfinite(self.mu)):
            raise DomainError("LogNormalDiscretized needs finite mu and sigma > 0")


@dataclass(frozen=True)
class ParetoDiscrete:
    """Pareto(alpha) with scale m_min, rounded to the nearest integer."""
    alpha: float
    m_min: int

    def __post_init__(self):
        if not self.alpha > 1:
            raise DomainError(f"alpha must be > 1, got {self.alpha}")
        if int(self.m_min) != self.m_min or self.m_min < 1:
            raise DomainError(f"m_min must be a positive integer, got {self.m_min}")


DegreeDistribution = Union[Degenerate, Discrete, EmpiricalSample, LogNormalDiscretized, ParetoDiscrete]

FINITE_SUPPORT = (Degenerate, Discrete, EmpiricalSample)

# parametric tables are summed exactly up to this point, then closed-form tails
_TABLE_CAP = 100_000
_TAIL_SURVIVAL = 1e-13


class DegreeMoments(NamedTuple):
    mean: float
    mean_sq: float


def _lognormal_cdf(x, mu, sigma):
    if x <= 0:
        return 0.0
    return 0.5 * math.erfc(-(math.log(x) - mu) / (sigma * math.sqrt(2.0)))


def _lognormal_sf(x, mu, sigma):
    if x <= 0:
        return 1.0
    return 0.5 * math.erfc((math.log(x) - mu) / (sigma * math.sqrt(2.0)))


def _pareto_sf(x, alpha, m):
    return 1.0 if x <= m else (m / x) ** alpha


def _table_limit(dist) -> int:
    if isinstance(dist, LogNormalDiscretized):
        # survival below 1e-13 beyond about 7.4 standard deviations
        upper = math.exp(min(dist.mu + 7.5 * dist.sigma, 700.0))
    else:
        upper = dist.m_min * _TAIL_SURVIVAL ** (-1.0 / dist.alpha)
    return int(min(math.ceil(upper), _TABLE_CAP))


def degree_pmf(dist: DegreeDistribution):
    """Return ``(support, probs)`` arrays.

    Finite-support variants are exact. Parametric variants are rounded to the
    nearest integer and tabulated up to a cutoff; the mass above the cutoff is
    reported separately by :func:`_tail_survival` and is not included here.
    """
    if isinstance(dist, Degenerate):
        return np.array([dist.k]), np.array([1.0])
    if isinstance(dist, Discrete):
        return np.array(dist.support), np.array(dist.probs)
    if isinstance(dist, EmpiricalSample):
        values, freq = np.unique(np.array(dist.counts), return_counts=True)
        return values, freq / freq.sum()
    if isinstance(dist, LogNormalDiscretized):
        k = np.arange(_table_limit(dist) + 1)
        edges = [_lognormal_cdf(x, dist.mu, dist.sigma) for x in np.arange(len(k) + 1) - 0.5]
        return k, np.diff(edges)
    if isinstance(dist, ParetoDiscrete):
        k = np.arange(dist.m_min, max(_table_limit(dist), dist.m_min) + 1)
        sf = [_pareto_sf(x, dist.alpha, dist.m_min) for x in np.append(k - 0.5, k[-1] + 0.5)]
        return k, -np.diff(sf)
    raise UnsupportedVariantError(f"unknown degree distribution {type(dist).__name__}")


def _tail_moment(dist, u, j):
    """E[Y^j; Y > u] for the continuous law behind a parametric variant."""
    if isinstance(dist, LogNormalDiscretized):
        mu, s = dist.mu, dist.sigma
        z = (mu + j * s * s - math.log(u)) / s
        return math.exp(j * mu + 0.5 * j * j * s * s) * 0.5 * math.erfc(-z / math.sqrt(2.0))
    alpha, m = dist.alpha, dist.m_min
    if alpha <= j:
        return math.inf
    return alpha * m ** alpha * u ** (j - alpha) / (alpha - j)


def min_followers(dist: DegreeDistribution) -> int:
    """Smallest follower count with positive probability (m)."""
    if isinstance(dist, ParetoDiscrete):
        return dist.m_min
    if isinstance(dist, LogNormalDiscretized):
        return 0
    support, probs = degree_pmf(dist)
    return int(support[probs > 0].min())


def degree_moments(dist: DegreeDistribution) -> DegreeMoments:
    """Mean and mean square of the follower count."""
    if isinstance(dist, ParetoDiscrete):
        if dist.alpha <= 3:
            raise DivergentMomentError(
                "mean_sq", f"mean_sq diverges for ParetoDiscrete with alpha={dist.alpha} <= 3"
            )
    if isinstance(dist, EmpiricalSample):
        counts = np.array(dist.counts, dtype=float)
        return DegreeMoments(float(counts.mean()), float(np.mean(counts ** 2)))

    support, probs = degree_pmf(dist)
    support = support.astype(float)
    mean = math.fsum(support * probs)
    mean_sq = math.fsum(support ** 2 * probs)
    if not isinstance(dist, FINITE_SUPPORT):
        u = support[-1] + 0.5
        mean += _tail_moment(dist, u, 1)
        mean_sq += _tail_moment(dist, u, 2)
    return DegreeMoments(mean, max(mean_sq, mean * mean))


def degree_mgf(dist: DegreeDistribution, s: float) -> float:
    """E[exp(s Y)] for the follower count Y."""
    if s > 0 and not isinstance(dist, FINITE_SUPPORT):
        raise DomainError(f"the mgf of {type(dist).__name__} diverges for s > 0")
    support, probs = degree_pmf(dist)
    value = math.fsum(np.exp(s * support.astype(float)) * probs)
    if not isinstance(dist, FINITE_SUPPORT):
        u = support[-1] + 0.5
        if isinstance(dist, LogNormalDiscretized):
            tail = _lognormal_sf(u, dist.mu, dist.sigma)
        else:
            tail = _pareto_sf(u, dist.alpha, dist.m_min)
        value += tail * math.exp(s * u)
    if not math.isfinite(value):
        raise DomainError(f"degree mgf is not finite at s={s}")
    return value


def as_generator(rng_state) -> np.random.Generator:
    if isinstance(rng_state, np.random.Generator):
        return rng_state
    return np.random.default_rng(rng_state)


def sample_degree(dist: DegreeDistribution, rng_state, size=None):
    """Draw follower counts. Returns an int, or an int64 array when ``size`` is given."""
    rng = as_generator(rng_state)
    n = 1 if size is None else size
    if isinstance(dist, Degenerate):
        out = np.full(n, dist.k, dtype=np.int64)
    elif isinstance(dist, Discrete):
        out = rng.choice(np.array(dist.support, dtype=np.int64), size=n, p=dist.probs)
    elif isinstance(dist, EmpiricalSample):
        out = rng.choice(np.array(dist.counts, dtype=np.int64), size=n)
    elif isinstance(dist, LogNormalDiscretized):
        out = np.rint(rng.lognormal(dist.mu, dist.sigma, size=n)).astype(np.int64)
    elif isinstance(dist, ParetoDiscrete):
        # classical Pareto from numpy's Lomax draw, then rounded
        draw = dist.m_min * (1.0 + rng.pareto(dist.alpha, size=n))
        out = np.rint(draw).astype(np.int64)
    else:
        raise UnsupportedVariantError(f"unknown degree distribution {type(dist).__name__}")
    if size is None:
        return int(out[0])
    return out


# --------------------------------------------------------------------------
# Series
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise DomainError("times and values must be 1-d arrays of equal length")
        if np.any(np.diff(times) <= 0):
            raise DomainError("times must be strictly ascending")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.times)
