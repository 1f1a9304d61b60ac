"""Analytic mean, variance, mgf and normal confidence bands for X(t).

All quantities factor through the cumulative intensity
``Lambda(t) = N * integral_0^t w(s) ds``, the expected number of shoots by
time ``t``:  E[X] = <f> Lambda  and  Var[X] = <f^2> Lambda.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import NamedTuple

import numpy as np

from .errors import DomainError, NumericError, UnsupportedVariantError
from .model import (
    Constant,
    DegreeDistribution,
    GammaKernel,
    NetworkParams,
    PopularitySpec,
    Tabulated,
    degree_mgf,
)
from .special import log_lower_incomplete_gamma

# bands are flagged approximate below this many expected shoots
GAUSSIAN_VALID_INTENSITY = 30.0


def _popularity_integral(spec: PopularitySpec, t: float) -> float:
    if isinstance(spec, Constant):
        return spec.c * t
    if isinstance(spec, GammaKernel):
        if t == 0 or spec.c == 0:
            return 0.0
        a, b = spec.a, spec.b
        # c b e^a / a^a * gamma(a + 1, t / b), assembled in log space
        log_value = (math.log(spec.c) + math.log(b) + a - a * math.log(a)
                     + log_lower_incomplete_gamma(a + 1.0, t / b))
        return math.exp(log_value)
    if isinstance(spec, Tabulated):
        knots, rates = np.asarray(spec.times), np.asarray(spec.rates)
        if knots[0] != 0:
            raise DomainError("tabulated popularity must start at t=0 to be integrated from 0")
        if t > knots[-1]:
            raise DomainError(f"t={t} beyond the tabulated range ending at {knots[-1]}")
        inside = knots < t
        xs = np.append(knots[inside], t)
        ys = np.append(rates[inside], np.interp(t, knots, rates))
        return float(np.sum(0.5 * (ys[1:] + ys[:-1]) * np.diff(xs)))
    raise UnsupportedVariantError(f"unknown popularity spec {type(spec).__name__}")


def cumulative_intensity(params: NetworkParams, spec: PopularitySpec, t):
    """N times the integral of w over [0, t]. Scalar or array ``t``."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0) or np.any(~np.isfinite(t_arr)):
        raise DomainError("cumulative intensity needs finite t >= 0")
    out = np.array([params.n_users * _popularity_integral(spec, float(ti)) for ti in t_arr])
    if np.ndim(t) == 0:
        return float(out[0])
    return out


def mean_reads(params: NetworkParams, spec: PopularitySpec, t):
    """E[X(t)] = <f> Lambda(t)."""
    return params.mean_followers * cumulative_intensity(params, spec, t)


def variance_reads(params: NetworkParams, spec: PopularitySpec, t):
    """Var[X(t)] = <f^2> Lambda(t)."""
    return params.mean_sq_followers * cumulative_intensity(params, spec, t)


class AsymptoticMoments(NamedTuple):
    mean_limit_exact: float
    mean_limit_stirling: float
    var_limit_exact: float
    var_limit_stirling: float


def asymptotic_moments(params: NetworkParams, spec: GammaKernel) -> AsymptoticMoments:
    """Large-time limits of the mean and variance under a gamma kernel.

    The exact limit is N c b e^a / a^a Gamma(a + 1) times the follower moment;
    the Stirling form replaces the gamma-function factor by sqrt(2 pi (a + 1)).
    """
    if not isinstance(spec, GammaKernel):
        raise UnsupportedVariantError("asymptotic moments need a GammaKernel spec")
    a, b, c = spec.a, spec.b, spec.c
    if c == 0:
        return AsymptoticMoments(0.0, 0.0, 0.0, 0.0)
    log_total = (math.log(params.n_users) + math.log(c) + math.log(b)
                 + a - a * math.log(a) + math.lgamma(a + 1.0))
    try:
        total = math.exp(log_total)
    except OverflowError:
        raise NumericError("asymptotic intensity overflows double precision") from None
    stirling = params.n_users * b * c * math.sqrt(2.0 * math.pi * (a + 1.0))
    return AsymptoticMoments(
        mean_limit_exact=params.mean_followers * total,
        mean_limit_stirling=params.mean_followers * stirling,
        var_limit_exact=params.mean_sq_followers * total,
        var_limit_stirling=params.mean_sq_followers * stirling,
    )


def mgf_value(params: NetworkParams, spec: PopularitySpec, dist: DegreeDistribution,
              s: float, t: float) -> float:
    """M_X(s, t) = exp((M_f(s) - 1) Lambda(t)), with M_f(s) = E[exp(s Y)].

    This is the explicit solution of the linear-in-M equation
    dM/dt = N (M_f(s) - 1) w(t) M with M(s, 0) = 1.
    """
    intensity = cumulative_intensity(params, spec, t)
    if intensity == 0:
        return 1.0
    exponent = (degree_mgf(dist, s) - 1.0) * intensity
    try:
        return math.exp(exponent)
    except OverflowError:
        raise NumericError(f"mgf overflows at s={s}, t={t}") from None


def normal_quantile(level: float) -> float:
    """Two-sided standard normal quantile: P(|Z| <= z) = level."""
    if not 0.0 <= level < 1.0:
        raise DomainError(f"confidence level must lie in [0, 1), got {level}")
    if level == 0:
        return 0.0
    return NormalDist().inv_cdf(0.5 + 0.5 * level)


@dataclass(frozen=True, eq=False)
class MomentCurves:
    """Mean, variance and a Gaussian band for X(t) on a time grid.

    ``gaussian_valid`` marks grid points where the normal approximation is
    reasonable (expected number of shoots at least ``GAUSSIAN_VALID_INTENSITY``).
    """
    times: np.ndarray
    intensity: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    band_low: np.ndarray
    band_high: np.ndarray
    level: float
    z: float

    @property
    def gaussian_valid(self) -> np.ndarray:
        return self.intensity >= GAUSSIAN_VALID_INTENSITY


def confidence_band(params: NetworkParams, spec: PopularitySpec, times, level=0.95) -> MomentCurves:
    """Pointwise band mean +/- z(level) sqrt(variance), floored at zero."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) < 0):
        raise DomainError("times must be a 1-d ascending array")
    z = normal_quantile(level)
    intensity = cumulative_intensity(params, spec, times)
    mean = params.mean_followers * intensity
    variance = params.mean_sq_followers * intensity
    half = z * np.sqrt(variance)
    return MomentCurves(
        times=times,
        intensity=intensity,
        mean=mean,
        variance=variance,
        band_low=np.maximum(mean - half, 0.0),
        band_high=mean + half,
        level=level,
        z=z,
    )
