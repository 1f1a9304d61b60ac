"""Empirical popularity, smoothing and Levenberg-Marquardt fit of the gamma kernel."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    DomainError,
    EmptyInputError,
    NoSignalError,
    RankDeficiencyError,
    UndefinedStatisticError,
)
from .model import GammaKernel, TimeSeries

# keep the logistic reparameterisation of c finite
_C_FLOOR = 1e-12
_C_CEIL = 1.0 - 1e-9


def empirical_popularity(records, n_users: int, n_bins: int, horizon: float | None = None) -> TimeSeries:
    """Fraction of distinct users active per bin, divided by the bin width.

    ``[0, horizon]`` (default: the last record time) is split into ``n_bins``
    equal bins. A user shooting several times in one bin counts once there.
    Values are rates, so they do not depend on the bin count.
    """
    if not records:
        raise EmptyInputError("no records to bin")
    if n_bins < 1 or n_users < 1:
        raise DomainError("n_bins and n_users must be >= 1")
    times = np.array([r.timestamp for r in records], dtype=float)
    if np.any(times < 0):
        raise DomainError("record timestamps must be >= 0")
    t_end = float(times.max()) if horizon is None else float(horizon)
    if not t_end > 0:
        raise NoSignalError("records span zero time; nothing to bin")
    width = t_end / n_bins

    keep = times <= t_end
    bins = np.minimum((times[keep] / width).astype(np.int64), n_bins - 1)
    user_index = {}
    users = np.array([user_index.setdefault(r.user_id, len(user_index))
                      for r, k in zip(records, keep) if k], dtype=np.int64)
    pairs = np.unique(bins * (len(user_index) + 1) + users)
    active = np.bincount(pairs // (len(user_index) + 1), minlength=n_bins)

    centers = (np.arange(n_bins) + 0.5) * width
    return TimeSeries(centers, active / (n_users * width))


def moving_average(series: TimeSeries, k: int) -> TimeSeries:
    """Centered k-point moving average.

    Near the ends the window is cut off at the series boundary, so the first
    point averages itself and its (k - 1) / 2 right neighbours.
    """
    if int(k) != k or k < 1 or k % 2 == 0:
        raise DomainError(f"smoothing window must be an odd positive integer, got {k}")
    values = series.values
    n = len(values)
    half = k // 2
    csum = np.concatenate(([0.0], np.cumsum(values)))
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half, n - 1) + 1
    return TimeSeries(series.times, (csum[hi] - csum[lo]) / (hi - lo))


class InitialGuess(NamedTuple):
    a0: float
    b0: float
    c0: float


def _half_max_width(t, v, i_peak, half):
    left = t[0]
    for j in range(i_peak - 1, -1, -1):
        if v[j] < half:
            left = t[j] + (half - v[j]) / (v[j + 1] - v[j]) * (t[j + 1] - t[j])
            break
    right = t[-1]
    for j in range(i_peak + 1, len(v)):
        if v[j] < half:
            right = t[j - 1] + (v[j - 1] - half) / (v[j - 1] - v[j]) * (t[j] - t[j - 1])
            break
    return right - left


def initial_guess(series: TimeSeries) -> InitialGuess:
    """Starting point for the fit from the peak and its half-maximum width.

    The peak time fixes a0 * b0; the width fixes b0 through the curvature of
    log w at the peak, floored at a tenth of the peak time.
    """
    t, v = series.times, series.values
    if len(v) == 0 or not np.max(v) > 0:
        raise NoSignalError("series has no positive values")
    i_peak = int(np.argmax(v))
    c0 = float(v[i_peak])
    t_peak = float(t[i_peak])
    if not t_peak > 0:
        raise DomainError("series peaks at t <= 0, which a gamma kernel cannot match")
    width = _half_max_width(t, v, i_peak, 0.5 * c0)
    b0 = max(width ** 2 / (4.0 * t_peak), t_peak / 10.0)
    return InitialGuess(a0=t_peak / b0, b0=b0, c0=c0)


def gamma_kernel_values(t, a, b, c):
    """Vectorised gamma kernel; returns inf where it overflows."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    with np.errstate(over="ignore", invalid="ignore"):
        out[pos] = c * np.exp(a - a * math.log(a * b) + a * np.log(t[pos]) - t[pos] / b)
    return out


def _to_natural(theta):
    alpha, beta, g = theta
    with np.errstate(over="ignore"):
        return math.exp(min(alpha, 700.0)), math.exp(min(beta, 700.0)), 1.0 / (1.0 + math.exp(min(-g, 700.0)))


def _to_theta(a, b, c):
    c = min(max(c, _C_FLOOR), _C_CEIL)
    return np.array([math.log(a), math.log(b), math.log(c / (1.0 - c))])


class GoodnessOfFit(NamedTuple):
    rmse: float
    r_squared: float


def fit_statistics(values, predicted) -> GoodnessOfFit:
    values = np.asarray(values, dtype=float)
    resid = values - np.asarray(predicted, dtype=float)
    ss_res = float(resid @ resid)
    centered = values - values.mean()
    ss_tot = float(centered @ centered)
    if ss_tot == 0:
        raise UndefinedStatisticError("r_squared is undefined for a constant series")
    return GoodnessOfFit(math.sqrt(ss_res / len(values)), 1.0 - ss_res / ss_tot)


@dataclass(frozen=True, eq=False)
class FitResult:
    a: float
    b: float
    c: float
    covariance: np.ndarray
    rmse: float
    r_squared: float
    iterations: int
    converged: bool
    gradient_norm: float = math.nan
    message: str = ""
    # SSE after the initial point and after every accepted step
    objective_history: tuple = field(default_factory=tuple)

    @property
    def spec(self) -> GammaKernel:
        return GammaKernel(self.a, self.b, self.c)

    @property
    def peak_time(self) -> float:
        return self.a * self.b

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


def goodness_of_fit(series: TimeSeries, fit: FitResult) -> GoodnessOfFit:
    """RMSE and coefficient of determination of the fitted kernel on ``series``."""
    return fit_statistics(series.values, gamma_kernel_values(series.times, fit.a, fit.b, fit.c))


def lm_fit_gamma(series: TimeSeries, guess: InitialGuess, max_iterations: int = 200,
                 ftol: float = 1e-10, gtol: float = 1e-8, lambda0: float = 1e-3) -> FitResult:
    """Least-squares fit of the gamma kernel by Levenberg-Marquardt.

    The parameters are searched as (log a, log b, logit c), so every iterate
    satisfies a, b > 0 and 0 < c < 1. Steps solve
    ``(J'J + lambda diag(J'J)) delta = -J'r`` with a forward-difference
    Jacobian; lambda shrinks tenfold after an accepted step and grows tenfold
    after a rejected one. Running out of iterations returns a result with
    ``converged=False`` instead of raising.
    """
    t, v = series.times, series.values
    if len(t) < 4:
        raise DomainError("need at least 4 points to fit 3 parameters")
    if not (guess.a0 > 0 and guess.b0 > 0 and guess.c0 > 0):
        raise DomainError(f"invalid initial guess {guess}")

    def residuals(theta):
        r = gamma_kernel_values(t, *_to_natural(theta)) - v
        r[~np.isfinite(r)] = np.inf
        return r

    def sse_of(r):
        return math.inf if not np.all(np.isfinite(r)) else float(r @ r)

    def jacobian(theta, r):
        jac = np.empty((len(t), 3))
        for j in range(3):
            step = 1e-6 * (1.0 + abs(theta[j]))
            shifted = theta.copy()
            shifted[j] += step
            jac[:, j] = (residuals(shifted) - r) / step
        return jac

    theta = _to_theta(guess.a0, guess.b0, guess.c0)
    r = residuals(theta)
    sse = sse_of(r)
    if not math.isfinite(sse):
        raise DomainError("initial guess produces a non-finite objective")
    history = [sse]
    lam = lambda0
    converged = False
    message = "maximum iterations reached"
    jac = None
    grad_norm = math.nan
    iterations = 0

    for iterations in range(1, max_iterations + 1):
        if jac is None:
            jac = jacobian(theta, r)
            grad = jac.T @ r
            grad_norm = float(np.max(np.abs(2.0 * grad)))
            normal = jac.T @ jac
            diag = np.diag(normal).copy()
        if grad_norm < gtol or sse == 0.0:
            converged, message = True, "gradient below tolerance"
            break
        if not np.all(np.isfinite(normal)) or np.any(diag <= 0):
            raise RankDeficiencyError("normal equations are singular: a parameter has no effect")
        try:
            delta = np.linalg.solve(normal + lam * np.diag(diag), -grad)
        except np.linalg.LinAlgError:
            raise RankDeficiencyError("normal equations are singular") from None

        trial = theta + delta
        r_trial = residuals(trial)
        sse_trial = sse_of(r_trial)
        if sse_trial < sse:
            decrease = (sse - sse_trial) / sse
            theta, r, sse = trial, r_trial, sse_trial
            history.append(sse)
            lam = max(lam / 10.0, 1e-15)
            jac = None
            if decrease < ftol:
                converged, message = True, "relative objective decrease below tolerance"
                break
        else:
            lam *= 10.0
            if lam > 1e16:
                message = "damping exhausted without further decrease"
                break

    a, b, c = _to_natural(theta)
    jac_theta = jacobian(theta, r)
    # chain rule from (log a, log b, logit c) to (a, b, c)
    jac_nat = jac_theta * np.array([1.0 / a, 1.0 / b, 1.0 / (c * (1.0 - c))])
    dof = len(t) - 3
    s2 = sse / dof if dof > 0 else math.nan
    covariance = s2 * np.linalg.pinv(jac_nat.T @ jac_nat)
    try:
        gof = fit_statistics(v, gamma_kernel_values(t, a, b, c))
    except UndefinedStatisticError:
        gof = GoodnessOfFit(math.sqrt(sse / len(t)), math.nan)
    return FitResult(
        a=a, b=b, c=c, covariance=covariance, rmse=gof.rmse, r_squared=gof.r_squared,
        iterations=iterations, converged=converged, gradient_norm=grad_norm,
        message=message, objective_history=tuple(history),
    )
