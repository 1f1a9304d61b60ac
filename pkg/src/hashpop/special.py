"""Lower incomplete gamma, log-gamma and Stirling's approximation.

Argument order is ``(s, x)`` throughout: ``lower_incomplete_gamma(s, x)``
is the integral of ``exp(-u) * u**(s - 1)`` over ``[0, x]``.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass

from .errors import ConvergenceError, DomainError, NumericError

MAX_ITERATIONS = 500
EPS = 1e-15
_TINY = sys.float_info.min / sys.float_info.epsilon


@dataclass(frozen=True)
class GammaEvalResult:
    value: float
    converged: bool
    terms_used: int


def log_gamma(z: float) -> float:
    """ln Gamma(z) for z > 0."""
    if not z > 0:
        raise DomainError(f"log_gamma requires z > 0, got {z}")
    return math.lgamma(z)


def _series(s, x):
    # sum_{n>=0} x^n / (s (s+1) ... (s+n)); P(s,x) = sum * x^s e^-x / Gamma(s)
    term = 1.0 / s
    total = term
    ap = s
    for n in range(1, MAX_ITERATIONS + 1):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * EPS:
            return total, n
    raise ConvergenceError(
        f"incomplete gamma series did not converge for s={s}, x={x}", terms_used=MAX_ITERATIONS
    )


def _continued_fraction(s, x):
    # modified Lentz evaluation of the continued fraction for Q(s, x)
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITERATIONS + 1):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            return h, i
    raise ConvergenceError(
        f"incomplete gamma continued fraction did not converge for s={s}, x={x}",
        terms_used=MAX_ITERATIONS,
    )


def regularized_lower_gamma(s: float, x: float) -> GammaEvalResult:
    """P(s, x) = gamma(s, x) / Gamma(s), with iteration diagnostics."""
    if not s > 0:
        raise DomainError(f"s must be > 0, got {s}")
    if not x >= 0:
        raise DomainError(f"x must be >= 0, got {x}")
    if x == 0:
        return GammaEvalResult(0.0, True, 0)
    if math.isinf(x):
        return GammaEvalResult(1.0, True, 0)
    log_prefactor = -x + s * math.log(x) - math.lgamma(s)
    if x < s + 1.0:
        total, n = _series(s, x)
        return GammaEvalResult(total * math.exp(log_prefactor), True, n)
    h, n = _continued_fraction(s, x)
    return GammaEvalResult(1.0 - h * math.exp(log_prefactor), True, n)


def lower_incomplete_gamma_eval(s: float, x: float) -> GammaEvalResult:
    p = regularized_lower_gamma(s, x)
    log_g = math.lgamma(s)
    if log_g > 709.0:
        raise NumericError(f"Gamma({s}) overflows; use regularized_lower_gamma")
    return GammaEvalResult(p.value * math.exp(log_g), p.converged, p.terms_used)


def lower_incomplete_gamma(s: float, x: float) -> float:
    """gamma(s, x), the lower incomplete gamma function.

    Uses the power series when ``x < s + 1`` and the continued fraction for
    the upper function otherwise. Raises :class:`ConvergenceError` (carrying
    ``terms_used``) if neither settles within ``MAX_ITERATIONS`` terms.
    """
    return lower_incomplete_gamma_eval(s, x).value


def log_lower_incomplete_gamma(s: float, x: float) -> float:
    """ln gamma(s, x); stays finite where gamma(s, x) itself would overflow."""
    p = regularized_lower_gamma(s, x).value
    if p <= 0:
        return -math.inf
    return math.log(p) + math.lgamma(s)


def stirling_gamma(z: float) -> float:
    """Leading-order Stirling approximation sqrt(2 pi / z) (z / e)^z."""
    if not z > 0:
        raise DomainError(f"stirling_gamma requires z > 0, got {z}")
    log_value = 0.5 * math.log(2.0 * math.pi / z) + z * (math.log(z) - 1.0)
    try:
        return math.exp(log_value)
    except OverflowError:
        raise NumericError(f"stirling_gamma({z}) overflows double precision") from None
