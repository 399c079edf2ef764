r"""Retrieval time of s innovative measurements.

A client arriving in steady state needs s broadcasts from distinct sensors.
The per-sensor times are i.i.d. copies of W, so the retrieval time W_s is
their s-th order statistic. Everything here runs on the scalar two-exponential
form of ``P(W > t)`` and is polynomial in N; :mod:`ewsn_retrieval.phtype`
provides the exponential-cost matrix cross-check.
"""
from __future__ import annotations

import math
import numbers
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Tuple

import numpy as np
from scipy import integrate
from scipy.special import gammaln
from scipy.stats import binom

from ewsn_retrieval import phtype
from ewsn_retrieval.errors import NumericError, ValidationError
from ewsn_retrieval.model import ModelParams, SurvivalForm, survival_form, w_phase_type
from ewsn_retrieval.utils.decorators import memoize, require
from ewsn_retrieval.utils.log import logger

EXACT_BINOMIAL_MAX_N = 60
QUADRATURE_RTOL = 1e-10
TAIL_SCALE_FACTOR = 50.0
# sum |terms| / |E[W_s]| above which the closed form loses ~1e-8 relative accuracy
CONDITIONING_LIMIT = 1e8
# log-space terms carry ~1e-13 relative error each
LOG_SPACE_CONDITIONING_LIMIT = 1e5

METHODS = ("closed", "quadrature", "matrix")


@dataclass(frozen=True)
class RetrievalQuery:
    """Model parameters plus the number s of distinct measurements needed."""

    params: ModelParams
    samples_needed: int

    def __post_init__(self) -> None:
        s = self.samples_needed
        if isinstance(s, bool) or int(s) != s:
            raise ValidationError(f"samples_needed must be an integer, got {s!r}")
        object.__setattr__(self, "samples_needed", int(s))
        if not 1 <= self.samples_needed <= self.params.n_sensors:
            raise ValidationError(
                f"samples_needed must satisfy 1 <= s <= N, got s={self.samples_needed}, N={self.params.n_sensors}"
            )


def _w_cdf_clipped(form: SurvivalForm, t: float) -> float:
    return min(1.0, max(0.0, form.cdf(t)))


def ws_cdf(q: RetrievalQuery, t: float) -> float:
    """``P(W_s <= t) = sum_{j>=s} C(N,j) F^j S^{N-j}``, the binomial upper tail."""
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    F = _w_cdf_clipped(survival_form(q.params), t)
    return float(binom.sf(q.samples_needed - 1, q.params.n_sensors, F))


def ws_cdf_values(q: RetrievalQuery, ts: np.ndarray) -> np.ndarray:
    """Vectorized :func:`ws_cdf` over an array of times."""
    ts = np.asarray(ts, dtype=float)
    if np.any(ts < 0):
        raise ValidationError("times must be >= 0")
    F = survival_form(q.params).cdf_values(ts)
    return binom.sf(q.samples_needed - 1, q.params.n_sensors, F)


def ws_survival(q: RetrievalQuery, t: float) -> float:
    """``P(W_s > t) = sum_{j<s} C(N,j) F^j S^{N-j}``."""
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    F = _w_cdf_clipped(survival_form(q.params), t)
    return float(binom.cdf(q.samples_needed - 1, q.params.n_sensors, F))


def _alternating_sign(j: int, k: int) -> int:
    # (-1)^(j-k) from expanding (1 - S)^j
    return -1 if (j - k) % 2 else 1


@memoize
def _binomial_row(n: int) -> Tuple[int, ...]:
    return tuple(math.comb(n, v) for v in range(n + 1))


def _outer_coefficients(n: int, s: int) -> List[int]:
    """Exact integers ``c_k = sum_{k<=j<s} C(n,j) C(j,k) (-1)^(j-k)`` weighting ``E[min of n-k]``."""
    return [
        sum(math.comb(n, j) * math.comb(j, k) * _alternating_sign(j, k) for j in range(k, s))
        for k in range(s)
    ]


def _mixture_growth(form: SurvivalForm, n: int) -> float:
    """Natural log of ``(|w| + |1-w|)^n``, the amplification of the mixture expansion alone."""
    w = form.weight_fast
    return n * math.log(abs(w) + abs(1.0 - w))


def _ratio(value: float, magnitude: float) -> float:
    return magnitude / abs(value) if value else math.inf


def _closed_form_exact(q: RetrievalQuery, form: SurvivalForm) -> Tuple[float, float]:
    """Closed form in double precision with exact integer coefficients.

    Returns the value and its conditioning ``sum |terms| / value``; the
    rounding error is about machine epsilon times the conditioning.
    """
    N, s = q.params.n_sensors, q.samples_needed
    w, lam, r = form.weight_fast, form.rate_harvest, form.rate_broadcast
    terms: List[float] = []
    sizes: List[float] = []
    for k, c in enumerate(_outer_coefficients(N, s)):
        if c == 0:
            continue
        m = N - k
        row = _binomial_row(m)
        inner = [row[v] * w**v * (1.0 - w) ** (m - v) / (lam * (m - v) + r * v) for v in range(m + 1)]
        terms.append(c * math.fsum(inner))
        sizes.append(abs(c) * math.fsum(abs(x) for x in inner))
    value = math.fsum(terms)
    return value, _ratio(value, math.fsum(sizes))


def _signed_log_sum(signs: List[int], logs: List[float]) -> Tuple[int, float, float]:
    """``(sign, log|sum|, log sum|.|)`` of ``sum sign_i exp(log_i)``."""
    if not logs:
        return 0, -math.inf, -math.inf
    top = max(logs)
    scaled = [math.exp(lg - top) for lg in logs]
    total = math.fsum(sg * x for sg, x in zip(signs, scaled))
    size = top + math.log(math.fsum(scaled))
    if total == 0:
        return 0, -math.inf, size
    return (1 if total > 0 else -1), top + math.log(abs(total)), size


def _closed_form_log_space(q: RetrievalQuery, form: SurvivalForm) -> Tuple[float, float]:
    """Same sum as :func:`_closed_form_exact` with every term kept as a signed logarithm."""
    N, s = q.params.n_sensors, q.samples_needed
    w, lam, r = form.weight_fast, form.rate_harvest, form.rate_broadcast
    log_w = math.log(abs(w)) if w != 0 else -math.inf
    log_1w = math.log(abs(1.0 - w)) if w != 1 else -math.inf
    outer_signs: List[int] = []
    outer_logs: List[float] = []
    size_logs: List[float] = []
    for k, c in enumerate(_outer_coefficients(N, s)):
        if c == 0:
            continue
        m = N - k
        signs: List[int] = []
        logs: List[float] = []
        for v in range(m + 1):
            if (v and log_w == -math.inf) or (m - v and log_1w == -math.inf):
                continue
            negative = (w < 0 and v % 2 == 1) != (w > 1 and (m - v) % 2 == 1)
            sign = -1 if negative else 1
            signs.append(sign)
            logs.append(
                float(gammaln(m + 1) - gammaln(v + 1) - gammaln(m - v + 1))
                + (v * log_w if v else 0.0)
                + ((m - v) * log_1w if m - v else 0.0)
                - math.log(lam * (m - v) + r * v)
            )
        inner_sign, inner_log, inner_size = _signed_log_sum(signs, logs)
        log_c = math.log(abs(c))
        size_logs.append(log_c + inner_size)
        if inner_sign:
            outer_signs.append(inner_sign * (1 if c > 0 else -1))
            outer_logs.append(log_c + inner_log)
    sign, log_value, _ = _signed_log_sum(outer_signs, outer_logs)
    if sign == 0:
        return 0.0, math.inf
    _, _, log_size = _signed_log_sum([1] * len(size_logs), size_logs)
    return sign * math.exp(log_value), math.exp(min(log_size - log_value, 700.0))


def expected_time_closed_form(q: RetrievalQuery) -> float:
    r"""Closed-form ``E[W_s]``.

    .. math::
        \sum_{j=0}^{s-1} \binom{N}{j} \sum_{k=0}^{j} \binom{j}{k} (-1)^{j-k}
        \sum_{v=0}^{N-k} \binom{N-k}{v} \frac{\omega^v (1-\omega)^{N-k-v}}{\lambda_e (N-k-v) + (\mu/N) v}

    The j sum is folded into exact integer weights per k before any floating
    point work. The alternating sum still cancels heavily for large s or for
    omega far outside [0, 1], so the measured ratio of absolute to signed
    sum is checked and quadrature is used when it exceeds the limit. Equal
    rates, where omega is undefined, go to quadrature directly.
    """
    form = survival_form(q.params)
    N = q.params.n_sensors
    if form.equal_rate_flag:
        logger.debug(f"equal rates at N={N}, lambda_e={form.rate_harvest}; closed form delegates to quadrature")
        return expected_time_quadrature(q)
    if _mixture_growth(form, N) > math.log(CONDITIONING_LIMIT):
        logger.debug(f"omega={form.weight_fast} is ill-conditioned for N={N}; closed form delegates to quadrature")
        return expected_time_quadrature(q)
    if N <= EXACT_BINOMIAL_MAX_N:
        value, conditioning = _closed_form_exact(q, form)
        limit = CONDITIONING_LIMIT
    else:
        value, conditioning = _closed_form_log_space(q, form)
        limit = LOG_SPACE_CONDITIONING_LIMIT
    if conditioning > limit:
        logger.debug(
            f"closed form at N={N}, s={q.samples_needed} cancels by {conditioning:.3g}; delegates to quadrature"
        )
        return expected_time_quadrature(q)
    if value <= 0:
        raise NumericError(f"closed form gave non-positive E[W_s]={value:.6g} at N={N}, s={q.samples_needed}")
    return value


def _time_scale(p: ModelParams) -> float:
    return max(1.0 / p.sensor_broadcast_rate, 1.0 / p.harvest_rate)


def _breakpoints(scale: float, t_max: float) -> List[float]:
    points = [0.0]
    edge = scale / 1024.0
    while edge < t_max:
        points.append(edge)
        edge *= 2.0
    points.append(t_max)
    return points


def expected_time_quadrature(q: RetrievalQuery, rtol: float = QUADRATURE_RTOL) -> float:
    """``E[W_s] = integral of P(W_s > t)`` by adaptive quadrature plus an exponential tail.

    Raises:
        NumericError: when a segment does not converge; the message reports
            the achieved error estimate.
    """
    p = q.params
    form = survival_form(p)
    N, s = p.n_sensors, q.samples_needed

    def integrand(t: float) -> float:
        return float(binom.cdf(s - 1, N, _w_cdf_clipped(form, t)))

    scale = _time_scale(p)
    t_max = TAIL_SCALE_FACTOR * scale
    points = _breakpoints(scale, t_max)
    pieces: List[float] = []
    errors: List[float] = []
    for a, b in zip(points[:-1], points[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            out = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=rtol, limit=200, full_output=1)
        pieces.append(out[0])
        errors.append(out[1])

    # beyond t_max the survival decays at least like its slowest exponential
    slowest = (N - s + 1) * min(form.rate_broadcast, form.rate_harvest)
    pieces.append(integrand(t_max) / slowest)

    total = math.fsum(pieces)
    achieved = math.fsum(errors)
    if not math.isfinite(total):
        raise NumericError("quadrature produced a non-finite expectation")
    if achieved > 100 * rtol * abs(total):
        raise NumericError(
            f"quadrature did not converge: achieved abs error {achieved:.3g} for value {total:.6g} "
            f"(target rtol {rtol:g})"
        )
    return total


def expected_time_matrix(q: RetrievalQuery, k: int = 1, cap: int = phtype.DEFAULT_DIMENSION_CAP) -> float:
    """k-th moment of W_s through the Kronecker matrix path."""
    return phtype.order_stat_moment(w_phase_type(q.params), q.params.n_sensors, q.samples_needed, k, cap=cap)


def expected_time(q: RetrievalQuery, method: str = "closed", cap: int = phtype.DEFAULT_DIMENSION_CAP) -> float:
    """``E[W_s]`` by the named method: ``closed``, ``quadrature`` or ``matrix``."""
    if method == "closed":
        return expected_time_closed_form(q)
    if method == "quadrature":
        return expected_time_quadrature(q)
    if method == "matrix":
        return expected_time_matrix(q, cap=cap)
    raise ValidationError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")


_COUNT = (lambda v: isinstance(v, numbers.Integral) and v >= 1, "an integer >= 1")
_RATE = (lambda v: v > 0 and math.isfinite(v), "a finite rate > 0")


@require(n=_COUNT, k=(lambda k: isinstance(k, numbers.Integral) and k >= 0, "an integer >= 0"))
def identity_check(n: int, k: int) -> Fraction:
    """Exact value of ``C(n,k) sum_v C(k,v) (-1)^(k-v) (n-k)/(n-v)``, which is 1 for 0 <= k < n."""
    if k >= n:
        raise ValidationError(f"identity requires 0 <= k < n, got k={k}, n={n}")
    total = sum(
        (Fraction(math.comb(k, v) * (-1) ** (k - v) * (n - k), n - v) for v in range(k + 1)),
        Fraction(0),
    )
    return math.comb(n, k) * total


def _rank_ok(n: int, s: int) -> None:
    if not 1 <= s <= n:
        raise ValidationError(f"rank s must satisfy 1 <= s <= n, got s={s}, n={n}")


@require(n=_COUNT, mu=_RATE)
def asymptotic_harvest(n: int, s: int, mu: float) -> float:
    """Limit of ``E[W_s]`` as lambda_e grows without bound: ``sum_{j<s} 1/(mu (1 - j/N))``."""
    _rank_ok(n, s)
    return math.fsum(1.0 / (mu * (1.0 - j / n)) for j in range(s))


@require(n=_COUNT, lambda_e=_RATE, mu=_RATE)
def asymptotic_battery(n: int, s: int, lambda_e: float, mu: float) -> float:
    """Limit of ``E[W_s]`` as B grows without bound.

    The bottleneck rate is lambda_e while harvesting is slower than mu/N, and
    mu/N otherwise; the two branches coincide at lambda_e = mu/N.
    """
    _rank_ok(n, s)
    rate = min(lambda_e, mu / n)
    return math.fsum(1.0 / (rate * (n - j)) for j in range(s))


@require(s=_COUNT, mu=_RATE)
def asymptotic_network(s: int, mu: float) -> float:
    """Limit of ``E[W_s]`` as N grows without bound: ``s / mu``."""
    return s / mu
