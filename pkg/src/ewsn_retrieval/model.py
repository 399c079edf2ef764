r"""Network model of a single energy-harvesting sensor.

Each of the N sensors stores up to B energy units, harvests one unit at rate
:math:`\lambda_e` (discarded at a full battery) and, while it holds energy,
broadcasts at rate :math:`\mu/N`, spending one unit. The battery level is a
birth-death chain whose stationary law is geometric; the time W from a
stationary instant to the sensor's next broadcast is phase-type with two
phases (empty battery, then non-empty battery), giving the survival form

.. math:: P(W > t) = \omega e^{-(\mu/N) t} + (1 - \omega) e^{-\lambda_e t}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ewsn_retrieval.errors import ValidationError
from ewsn_retrieval.phtype import PhaseType

EQUAL_RATE_EPS = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Parameters ``(N, B, lambda_e, mu, lambda_a)`` of the sensor network."""

    n_sensors: int
    battery_cap: int
    harvest_rate: float
    network_broadcast_rate: float
    client_arrival_rate: Optional[float] = None

    def __post_init__(self) -> None:
        if isinstance(self.n_sensors, bool) or int(self.n_sensors) != self.n_sensors or self.n_sensors < 1:
            raise ValidationError(f"n_sensors must be a positive integer, got {self.n_sensors!r}")
        if isinstance(self.battery_cap, bool) or int(self.battery_cap) != self.battery_cap or self.battery_cap < 1:
            raise ValidationError(f"battery_cap must be a positive integer, got {self.battery_cap!r}")
        object.__setattr__(self, "n_sensors", int(self.n_sensors))
        object.__setattr__(self, "battery_cap", int(self.battery_cap))
        for name in ("harvest_rate", "network_broadcast_rate"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0:
                raise ValidationError(f"{name} must be a positive finite rate, got {value!r}")
            object.__setattr__(self, name, value)
        if self.client_arrival_rate is not None:
            rate = float(self.client_arrival_rate)
            if not math.isfinite(rate) or rate <= 0:
                raise ValidationError(f"client_arrival_rate must be positive when given, got {rate!r}")
            object.__setattr__(self, "client_arrival_rate", rate)

    @property
    def sensor_broadcast_rate(self) -> float:
        """Per-sensor broadcast rate mu/N."""
        return self.network_broadcast_rate / self.n_sensors

    @property
    def load_ratio(self) -> float:
        """Birth/death ratio lambda_e N / mu of the battery chain."""
        return self.harvest_rate * self.n_sensors / self.network_broadcast_rate

    def as_dict(self) -> dict:
        return {
            "n_sensors": self.n_sensors,
            "battery_cap": self.battery_cap,
            "harvest_rate": self.harvest_rate,
            "network_broadcast_rate": self.network_broadcast_rate,
            "client_arrival_rate": self.client_arrival_rate,
        }


@dataclass(frozen=True)
class EstimationSpec:
    """Noise variance of one measurement and the variance target of the sample mean."""

    noise_variance: float
    reliability_threshold: float

    def __post_init__(self) -> None:
        if not self.noise_variance > 0:
            raise ValidationError(f"noise_variance must be > 0, got {self.noise_variance!r}")
        if not self.reliability_threshold > 0:
            raise ValidationError(f"reliability_threshold must be > 0, got {self.reliability_threshold!r}")


@dataclass(frozen=True)
class SteadyState:
    """Stationary battery distribution; ``probs[i]`` is the probability of level i."""

    probs: np.ndarray

    @property
    def empty(self) -> float:
        """Probability of a depleted battery (nu_0)."""
        return float(self.probs[0])

    @property
    def levels(self) -> int:
        return int(self.probs.shape[0])


@dataclass(frozen=True)
class SurvivalForm:
    """Two-exponential form of ``P(W > t)``.

    ``weight_fast`` may fall outside [0, 1]; it is a signed mixture weight and
    is never clamped. When ``equal_rate_flag`` is set the weight is unused and
    the limiting form ``e^{-r t}(1 + nu_0 r t)`` applies.
    """

    weight_fast: float
    rate_broadcast: float
    rate_harvest: float
    equal_rate_flag: bool
    empty_prob: float

    def survival(self, t: float) -> float:
        if t < 0:
            raise ValidationError(f"t must be >= 0, got {t}")
        if self.equal_rate_flag:
            r = self.rate_broadcast
            return math.exp(-r * t) * (1.0 + self.empty_prob * r * t)
        w = self.weight_fast
        return w * math.exp(-self.rate_broadcast * t) + (1.0 - w) * math.exp(-self.rate_harvest * t)

    def cdf(self, t: float) -> float:
        if t < 0:
            raise ValidationError(f"t must be >= 0, got {t}")
        if self.equal_rate_flag:
            r = self.rate_broadcast
            return -math.expm1(-r * t) - self.empty_prob * r * t * math.exp(-r * t)
        w = self.weight_fast
        return -w * math.expm1(-self.rate_broadcast * t) - (1.0 - w) * math.expm1(-self.rate_harvest * t)

    def cdf_values(self, ts: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`cdf`, clipped to [0, 1]."""
        ts = np.asarray(ts, dtype=float)
        if self.equal_rate_flag:
            r = self.rate_broadcast
            values = -np.expm1(-r * ts) - self.empty_prob * r * ts * np.exp(-r * ts)
        else:
            w = self.weight_fast
            values = -w * np.expm1(-self.rate_broadcast * ts) - (1.0 - w) * np.expm1(-self.rate_harvest * ts)
        return np.clip(values, 0.0, 1.0)

    def integral(self) -> float:
        """Mean of W, the integral of the survival function."""
        if self.equal_rate_flag:
            return (1.0 + self.empty_prob) / self.rate_broadcast
        return self.weight_fast / self.rate_broadcast + (1.0 - self.weight_fast) / self.rate_harvest


def steady_state(p: ModelParams) -> SteadyState:
    """Geometric stationary law ``nu(i) = nu_0 (lambda_e N / mu)^i`` of the battery chain."""
    ratio = p.load_ratio
    levels = np.arange(p.battery_cap + 1)
    if ratio == 1.0:
        return SteadyState(probs=np.full(p.battery_cap + 1, 1.0 / (p.battery_cap + 1)))

    # normalize in log space so large B with ratio > 1 cannot overflow
    log_weights = levels * math.log(ratio)
    weights = np.exp(log_weights - log_weights.max())
    return SteadyState(probs=weights / math.fsum(weights))


def total_variation(a: Sequence[float], b: Sequence[float]) -> float:
    """Total-variation distance between two distributions on the same levels."""
    a = np.asarray(getattr(a, "probs", a), dtype=float)
    b = np.asarray(getattr(b, "probs", b), dtype=float)
    if a.shape != b.shape:
        raise ValidationError(f"distributions have different supports: {a.shape} vs {b.shape}")
    return 0.5 * float(np.abs(a - b).sum())


def required_samples(e: EstimationSpec) -> int:
    """Sample size ``ceil(sigma^2 / H)``, at least 1, that brings Var(mean) below H."""
    return max(1, math.ceil(e.noise_variance / e.reliability_threshold))


def w_phase_type(p: ModelParams) -> PhaseType:
    """Two-phase representation of W: phase 0 is an empty battery, phase 1 pools levels 1..B."""
    nu0 = steady_state(p).empty
    lam, r = p.harvest_rate, p.sensor_broadcast_rate
    return PhaseType(alpha=np.array([nu0, 1.0 - nu0]), T=np.array([[-lam, lam], [0.0, -r]]))


def survival_form(p: ModelParams) -> SurvivalForm:
    """Signed mixture weight ``omega = 1 - nu_0 (mu/N) / (mu/N - lambda_e)``."""
    nu0 = steady_state(p).empty
    lam, r = p.harvest_rate, p.sensor_broadcast_rate
    equal = abs(lam - r) <= EQUAL_RATE_EPS * max(lam, r)
    omega = math.nan if equal else 1.0 - nu0 * r / (r - lam)
    return SurvivalForm(
        weight_fast=omega,
        rate_broadcast=r,
        rate_harvest=lam,
        equal_rate_flag=equal,
        empty_prob=nu0,
    )


def w_survival(p: ModelParams, t: float) -> float:
    """``P(W > t)``."""
    return survival_form(p).survival(t)


def w_cdf(p: ModelParams, t: float) -> float:
    """``P(W <= t)`` evaluated with expm1, accurate for small t."""
    return survival_form(p).cdf(t)


def w_mean(p: ModelParams) -> float:
    """``E[W] = N/mu + nu_0/lambda_e``."""
    return 1.0 / p.sensor_broadcast_rate + steady_state(p).empty / p.harvest_rate
