r"""Phase-type distributions and their order statistics.

A phase-type distribution :math:`(\alpha, T)` is the absorption time of a
finite continuous-time Markov chain with initial vector :math:`\alpha` over
the transient states and sub-generator :math:`T`:

.. math:: F(t) = 1 - \alpha e^{T t} \mathbf{1}

This module is the exact matrix path. Everything built on Kronecker sums
grows as :math:`p^n` and refuses to run beyond a dimension cap; the scalar
path in :mod:`ewsn_retrieval.retrieval` has no such limit.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Dict, Iterator, Tuple

import numpy as np
from scipy import linalg
from scipy.stats import poisson

from ewsn_retrieval.errors import CapacityError, DimensionError, NumericError, ValidationError

DenseMatrix = np.ndarray

DEFAULT_DIMENSION_CAP = 4096
UNIFORMIZATION_TOL = 1e-12
_STRUCTURE_ATOL = 1e-12


@dataclass(frozen=True)
class PhaseType:
    """Representation ``(alpha, T)`` of a phase-type distribution."""

    alpha: np.ndarray
    T: np.ndarray

    def __post_init__(self) -> None:
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        T = np.asarray(self.T, dtype=float)
        _require_square(T, "T")
        if alpha.shape[0] != T.shape[0]:
            raise DimensionError(f"alpha has {alpha.shape[0]} phases but T is {T.shape[0]}x{T.shape[1]}")
        if np.any(alpha < -_STRUCTURE_ATOL) or alpha.sum() > 1.0 + 1e-9:
            raise ValidationError(f"alpha must be non-negative with sum <= 1, got {alpha}")

        diag = np.diag(T)
        off = T - np.diag(diag)
        rows = T.sum(axis=1)
        if np.any(diag >= 0):
            raise ValidationError(f"T must have a strictly negative diagonal, got {diag}")
        if np.any(off < -_STRUCTURE_ATOL):
            raise ValidationError("T must have non-negative off-diagonal entries")
        if np.any(rows > _STRUCTURE_ATOL):
            raise ValidationError(f"T row sums must be <= 0, got {rows}")
        if not np.any(rows < -_STRUCTURE_ATOL):
            raise ValidationError("T has no exit rate; absorption is unreachable")

        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "T", T)

    @classmethod
    def exponential(cls, rate: float) -> "PhaseType":
        """Single-phase representation of an exponential distribution."""
        return cls(alpha=np.array([1.0]), T=np.array([[-float(rate)]]))

    @property
    def phases(self) -> int:
        return self.T.shape[0]

    @property
    def exit_rates(self) -> np.ndarray:
        return -self.T.sum(axis=1)

    def __repr__(self) -> str:
        return f"PhaseType(alpha={self.alpha.tolist()}, T={self.T.tolist()})"


def _require_square(m: DenseMatrix, name: str = "matrix") -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")


def _check_cap(dimension: int, cap: int) -> None:
    if dimension > cap:
        raise CapacityError(dimension, cap)


def _is_subgenerator(m: DenseMatrix) -> bool:
    diag = np.diag(m)
    off = m - np.diag(diag)
    return bool(
        np.all(diag <= _STRUCTURE_ATOL)
        and np.all(off >= -_STRUCTURE_ATOL)
        and np.all(m.sum(axis=1) <= _STRUCTURE_ATOL)
    )


def kron_product(m1: DenseMatrix, m2: DenseMatrix) -> DenseMatrix:
    """Kronecker product with the block layout ``m1[i, j] * m2``."""
    return np.kron(np.atleast_2d(np.asarray(m1, dtype=float)), np.atleast_2d(np.asarray(m2, dtype=float)))


def kron_sum(m1: DenseMatrix, m2: DenseMatrix) -> DenseMatrix:
    """Kronecker sum ``m1 ⊗ I_m + I_n ⊗ m2`` of two square matrices."""
    m1 = np.atleast_2d(np.asarray(m1, dtype=float))
    m2 = np.atleast_2d(np.asarray(m2, dtype=float))
    _require_square(m1, "m1")
    _require_square(m2, "m2")
    n, m = m1.shape[0], m2.shape[0]
    return np.kron(m1, np.eye(m)) + np.kron(np.eye(n), m2)


def _kron_sum_folds(m: DenseMatrix, n: int) -> Iterator[Tuple[int, DenseMatrix]]:
    # yields (j, m^{⊕j}) for j = 1..n
    acc = m
    yield 1, acc
    for j in range(2, n + 1):
        acc = kron_sum(acc, m)
        yield j, acc


def kron_power_sum(m: DenseMatrix, n: int, cap: int = DEFAULT_DIMENSION_CAP) -> DenseMatrix:
    """n-fold Kronecker sum of ``m`` with itself, by left fold.

    Raises:
        CapacityError: if ``p**n`` exceeds ``cap``.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    _require_square(m, "m")
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    _check_cap(m.shape[0] ** n, cap)
    result = m
    for _, result in _kron_sum_folds(m, n):
        pass
    return result


def kron_power_product(v: np.ndarray, n: int, cap: int = DEFAULT_DIMENSION_CAP) -> np.ndarray:
    """n-fold Kronecker product of a vector with itself."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    _check_cap(v.shape[0] ** n, cap)
    result = v
    for _ in range(n - 1):
        result = np.kron(result, v)
    return result


def _poisson_weights(qt: float, tol: float) -> np.ndarray:
    terms = int(poisson.isf(tol, qt)) + 2
    return poisson.pmf(np.arange(terms), qt)


def matrix_exp(m: DenseMatrix, t: float, tol: float = UNIFORMIZATION_TOL) -> DenseMatrix:
    """``e^{m t}`` by uniformization.

    For a sub-generator the result is sub-stochastic by construction. Other
    matrices fall back to scipy's Padé approximation.

    Raises:
        NumericError: if the input or the result has non-finite entries.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    _require_square(m, "m")
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    if not np.all(np.isfinite(m)) or not math.isfinite(t):
        raise NumericError("matrix_exp received non-finite input")

    p = m.shape[0]
    if not _is_subgenerator(m):
        result = linalg.expm(m * t)
    else:
        q = float(np.max(-np.diag(m)))
        if q == 0.0 or t == 0.0:
            return np.eye(p)
        P = np.eye(p) + m / q
        weights = _poisson_weights(q * t, tol)
        result = np.zeros((p, p))
        power = np.eye(p)
        for w in weights:
            result += w * power
            power = power @ P

    if not np.all(np.isfinite(result)):
        raise NumericError("matrix_exp produced non-finite entries")
    return result


def expm_action(v: np.ndarray, m: DenseMatrix, t: float, tol: float = UNIFORMIZATION_TOL) -> np.ndarray:
    """Row vector times ``e^{m t}`` for a sub-generator ``m``, without forming the exponential."""
    v = np.asarray(v, dtype=float).reshape(-1)
    m = np.atleast_2d(np.asarray(m, dtype=float))
    _require_square(m, "m")
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    if not _is_subgenerator(m):
        return v @ matrix_exp(m, t, tol)

    q = float(np.max(-np.diag(m)))
    if q == 0.0 or t == 0.0:
        return v.copy()
    P = np.eye(m.shape[0]) + m / q
    result = np.zeros_like(v)
    term = v
    for w in _poisson_weights(q * t, tol):
        result += w * term
        term = term @ P

    if not np.all(np.isfinite(result)):
        raise NumericError("expm_action produced non-finite entries")
    return result


def pht_cdf(d: PhaseType, t: float) -> float:
    """``1 - alpha e^{T t} 1``."""
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    survival = float(expm_action(d.alpha, d.T, t).sum())
    return min(1.0, max(0.0, 1.0 - survival))


def _neg_power_solve(T: DenseMatrix, k: int) -> np.ndarray:
    """``T^{-k} 1`` by k LU solves on the ones vector."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", linalg.LinAlgWarning)
        try:
            lu = linalg.lu_factor(T)
            x = np.ones(T.shape[0])
            for _ in range(k):
                x = linalg.lu_solve(lu, x)
        except (linalg.LinAlgError, linalg.LinAlgWarning) as e:
            raise NumericError(f"singular sub-generator in moment solve: {e}") from e
    if not np.all(np.isfinite(x)):
        raise NumericError("moment solve produced non-finite entries")
    return x


def pht_moment(d: PhaseType, k: int = 1) -> float:
    """k-th moment ``(-1)^k k! alpha T^{-k} 1``."""
    if k < 1:
        raise ValidationError(f"moment order must be >= 1, got {k}")
    return float((-1) ** k * math.factorial(k) * (d.alpha @ _neg_power_solve(d.T, k)))


def pht_mean(d: PhaseType) -> float:
    return pht_moment(d, 1)


def _check_rank(n: int, s: int) -> None:
    if n < 1 or not 1 <= s <= n:
        raise ValidationError(f"rank s must satisfy 1 <= s <= n, got s={s}, n={n}")


def order_stat_cdf_matrix(d: PhaseType, n: int, s: int, t: float, cap: int = DEFAULT_DIMENSION_CAP) -> float:
    r"""CDF of the s-th order statistic of n i.i.d. copies of ``d``.

    Uses the alternating expansion over minima, each minimum of m copies
    being phase-type :math:`(\alpha^{\otimes m}, T^{\oplus m})`:

    .. math::
        1 - \sum_{j=0}^{s-1} \binom{n}{j} \sum_{k=0}^{j} \binom{j}{k} (-1)^{j-k}
        \alpha^{\otimes(n-k)} e^{t T^{\oplus(n-k)}} \mathbf{1}
    """
    _check_rank(n, s)
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    _check_cap(d.phases ** n, cap)

    needed = range(n - s + 1, n + 1)
    min_survival: Dict[int, float] = {}
    for m, T_m in _kron_sum_folds(d.T, n):
        if m in needed:
            alpha_m = kron_power_product(d.alpha, m, cap)
            min_survival[m] = float(expm_action(alpha_m, T_m, t).sum())

    survival = math.fsum(
        math.comb(n, j) * math.comb(j, k) * (-1) ** (j - k) * min_survival[n - k]
        for j in range(s)
        for k in range(j + 1)
    )
    return min(1.0, max(0.0, 1.0 - survival))


def order_stat_moment(d: PhaseType, n: int, s: int, k: int = 1, cap: int = DEFAULT_DIMENSION_CAP) -> float:
    r"""k-th moment of the s-th order statistic of n i.i.d. copies of ``d``.

    Recursion over the rank with :math:`m_0^k = 0`:

    .. math::
        m_r^k = m_{r-1}^k + \sum_{i=1}^{r} (-1)^{i-1} \binom{n-r+i}{i-1} L_{n-r+i}^{(k)}

    where :math:`L_j^{(k)} = \binom{n}{j} (-1)^k k!\, \alpha^{\otimes j} (T^{\oplus j})^{-k} \mathbf{1}`.
    """
    _check_rank(n, s)
    if k < 1:
        raise ValidationError(f"moment order must be >= 1, got {k}")
    _check_cap(d.phases ** n, cap)

    sign = (-1) ** k * math.factorial(k)
    L: Dict[int, float] = {}
    for j, T_j in _kron_sum_folds(d.T, n):
        if j >= n - s + 1:
            alpha_j = kron_power_product(d.alpha, j, cap)
            L[j] = math.comb(n, j) * sign * float(alpha_j @ _neg_power_solve(T_j, k))

    moment = 0.0
    for r in range(1, s + 1):
        moment += math.fsum(
            (-1) ** (i - 1) * math.comb(n - r + i, i - 1) * L[n - r + i] for i in range(1, r + 1)
        )
    return moment
