"""Cross-check suite behind the ``validate`` command.

Each check compares two independent routes to the same quantity: the
closed form against quadrature and the Kronecker matrix path, the scalar
survival form against the phase-type representation, the large-parameter
limits, and (unless ``quick``) the simulator against the analytic law.
"""
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ewsn_retrieval import phtype
from ewsn_retrieval.errors import EwsnError
from ewsn_retrieval.model import ModelParams, w_phase_type, w_survival
from ewsn_retrieval.retrieval import (
    RetrievalQuery,
    asymptotic_battery,
    asymptotic_harvest,
    asymptotic_network,
    expected_time_closed_form,
    expected_time_matrix,
    expected_time_quadrature,
    identity_check,
    ws_cdf,
)
from ewsn_retrieval.sim import DEFAULT_SEED, SimConfig, empirical_cdf_distance, simulate, steady_state_empirical
from ewsn_retrieval.utils.log import logger

ORACLE_RTOL = 1e-7
KS_CRITICAL_1PCT = 1.63
TV_LIMIT = 0.01
MU = 0.4
# spacing between injected clients in the simulation checks
VALIDATION_REWARM = 30.0
SIMULATION_POINTS = (ModelParams(10, 4, 0.2, MU), ModelParams(10, 2, 0.03, MU))
OCCUPANCY_POINT = ModelParams(1, 1, 0.2, MU)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def __post_init__(self) -> None:
        # numpy comparisons yield np.bool_
        object.__setattr__(self, "passed", bool(self.passed))

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def check_identity(max_n: int = 30) -> Check:
    bad = [(n, k) for n in range(1, max_n + 1) for k in range(n) if identity_check(n, k) != 1]
    detail = f"all 0 <= k < n <= {max_n} equal 1" if not bad else f"fails at (n, k) = {bad[:5]}"
    return Check("identity", not bad, detail)


def oracle_grid() -> List[RetrievalQuery]:
    grid = []
    for n in (2, 4, 6):
        for s in sorted({1, 2, n}):
            for b in (1, 3):
                for lam in (0.03, 0.2):
                    grid.append(RetrievalQuery(ModelParams(n, b, lam, MU), s))
    return grid


def check_oracle_triangle() -> Check:
    worst, where = 0.0, None
    for q in oracle_grid():
        closed = expected_time_closed_form(q)
        quad = expected_time_quadrature(q)
        matrix = expected_time_matrix(q)
        gap = max(_rel(closed, quad), _rel(closed, matrix), _rel(quad, matrix))
        if gap > worst:
            worst, where = gap, q
    passed = worst <= ORACLE_RTOL
    detail = f"max pairwise relative gap {worst:.3g}"
    if not passed:
        p = where.params
        detail += f" at N={p.n_sensors}, B={p.battery_cap}, lambda_e={p.harvest_rate}, s={where.samples_needed}"
    return Check("closed form vs quadrature vs matrix", passed, detail)


def check_survival_phase_type() -> Check:
    worst = 0.0
    for n, b, lam in ((1, 1, 0.2), (10, 4, 0.2), (10, 2, 0.03), (5, 3, 0.08)):
        p = ModelParams(n, b, lam, MU)
        d = w_phase_type(p)
        for t in (0.5, 2.0, 10.0, 60.0):
            worst = max(worst, abs(w_survival(p, t) - (1.0 - phtype.pht_cdf(d, t))))
    return Check("survival form vs phase-type CDF", worst <= 1e-9, f"max abs gap {worst:.3g}")


def check_order_statistic_cdf() -> Check:
    worst = 0.0
    for n, s in ((3, 1), (4, 2), (4, 4)):
        q = RetrievalQuery(ModelParams(n, 2, 0.2, MU), s)
        d = w_phase_type(q.params)
        for t in (1.0, 5.0, 20.0):
            worst = max(worst, abs(ws_cdf(q, t) - phtype.order_stat_cdf_matrix(d, n, s, t)))
    return Check("binomial CDF vs Kronecker CDF", worst <= 1e-8, f"max abs gap {worst:.3g}")


def _converges(values: Sequence[float], limit: float, rtol: float, monotone: bool) -> Tuple[bool, str]:
    errors = [abs(v - limit) for v in values]
    final = errors[-1] / abs(limit)
    ok = final < rtol
    if monotone:
        ok = ok and all(b <= a * (1 + 1e-9) + 1e-12 for a, b in zip(errors[:-1], errors[1:]))
    return ok, f"final relative error {final:.3g} toward {limit:.6g}"


def check_harvest_limit() -> Check:
    values = [
        expected_time_closed_form(RetrievalQuery(ModelParams(10, 4, lam, MU), 2)) for lam in (1.0, 10.0, 100.0)
    ]
    ok, detail = _converges(values, asymptotic_harvest(10, 2, MU), 0.01, monotone=True)
    return Check("limit as lambda_e grows", ok, detail)


def check_battery_limit() -> Check:
    details, ok = [], True
    for lam in (0.03, 0.2):
        values = [
            expected_time_closed_form(RetrievalQuery(ModelParams(10, b, lam, MU), 2)) for b in range(1, 65)
        ]
        decreasing = all(b <= a * (1 + 1e-12) for a, b in zip(values[:-1], values[1:]))
        converged, detail = _converges(values, asymptotic_battery(10, 2, lam, MU), 0.01, monotone=False)
        ok = ok and decreasing and converged
        details.append(f"lambda_e={lam:g}: {detail}" + ("" if decreasing else ", not decreasing in B"))
    return Check("limit as B grows", ok, "; ".join(details))


def check_network_limit() -> Check:
    values = [expected_time_quadrature(RetrievalQuery(ModelParams(n, 4, 0.2, MU), 2)) for n in (20, 50, 100, 200)]
    ok, detail = _converges(values, asymptotic_network(2, MU), 0.02, monotone=True)
    return Check("limit as N grows", ok, detail)


def check_equal_rate_continuity() -> Check:
    pivot = MU / 10
    values = [
        expected_time_quadrature(RetrievalQuery(ModelParams(10, 4, lam, MU), 2))
        for lam in (pivot, pivot * (1 - 1e-6), pivot * (1 + 1e-6))
    ]
    gap = max(_rel(values[0], v) for v in values[1:])
    return Check("equal-rate continuity", gap < 1e-4, f"max relative gap {gap:.3g}")


def simulation_configs(
    seed: int = DEFAULT_SEED,
    replications: int = 100_000,
    workers: int = 1,
    warmup_time: Optional[float] = None,
) -> List[SimConfig]:
    """Settings of the simulation checks; the last entry drives the occupancy check."""
    configs = [
        SimConfig(
            params,
            2,
            replications=replications,
            seed=seed,
            warmup_time=warmup_time,
            rewarm_time=VALIDATION_REWARM,
            workers=workers,
        )
        for params in SIMULATION_POINTS
    ]
    configs.append(SimConfig(OCCUPANCY_POINT, 1, replications=1, seed=seed, warmup_time=warmup_time))
    return configs


def _simulation_name(c: SimConfig) -> str:
    p = c.params
    return f"simulation N={p.n_sensors} B={p.battery_cap} lambda_e={p.harvest_rate:g}"


def check_simulation(c: SimConfig) -> Check:
    q = RetrievalQuery(c.params, c.samples_needed)
    result = simulate(c)
    exact = expected_time_closed_form(q)
    ks = empirical_cdf_distance(result, q)
    critical = KS_CRITICAL_1PCT / math.sqrt(result.replications)
    inside = result.ci_low <= exact <= result.ci_high
    detail = (
        f"mean {result.mean:.6g} +/- {result.ci_halfwidth_95:.3g} vs {exact:.6g}; "
        f"KS {ks:.4g} (critical {critical:.4g})"
    )
    return Check(_simulation_name(c), inside and ks < critical, detail)


def check_occupancy(c: SimConfig) -> Check:
    estimate = steady_state_empirical(c)
    tv = estimate.total_variation
    detail = f"empirical {np.round(estimate.empirical.probs, 4).tolist()}, total variation {tv:.3g}"
    return Check("battery occupancy", tv < TV_LIMIT, detail)


def _guarded(name: str, check: Callable[[], Check]) -> Check:
    try:
        return check()
    except EwsnError as e:
        return Check(name, False, f"{type(e).__name__}: {e}")


def run_suite(
    quick: bool = False,
    seed: int = DEFAULT_SEED,
    replications: int = 100_000,
    workers: int = 1,
    warmup_time: Optional[float] = None,
) -> List[Check]:
    """Run every check; ``quick`` skips the simulation-based ones."""
    plan: List[Tuple[str, Callable[[], Check]]] = [
        ("identity", check_identity),
        ("closed form vs quadrature vs matrix", check_oracle_triangle),
        ("survival form vs phase-type CDF", check_survival_phase_type),
        ("binomial CDF vs Kronecker CDF", check_order_statistic_cdf),
        ("limit as lambda_e grows", check_harvest_limit),
        ("limit as B grows", check_battery_limit),
        ("limit as N grows", check_network_limit),
        ("equal-rate continuity", check_equal_rate_continuity),
    ]
    if not quick:
        *runs, occupancy = simulation_configs(seed, replications, workers, warmup_time)
        for c in runs:
            plan.append((_simulation_name(c), lambda c=c: check_simulation(c)))
        plan.append(("battery occupancy", lambda: check_occupancy(occupancy)))

    checks = []
    for name, check in plan:
        result = _guarded(name, check)
        logger.info(
            result.line(),
            kind="validate_check",
            data={"check": result.name, "passed": result.passed, "detail": result.detail},
        )
        checks.append(result)
    return checks


def format_report(checks: Sequence[Check]) -> str:
    failed = [c.name for c in checks if not c.passed]
    lines = [c.line() for c in checks]
    lines.append(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    if failed:
        lines.append("failed: " + ", ".join(failed))
    return "\n".join(lines)
