"""Discrete-event Monte Carlo simulation of the sensor network.

Every sensor owns two exponential clocks: harvesting (armed while the battery
is below B) and broadcasting (armed while the battery is non-empty). A full
battery discards harvests, which by memorylessness is the same as keeping the
harvest clock dormant until the next broadcast frees a unit. Clocks live on a
binary heap; rescheduling bumps a per-clock version so stale entries are
skipped when popped. Equal event times are resolved by insertion order.

Replications are grouped into trajectories of ``replications_per_trajectory``
clients. Each trajectory draws from its own Philox substream keyed by
``(seed, trajectory index)``, so results do not depend on how trajectories are
spread across workers. In ``pasta_inject`` mode a trajectory injects one
client every ``rewarm_time`` after the warmup; in ``poisson_arrivals`` mode
clients arrive at rate lambda_a. Either way clients may overlap, each keeping
its own set of sensors heard.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from scipy import stats

from ewsn_retrieval.errors import EwsnError, ValidationError
from ewsn_retrieval.model import ModelParams, SteadyState, steady_state, total_variation
from ewsn_retrieval.retrieval import RetrievalQuery, ws_cdf_values
from ewsn_retrieval.utils.decorators import timing
from ewsn_retrieval.utils.file_utils import frame_to_csv, write_json, write_text
from ewsn_retrieval.utils.log import logger
from ewsn_retrieval.utils.thread import ThreadPool

DEFAULT_SEED = 20240601
DEFAULT_REWARM = 10.0
WARMUP_FACTOR = 100.0
OCCUPANCY_FACTOR = 40000.0
DEFAULT_ARRIVAL_RATE = 1.0

_HARVEST = 0
_BROADCAST = 1
_ARRIVAL = 2

_TRAJECTORY_KEY = 0
_OCCUPANCY_KEY = 1


class ArrivalMode(str, Enum):
    PASTA_INJECT = "pasta_inject"
    POISSON_ARRIVALS = "poisson_arrivals"


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings; ``warmup_time`` of None means 100 * max(N/mu, 1/lambda_e)."""

    params: ModelParams
    samples_needed: int
    replications: int = 10_000
    warmup_time: Optional[float] = None
    seed: int = DEFAULT_SEED
    arrival_mode: ArrivalMode = ArrivalMode.PASTA_INJECT
    rewarm_time: float = DEFAULT_REWARM
    replications_per_trajectory: int = 1000
    occupancy_horizon: Optional[float] = None
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "arrival_mode", ArrivalMode(self.arrival_mode))
        if self.replications < 1:
            raise ValidationError(f"replications must be >= 1, got {self.replications}")
        if self.replications_per_trajectory < 1:
            raise ValidationError(
                f"replications_per_trajectory must be >= 1, got {self.replications_per_trajectory}"
            )
        if self.warmup_time is not None and self.warmup_time < 0:
            raise ValidationError(f"warmup_time must be >= 0, got {self.warmup_time}")
        if self.rewarm_time < 0:
            raise ValidationError(f"rewarm_time must be >= 0, got {self.rewarm_time}")
        if self.occupancy_horizon is not None and self.occupancy_horizon <= 0:
            raise ValidationError(f"occupancy_horizon must be > 0, got {self.occupancy_horizon}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        # validates 1 <= s <= N
        RetrievalQuery(self.params, self.samples_needed)

    @property
    def time_scale(self) -> float:
        return max(1.0 / self.params.sensor_broadcast_rate, 1.0 / self.params.harvest_rate)

    @property
    def resolved_warmup(self) -> float:
        return WARMUP_FACTOR * self.time_scale if self.warmup_time is None else float(self.warmup_time)

    @property
    def resolved_occupancy_horizon(self) -> float:
        if self.occupancy_horizon is None:
            return OCCUPANCY_FACTOR * self.time_scale
        return float(self.occupancy_horizon)

    @property
    def arrival_rate(self) -> float:
        rate = self.params.client_arrival_rate
        return DEFAULT_ARRIVAL_RATE if rate is None else rate

    def as_dict(self) -> dict:
        return {
            **self.params.as_dict(),
            "samples_needed": self.samples_needed,
            "replications": self.replications,
            "warmup_time": self.resolved_warmup,
            "seed": self.seed,
            "arrival_mode": self.arrival_mode.value,
            "rewarm_time": self.rewarm_time,
            "replications_per_trajectory": self.replications_per_trajectory,
        }


@dataclass
class NetworkState:
    """Battery levels of all sensors at simulation time ``clock``."""

    batteries: List[int]
    clock: float = 0.0


@dataclass(frozen=True)
class OccupancyEstimate:
    """Time-averaged battery law of one sensor and its distance from :func:`steady_state`."""

    empirical: SteadyState
    total_variation: float
    horizon: float


@dataclass
class SimResult:
    """Replicated retrieval times with a normal-approximation 95% interval."""

    ws_samples: np.ndarray
    mean: float
    ci_halfwidth_95: float
    seed_used: int
    replications: int
    config: SimConfig
    _sorted: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @classmethod
    def from_samples(cls, samples: np.ndarray, config: SimConfig) -> "SimResult":
        """Summarize replicates in trajectory order.

        Clients of one trajectory share a network history, so with two or
        more trajectories the standard error comes from the spread of the
        independent trajectory means (batch means). A single trajectory falls
        back to the i.i.d. formula.
        """
        samples = np.asarray(samples, dtype=float)
        n = samples.shape[0]
        mean = float(np.mean(samples))
        per = config.replications_per_trajectory
        batches = math.ceil(n / per)
        if batches >= 2:
            sizes = np.array([min(per, n - b * per) for b in range(batches)], dtype=float)
            sums = np.add.reduceat(samples, np.arange(0, n, per))
            spread = float(np.sum((sums - sizes * mean) ** 2))
            se = math.sqrt(batches / (batches - 1) * spread) / n
        elif n > 1:
            se = float(np.std(samples, ddof=1)) / math.sqrt(n)
        else:
            se = 0.0
        return cls(
            ws_samples=samples,
            mean=mean,
            ci_halfwidth_95=float(stats.norm.ppf(0.975)) * se,
            seed_used=config.seed,
            replications=n,
            config=config,
        )

    @property
    def ci_low(self) -> float:
        return self.mean - self.ci_halfwidth_95

    @property
    def ci_high(self) -> float:
        return self.mean + self.ci_halfwidth_95

    def empirical_cdf(self, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """Fraction of replicates with ``W_s <= t``."""
        if self._sorted is None:
            self._sorted = np.sort(self.ws_samples)
        counts = np.searchsorted(self._sorted, t, side="right")
        return counts / self._sorted.shape[0]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"replicate_index": np.arange(self.replications), "ws_time": self.ws_samples}
        )

    def to_csv(self) -> str:
        return frame_to_csv(self.to_frame(), "%.17g")

    def to_summary(self) -> dict:
        return {
            "mean": self.mean,
            "ci_halfwidth_95": self.ci_halfwidth_95,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "seed": self.seed_used,
            "replications": self.replications,
            "config": self.config.as_dict(),
        }

    def write_replicates(self, path: Union[str, Path]) -> Path:
        return write_text(path, self.to_csv())

    def write_summary(self, path: Union[str, Path]) -> Path:
        return write_json(path, self.to_summary())


class _ExpStream:
    """Buffered unit-rate exponential draws from one generator."""

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self._rng = rng
        self._block = block
        self._buf = rng.standard_exponential(block)
        self._pos = 0

    def __call__(self) -> float:
        if self._pos == self._block:
            self._buf = self._rng.standard_exponential(self._block)
            self._pos = 0
        value = self._buf[self._pos]
        self._pos += 1
        return float(value)


def _substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


class _Network:
    """Event engine for one trajectory of the N-sensor chain."""

    def __init__(self, params: ModelParams, draw: _ExpStream, tagged: Optional[int] = None):
        self.params = params
        self.state = NetworkState(batteries=[0] * params.n_sensors)
        self._draw = draw
        self._heap: list = []
        self._seq = 0
        self._versions = [[0, 0] for _ in range(params.n_sensors)]
        self._tagged = tagged
        self.occupancy = np.zeros(params.battery_cap + 1)
        self.on_broadcast: Optional[Callable[[int, float], None]] = None
        self.on_arrival: Optional[Callable[[float], None]] = None
        for sensor in range(params.n_sensors):
            self._arm(sensor, _HARVEST)

    def _push(self, time: float, sensor: int, kind: int, version: int) -> None:
        heapq.heappush(self._heap, (time, self._seq, sensor, kind, version))
        self._seq += 1

    def _arm(self, sensor: int, kind: int) -> None:
        rate = self.params.harvest_rate if kind == _HARVEST else self.params.sensor_broadcast_rate
        self._versions[sensor][kind] += 1
        self._push(self.state.clock + self._draw() / rate, sensor, kind, self._versions[sensor][kind])

    def _disarm(self, sensor: int, kind: int) -> None:
        self._versions[sensor][kind] += 1

    def track(self, sensor: int) -> None:
        """Start accumulating time spent at each battery level by ``sensor``."""
        self._tagged = sensor

    def schedule_arrival(self, rate: float) -> None:
        self._push(self.state.clock + self._draw() / rate, -1, _ARRIVAL, 0)

    def _accumulate(self, until: float) -> None:
        if self._tagged is not None:
            self.occupancy[self.state.batteries[self._tagged]] += until - self.state.clock

    def step(self, horizon: float = math.inf) -> bool:
        """Apply the next valid event if it occurs by ``horizon``; False when none does."""
        heap = self._heap
        while heap:
            time, _, sensor, kind, version = heap[0]
            if kind != _ARRIVAL and version != self._versions[sensor][kind]:
                heapq.heappop(heap)
                continue
            if time > horizon:
                return False
            heapq.heappop(heap)
            self._accumulate(time)
            self.state.clock = time
            if kind == _ARRIVAL:
                if self.on_arrival is not None:
                    self.on_arrival(time)
            else:
                self._apply(sensor, kind, time)
            return True
        return False

    def _apply(self, sensor: int, kind: int, time: float) -> None:
        cap = self.params.battery_cap
        batteries = self.state.batteries
        level = batteries[sensor]
        if kind == _HARVEST:
            level += 1
            if level < cap:
                self._arm(sensor, _HARVEST)
            if level == 1:
                self._arm(sensor, _BROADCAST)
        else:
            level -= 1
            if level > 0:
                self._arm(sensor, _BROADCAST)
            if level == cap - 1:
                self._arm(sensor, _HARVEST)
            if self.on_broadcast is not None:
                self.on_broadcast(sensor, time)
        if not 0 <= level <= cap:
            raise EwsnError(f"battery of sensor {sensor} left [0, {cap}]: {level}")
        batteries[sensor] = level

    def advance(self, duration: float) -> None:
        """Run all events within the next ``duration`` time units."""
        horizon = self.state.clock + duration
        while self.step(horizon):
            pass
        self._accumulate(horizon)
        self.state.clock = horizon


class _ClientBook:
    """Clients currently collecting measurements, each with the set of sensors heard."""

    def __init__(self, samples_needed: int, capacity: int):
        self.samples_needed = samples_needed
        self.results = np.full(capacity, np.nan)
        self._active: Dict[int, tuple] = {}
        self._next_index = 0

    @property
    def arrived(self) -> int:
        return self._next_index

    @property
    def pending(self) -> int:
        return len(self._active)

    def inject(self, time: float) -> None:
        self._active[self._next_index] = (time, set())
        self._next_index += 1

    def hear(self, sensor: int, time: float) -> None:
        done = []
        for index, (arrival, heard) in self._active.items():
            if sensor not in heard:
                heard.add(sensor)
                if len(heard) == self.samples_needed:
                    self.results[index] = time - arrival
                    done.append(index)
        for index in done:
            del self._active[index]


def _run_trajectory(config: SimConfig, trajectory: int, count: int) -> np.ndarray:
    draw = _ExpStream(_substream(config.seed, _TRAJECTORY_KEY, trajectory))
    network = _Network(config.params, draw)
    book = _ClientBook(config.samples_needed, count)
    network.on_broadcast = book.hear
    network.advance(config.resolved_warmup)

    if config.arrival_mode is ArrivalMode.PASTA_INJECT:
        # clients never act on the network, so a fixed injection grid sees it in steady state
        for index in range(count):
            if index:
                network.advance(config.rewarm_time)
            book.inject(network.state.clock)
    else:
        rate = config.arrival_rate

        def arrive(time: float) -> None:
            book.inject(time)
            if book.arrived < count:
                network.schedule_arrival(rate)

        network.on_arrival = arrive
        network.schedule_arrival(rate)
        while book.arrived < count:
            network.step()

    while book.pending:
        network.step()
    return book.results


@timing
def simulate(c: SimConfig) -> SimResult:
    """Replicate the retrieval time W_s of clients arriving to the stationary network."""
    per = c.replications_per_trajectory
    trajectories = math.ceil(c.replications / per)
    items = [
        {"config": c, "trajectory": b, "count": min(per, c.replications - b * per)}
        for b in range(trajectories)
    ]
    chunks = ThreadPool(c.workers).execute(func=_run_trajectory, items=items)
    result = SimResult.from_samples(np.concatenate(chunks), c)

    logger.info(
        f"simulated {result.replications} replications: mean {result.mean:.6g} +/- {result.ci_halfwidth_95:.3g}",
        kind="simulation",
        data={
            "replications": result.replications,
            "seed": result.seed_used,
            "mean": result.mean,
            "ci_halfwidth_95": result.ci_halfwidth_95,
        },
    )
    return result


def _same_model(a: ModelParams, b: ModelParams) -> bool:
    return replace(a, client_arrival_rate=None) == replace(b, client_arrival_rate=None)


def empirical_cdf_distance(r: SimResult, q: RetrievalQuery) -> float:
    """Kolmogorov-Smirnov statistic between the replicates and the analytic CDF of W_s.

    Only the network parameters must match; ``q`` may ask for a different s.
    """
    if not _same_model(r.config.params, q.params):
        raise ValidationError(
            f"simulation parameters {r.config.params.as_dict()} do not match query {q.params.as_dict()}"
        )
    return float(stats.kstest(r.ws_samples, lambda ts: ws_cdf_values(q, ts)).statistic)


@timing
def steady_state_empirical(c: SimConfig, tagged: int = 0) -> OccupancyEstimate:
    """Time-averaged battery occupancy of one sensor over the occupancy horizon after warmup."""
    if not 0 <= tagged < c.params.n_sensors:
        raise ValidationError(f"tagged sensor must be in [0, {c.params.n_sensors}), got {tagged}")
    draw = _ExpStream(_substream(c.seed, _OCCUPANCY_KEY))
    network = _Network(c.params, draw)
    network.advance(c.resolved_warmup)
    network.track(tagged)
    horizon = c.resolved_occupancy_horizon
    network.advance(horizon)

    empirical = SteadyState(probs=network.occupancy / network.occupancy.sum())
    tv = total_variation(empirical, steady_state(c.params))
    logger.info(f"occupancy over {horizon:g} time units: total variation {tv:.4g} from the stationary law")
    return OccupancyEstimate(empirical=empirical, total_variation=tv, horizon=horizon)
