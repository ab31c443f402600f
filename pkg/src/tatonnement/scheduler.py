"""Deterministic discrete-event simulation of asynchronous tatonnement.

Each good owns a seller who re-prices at its own times. Between events prices
are piecewise constant, so the excess demand a seller could have observed over
its waiting interval is known exactly. Simultaneous events are ordered by good
index; every event at time ``t`` observes the market as it stood strictly
before ``t``, while accounting quantities (``z_accurate``, ``z_min``,
``z_max``) also include the zero-length states created by earlier events at the
same instant.

Random streams: ``SeedSequence(seed).spawn(n + 1)``; stream ``j`` drives the
timing of good ``j`` and stream ``n`` drives the staleness sampler.
"""

from __future__ import annotations

import heapq
import logging
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .dynamics import async_step, max_safe_lambda
from .market import MarketInstance, check_prices

logger = logging.getLogger(__name__)

__all__ = [
    "RoundRobin",
    "PoissonClipped",
    "JitteredFixed",
    "Scripted",
    "STALENESS_MODELS",
    "ScenarioConfig",
    "UpdateEvent",
    "SimulationTrace",
    "SimulationError",
    "ConfigError",
    "PricePath",
    "IntervalStats",
    "interval_z_stats",
    "observe_z_tilde",
    "run_simulation",
]

GAP_TOL = 1e-12

STALENESS_MODELS = (
    "endpoint",
    "start",
    "time_weighted_average",
    "random_point",
    "adversarial_max_gap",
)


class ConfigError(ValueError):
    pass


class SimulationError(RuntimeError):
    def __init__(self, message: str, event_index: int):
        self.event_index = event_index
        super().__init__(f"event {event_index}: {message}")


@dataclass(frozen=True)
class RoundRobin:
    """Good j updates at offset_j + k * period (first update at ``period`` if offset is 0)."""

    offsets: Optional[tuple[float, ...]] = None
    period: float = 1.0
    name = "round_robin"
    stochastic = False

    def validate(self, n):
        if not (0 < self.period <= 1 + GAP_TOL):
            raise ConfigError("round_robin period must lie in (0, 1]")
        if self.offsets is not None:
            if len(self.offsets) != n:
                raise ConfigError(f"round_robin needs {n} offsets")
            if any(not (0 <= o <= self.period) for o in self.offsets):
                raise ConfigError("round_robin offsets must lie in [0, period]")

    def schedule(self, n, rngs, caps):
        offsets = self.offsets or (0.0,) * n
        counts = [0] * n

        def nxt(j, _t):
            base = offsets[j] if offsets[j] > 0 else self.period
            t = base + counts[j] * self.period
            counts[j] += 1
            return t

        return nxt


@dataclass(frozen=True)
class PoissonClipped:
    """Exponential waiting times (rate per good), each gap capped at one time unit."""

    rates: tuple[float, ...]
    name = "poisson_clipped"
    stochastic = True

    def validate(self, n):
        if len(self.rates) not in (1, n):
            raise ConfigError(f"poisson_clipped needs 1 or {n} rates")
        if any(not (r > 0) for r in self.rates):
            raise ConfigError("poisson_clipped rates must be positive")

    def schedule(self, n, rngs, caps):
        rates = self.rates * n if len(self.rates) == 1 else self.rates

        def nxt(j, t):
            gap = rngs[j].exponential(1.0 / rates[j])
            if gap > 1.0:
                gap = 1.0
                caps[j] += 1
            return t + gap

        return nxt


@dataclass(frozen=True)
class JitteredFixed:
    """Gaps of ``period`` plus uniform noise in [-jitter, jitter]."""

    period: float
    jitter: float
    name = "jittered_fixed"
    stochastic = True

    def validate(self, n):
        if self.jitter < 0:
            raise ConfigError("jitter must be non-negative")
        if not (self.period - self.jitter > 0):
            raise ConfigError("period - jitter must be positive")
        if self.period + self.jitter > 1 + GAP_TOL:
            raise ConfigError("period + jitter must not exceed 1 time unit")

    def schedule(self, n, rngs, caps):
        def nxt(j, t):
            return t + self.period + rngs[j].uniform(-self.jitter, self.jitter)

        return nxt


@dataclass(frozen=True)
class Scripted:
    """Explicit (time, good) list; the run ends after the last scripted event."""

    events: tuple[tuple[float, int], ...]
    name = "scripted"
    stochastic = False

    def validate(self, n):
        if not self.events:
            raise ConfigError("scripted timing needs at least one event")
        seen = set()
        end = max(t for t, _ in self.events)
        last = [0.0] * n
        for t, j in sorted(self.events, key=lambda e: (e[0], e[1])):
            if not (0 <= j < n):
                raise ConfigError(f"scripted good index {j} out of range")
            if (t, j) in seen:
                raise ConfigError(f"duplicate scripted update ({t}, {j})")
            seen.add((t, j))
            if not (t - last[j] > 0):
                raise ConfigError(f"scripted update ({t}, {j}) has non-positive gap")
            if t - last[j] > 1 + GAP_TOL:
                raise ConfigError(f"good {j} waits more than 1 time unit before t={t}")
            last[j] = t
        for j in range(n):
            if end - last[j] > 1 + GAP_TOL:
                raise ConfigError(f"good {j} is not updated during the last time unit")

    def schedule(self, n, rngs, caps):
        per_good = [sorted(t for t, g in self.events if g == j) for j in range(n)]
        pos = [0] * n

        def nxt(j, _t):
            if pos[j] >= len(per_good[j]):
                return math.inf
            t = per_good[j][pos[j]]
            pos[j] += 1
            return t

        return nxt


TimingModel = Union[RoundRobin, PoissonClipped, JitteredFixed, Scripted]


@dataclass(frozen=True)
class ScenarioConfig:
    timing: TimingModel
    staleness: str
    lam: float
    horizon: float
    initial_prices: tuple[float, ...]
    seed: Optional[int] = None
    lambda_mode: str = "strict"
    tolerance: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "initial_prices", tuple(float(v) for v in self.initial_prices))
        if self.staleness not in STALENESS_MODELS:
            raise ConfigError(f"unknown staleness model {self.staleness!r}")
        if self.lambda_mode not in ("strict", "exploratory"):
            raise ConfigError("lambda_mode must be 'strict' or 'exploratory'")
        if not (0 < self.lam < 1):
            raise ConfigError("lambda must lie in (0, 1)")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if self.seed is not None and not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def stochastic(self) -> bool:
        return self.timing.stochastic or self.staleness == "random_point"

    def validate(self, market: MarketInstance):
        try:
            check_prices(self.initial_prices, market.n)
        except ValueError as exc:
            raise ConfigError(f"initial_prices: {exc}") from None
        self.timing.validate(market.n)
        if self.stochastic and self.seed is None:
            raise ConfigError("a seed is required for stochastic timing or staleness models")
        if self.lambda_mode == "strict":
            bound = max_safe_lambda(market.market_class, market.E)
            if self.lam > bound * (1 + 1e-12):
                raise ConfigError(
                    f"lambda={self.lam} exceeds the strict bound {bound:.6g} "
                    f"for a {market.market_class} market"
                )


@dataclass(frozen=True, slots=True)
class UpdateEvent:
    t: float
    good: int
    alpha_j: float
    dt: float
    z_tilde: float
    z_accurate: float
    z_min: float
    z_max: float
    gamma: float
    p_before: float
    p_after: float


@dataclass
class SimulationTrace:
    market: MarketInstance
    config: Optional[ScenarioConfig]
    initial_prices: np.ndarray
    events: list[UpdateEvent]
    phi: list[float]  # potential after each event
    initial_phi: float
    final_prices: np.ndarray
    stop_reason: str = "horizon"
    gap_caps: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.events)

    @property
    def lam(self) -> float:
        if self.config is not None:
            return self.config.lam
        ev = self.events[0]
        return max(1.0, ev.z_tilde) / (ev.gamma * ev.p_before)

    def times(self) -> np.ndarray:
        return np.array([e.t for e in self.events])

    def price_states(self) -> np.ndarray:
        """Row s holds the prices after the first s events."""
        P = np.empty((len(self.events) + 1, self.market.n))
        P[0] = self.initial_prices
        for s, e in enumerate(self.events):
            P[s + 1] = P[s]
            P[s + 1, e.good] = e.p_after
        return P

    def phi_states(self) -> np.ndarray:
        return np.array([self.initial_phi, *self.phi])


class PricePath:
    """Piecewise-constant price history: state s holds from ``times[s]`` on."""

    def __init__(self, market: MarketInstance, initial_prices, t0: float = 0.0):
        self.market = market
        p0 = check_prices(initial_prices, market.n).copy()
        self.times = [t0]
        self.prices = [p0]
        self.z = [market.excess(p0)]
        self.known_until = t0

    def append(self, t: float, prices) -> None:
        if t < self.times[-1]:
            raise ValueError("events must be appended in time order")
        p = np.asarray(prices, dtype=float).copy()
        self.times.append(t)
        self.prices.append(p)
        self.z.append(self.market.excess(p))
        self.known_until = max(self.known_until, t)

    @classmethod
    def from_trace(cls, trace: SimulationTrace) -> "PricePath":
        path = cls(trace.market, trace.initial_prices)
        for s, p in enumerate(trace.price_states()[1:]):
            path.append(trace.events[s].t, p)
        end = trace.config.horizon if trace.config is not None else path.times[-1]
        path.known_until = max(path.known_until, end)
        return path




@dataclass(frozen=True)
class IntervalStats:
    """Excess demand of one good over a waiting interval (t_from, t_to).

    ``values``/``durations`` list the positive-length constant segments in time
    order. ``z_min``/``z_max`` may additionally cover zero-length states created
    by simultaneous events, and ``z_accurate`` is the value in the state right
    before the update.
    """

    t_from: float
    t_to: float
    z_min: float
    z_max: float
    z_avg: float
    z_accurate: float
    values: tuple[float, ...]
    durations: tuple[float, ...]

    @property
    def z_start(self) -> float:
        return self.values[0]

    @property
    def z_end(self) -> float:
        return self.values[-1]


def _build_stats(t_from, t_to, seg_times, seg_z, z_accurate, extra=()):
    # seg_times[s] is the start of state s; states end where the next begins
    values, durations = [], []
    ends = list(seg_times[1:]) + [t_to]
    for a, b, z in zip(seg_times, ends, seg_z):
        a, b = max(a, t_from), min(b, t_to)
        if b > a:
            values.append(float(z))
            durations.append(b - a)
    everything = [*values, *(float(v) for v in extra), float(z_accurate)]
    avg = math.fsum(d * v for d, v in zip(durations, values)) / math.fsum(durations)
    return IntervalStats(
        t_from=t_from,
        t_to=t_to,
        z_min=min(everything),
        z_max=max(everything),
        z_avg=avg,
        z_accurate=float(z_accurate),
        values=tuple(values),
        durations=tuple(durations),
    )


def interval_z_stats(path: PricePath, market: MarketInstance, good: int, t_from: float, t_to: float) -> IntervalStats:
    """Exact min, max and time average of z_good over the open interval (t_from, t_to).

    Prices are constant between events, so z only needs evaluating once per
    segment.
    """
    if not t_from < t_to:
        raise ValueError("need t_from < t_to")
    if t_from < path.times[0] or t_to > path.known_until + GAP_TOL:
        raise ValueError(
            f"interval ({t_from}, {t_to}) is outside the known range "
            f"[{path.times[0]}, {path.known_until}]"
        )
    T = path.times
    lo = bisect_right(T, t_from) - 1
    hi = bisect_left(T, t_to) - 1
    if market is path.market:
        zs = [path.z[s][good] for s in range(lo, hi + 1)]
    else:
        zs = [market.excess(path.prices[s])[good] for s in range(lo, hi + 1)]
    return _build_stats(t_from, t_to, T[lo : hi + 1], zs, zs[-1])


def observe_z_tilde(stats: IntervalStats, staleness_model: str, rng: Optional[np.random.Generator] = None) -> float:
    """Pick the excess demand a seller acts on; the result lies in [z_min, z_max]."""
    if staleness_model == "endpoint":
        return stats.z_end
    if staleness_model == "start":
        return stats.z_start
    if staleness_model == "time_weighted_average":
        # clamp absorbs last-ulp rounding of the weighted sum
        return min(max(stats.z_avg, stats.z_min), stats.z_max)
    if staleness_model == "adversarial_max_gap":
        lo, hi = stats.z_min, stats.z_max
        return lo if abs(stats.z_accurate - lo) >= abs(stats.z_accurate - hi) else hi
    if staleness_model == "random_point":
        if rng is None:
            raise ValueError("random_point staleness needs an rng")
        u = rng.uniform(stats.t_from, stats.t_to)
        edge = stats.t_from
        for d, v in zip(stats.durations, stats.values):
            edge += d
            if u < edge:
                return v
        return stats.values[-1]
    raise ValueError(f"unknown staleness model {staleness_model!r}")


def run_simulation(market: MarketInstance, config: ScenarioConfig) -> SimulationTrace:
    """Run the asynchronous dynamics until the horizon or until max|z| < tolerance."""
    config.validate(market)
    n = market.n
    seed = 0 if config.seed is None else int(config.seed)
    streams = np.random.SeedSequence(seed).spawn(n + 1)
    rngs = [np.random.Generator(np.random.PCG64(s)) for s in streams]
    caps = [0] * n
    nxt = config.timing.schedule(n, rngs[:n], caps)
    obs_rng = rngs[n]

    p = check_prices(config.initial_prices, n).copy()
    state_t = [0.0]
    state_z = [market.excess(p)]
    initial_phi = market.phi(p)
    events: list[UpdateEvent] = []
    phis: list[float] = []
    last_idx = [-1] * n
    last_t = [0.0] * n

    heap = []
    for j in range(n):
        heapq.heappush(heap, (nxt(j, 0.0), j))

    stop = "horizon"
    while heap:
        t, j = heapq.heappop(heap)
        if t > config.horizon or t == math.inf:
            break
        cur = len(events)
        alpha = last_t[j]
        dt = t - alpha
        if not dt > 0:
            raise SimulationError(f"non-positive gap {dt} for good {j}", cur)
        if dt > 1 + GAP_TOL:
            raise SimulationError(f"gap {dt} for good {j} exceeds one time unit", cur)
        dt = min(dt, 1.0)
        lo = last_idx[j] + 1
        zs = [state_z[s][j] for s in range(lo, cur + 1)]
        stats = _build_stats(alpha, t, state_t[lo : cur + 1], zs, zs[-1], extra=zs)
        z_tilde = observe_z_tilde(stats, config.staleness, obs_rng)
        p_before = float(p[j])
        p_after, rec = async_step(p_before, z_tilde, config.lam, dt)
        if not (math.isfinite(p_after) and p_after > 0):
            raise SimulationError(f"price of good {j} became {p_after}", cur)
        p[j] = p_after
        z_new = market.excess(p)
        phi = market.phi(p)
        if not (np.all(np.isfinite(z_new)) and math.isfinite(phi)):
            raise SimulationError("non-finite excess demand or potential", cur)
        events.append(
            UpdateEvent(
                t=t,
                good=j,
                alpha_j=alpha,
                dt=dt,
                z_tilde=z_tilde,
                z_accurate=stats.z_accurate,
                z_min=stats.z_min,
                z_max=stats.z_max,
                gamma=rec.gamma,
                p_before=p_before,
                p_after=p_after,
            )
        )
        phis.append(phi)
        state_t.append(t)
        state_z.append(z_new)
        last_idx[j] = cur
        last_t[j] = t
        if float(np.max(np.abs(z_new))) < config.tolerance:
            stop = "converged"
            break
        heapq.heappush(heap, (nxt(j, t), j))

    if sum(caps):
        logger.info("poisson gaps capped at one time unit %d times", sum(caps))
    return SimulationTrace(
        market=market,
        config=config,
        initial_prices=np.array(config.initial_prices),
        events=events,
        phi=phis,
        initial_phi=initial_phi,
        final_prices=p.copy(),
        stop_reason=stop,
        gap_caps=sum(caps),
    )
