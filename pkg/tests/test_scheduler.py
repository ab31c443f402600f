import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tatonnement.corpus import builtin_corpus
from tatonnement.dynamics import sync_step
from tatonnement.market import CES, Buyer, CobbDouglas, Leontief, MarketInstance
from tatonnement.scheduler import (
    STALENESS_MODELS,
    ConfigError,
    IntervalStats,
    JitteredFixed,
    PoissonClipped,
    PricePath,
    RoundRobin,
    ScenarioConfig,
    Scripted,
    SimulationError,
    interval_z_stats,
    observe_z_tilde,
    run_simulation,
)

LAM = 1 / 26
CORPUS = {sc.name: sc for sc in builtin_corpus()}


def two_segment(leo_market):
    path = PricePath(leo_market, [1.0, 1.0])
    path.append(0.5, [1.0, 0.9])
    path.known_until = 1.0
    return interval_z_stats(path, leo_market, 0, 0.0, 1.0)


def test_interval_stats_two_segments(leo_market):
    s = two_segment(leo_market)
    assert s.values == (-0.5, 1 / 1.9 - 1)
    assert s.z_min == -0.5
    assert s.z_max == pytest.approx(-0.4736842105, abs=1e-9)
    assert s.z_avg == pytest.approx(-0.4868421053, abs=1e-9)


def test_interval_stats_without_breakpoint(leo_market):
    path = PricePath(leo_market, [1.0, 1.0])
    path.known_until = 2.0
    s = interval_z_stats(path, leo_market, 1, 0.3, 0.9)
    assert s.z_min == s.z_max == s.z_avg == -0.5


def test_interval_stats_at_equilibrium(cd_market):
    path = PricePath(cd_market, [0.5, 0.5])
    path.known_until = 1.0
    s = interval_z_stats(path, cd_market, 0, 0.0, 1.0)
    assert (s.z_min, s.z_max, s.z_avg) == (0.0, 0.0, 0.0)


def test_interval_outside_range(leo_market):
    path = PricePath(leo_market, [1.0, 1.0])
    with pytest.raises(ValueError):
        interval_z_stats(path, leo_market, 0, 0.0, 1.0)
    path.known_until = 1.0
    with pytest.raises(ValueError):
        interval_z_stats(path, leo_market, 0, 0.5, 0.5)


def test_observation_models(leo_market):
    s = two_segment(leo_market)
    assert observe_z_tilde(s, "endpoint") == s.z_accurate == s.values[-1]
    assert observe_z_tilde(s, "start") == -0.5
    assert observe_z_tilde(s, "time_weighted_average") == pytest.approx(-0.4868421053, abs=1e-9)
    assert observe_z_tilde(s, "adversarial_max_gap") == -0.5
    rng = np.random.default_rng(0)
    draws = {observe_z_tilde(s, "random_point", rng) for _ in range(200)}
    assert draws == set(s.values)
    with pytest.raises(ValueError):
        observe_z_tilde(s, "random_point")


def test_adversarial_picks_far_end():
    s = IntervalStats(0, 1, -0.5, -0.4737, -0.49, -0.4737, (-0.5, -0.4737), (0.5, 0.5))
    assert observe_z_tilde(s, "adversarial_max_gap") == -0.5


@given(st.lists(st.tuples(st.floats(-1, 5), st.floats(1e-3, 1)), min_size=1, max_size=8), st.integers(0, 99))
def test_observations_stay_in_range(segs, seed):
    vals = tuple(v for v, _ in segs)
    durs = tuple(d for _, d in segs)
    s = IntervalStats(0.0, sum(durs), min(vals), max(vals),
                      sum(v * d for v, d in segs) / sum(durs), vals[-1], vals, durs)
    rng = np.random.default_rng(seed)
    for model in STALENESS_MODELS:
        z = observe_z_tilde(s, model, rng)
        assert s.z_min <= z <= s.z_max


# -- configuration ------------------------------------------------------------

def test_seed_required_for_stochastic(ces_market):
    cfg = ScenarioConfig(PoissonClipped((1.0,)), "endpoint", LAM, 5, (1, 1))
    with pytest.raises(ConfigError, match="seed"):
        run_simulation(ces_market, cfg)
    cfg = ScenarioConfig(RoundRobin(), "random_point", LAM, 5, (1, 1))
    with pytest.raises(ConfigError, match="seed"):
        run_simulation(ces_market, cfg)


def test_strict_lambda_enforced(ces_market):
    with pytest.raises(ConfigError, match="strict"):
        run_simulation(ces_market, ScenarioConfig(RoundRobin(), "endpoint", 0.1, 5, (1, 1)))
    tr = run_simulation(ces_market, ScenarioConfig(RoundRobin(), "endpoint", 0.1, 5, (1, 1),
                                                   lambda_mode="exploratory"))
    assert len(tr) > 0


@pytest.mark.parametrize("timing", [
    RoundRobin(period=1.5),
    RoundRobin(offsets=(0.2,)),
    JitteredFixed(0.9, 0.2),
    JitteredFixed(0.2, 0.3),
    PoissonClipped((1.0, 2.0, 3.0)),
    PoissonClipped((0.0,)),
    Scripted(((0.5, 0), (1.7, 0), (1.0, 1))),
    Scripted(((0.5, 0), (0.5, 0), (1.0, 1))),
    Scripted(((0.5, 0), (1.0, 2))),
    Scripted(((0.5, 0), (2.0, 1), (1.4, 0), (2.3, 0))),
])
def test_timing_rejected_before_run(ces_market, timing):
    with pytest.raises(ConfigError):
        run_simulation(ces_market, ScenarioConfig(timing, "endpoint", LAM, 5, (1, 1), seed=0))


@pytest.mark.parametrize("kw", [
    dict(staleness="latest"), dict(lam=0.0), dict(lam=1.0), dict(horizon=0.0), dict(seed=-1),
    dict(lambda_mode="loose"),
])
def test_config_field_validation(kw):
    base = dict(timing=RoundRobin(), staleness="endpoint", lam=LAM, horizon=5, initial_prices=(1, 1))
    base.update(kw)
    with pytest.raises(ConfigError):
        ScenarioConfig(**base)


def test_bad_initial_prices(ces_market):
    with pytest.raises(ConfigError, match="initial_prices"):
        run_simulation(ces_market, ScenarioConfig(RoundRobin(), "endpoint", LAM, 5, (1, 0)))


# -- runs ---------------------------------------------------------------------

def test_start_at_equilibrium_is_stationary(cd_market):
    tr = run_simulation(cd_market, ScenarioConfig(RoundRobin(), "endpoint", LAM, 20, (0.5, 0.5), tolerance=0.0))
    assert len(tr) == 40
    assert all(e.p_after == e.p_before for e in tr.events)


def test_early_stop(cd_market):
    tr = run_simulation(cd_market, ScenarioConfig(RoundRobin(), "endpoint", LAM, 20, (0.5, 0.5)))
    assert tr.stop_reason == "converged" and len(tr) == 1


def test_scripted_times_are_used(ces_market):
    script = ((0.5, 0), (1.0, 1), (1.25, 0), (1.9, 1), (2.0, 0))
    tr = run_simulation(ces_market, ScenarioConfig(Scripted(script), "endpoint", LAM, 10, (1, 4), tolerance=0))
    assert [(e.t, e.good) for e in tr.events] == list(script)
    assert [e.alpha_j for e in tr.events] == [0.0, 0.0, 0.5, 1.0, 1.25]


def test_leontief_round_robin_converges(leo_market):
    tr = run_simulation(leo_market, ScenarioConfig(RoundRobin(), "endpoint", LAM, 2000, (1, 1), tolerance=1e-3))
    assert tr.stop_reason == "converged"
    assert tr.final_prices.sum() == pytest.approx(1.0, abs=2e-3)


def test_simultaneous_updates_ordered_by_good(ces_market):
    tr = run_simulation(ces_market, ScenarioConfig(RoundRobin(), "endpoint", LAM, 3, (1, 4), tolerance=0))
    assert [(e.t, e.good) for e in tr.events] == [(1.0, 0), (1.0, 1), (2.0, 0), (2.0, 1), (3.0, 0), (3.0, 1)]
    # same-instant updates do not see each other: good 1 acts on the pre-t prices
    first = ces_market.excess(np.array([1.0, 4.0]))
    assert tr.events[1].z_tilde == first[1]
    # but the accurate value and the range include the fresh state
    assert tr.events[1].z_accurate != first[1]
    assert tr.events[1].z_min <= first[1] <= tr.events[1].z_max


def test_round_robin_matches_sync(ces_market):
    m = MarketInstance(3, [Buyer(1.0, CES(-0.5, (1, 2, 1))), Buyer(2.0, CobbDouglas((0.2, 0.3, 0.5)))])
    tr = run_simulation(m, ScenarioConfig(RoundRobin(), "endpoint", LAM, 50, (0.5, 2, 1), tolerance=0))
    P = tr.price_states()[m.n :: m.n]
    p = np.array([0.5, 2.0, 1.0])
    for row in P:
        p = sync_step(p, m.excess(p), LAM)
        assert np.array_equal(row, p)


def test_divergent_run_reports_event():
    m = MarketInstance(2, [Buyer(1.0, CES(-1, (1, 1)))])
    cfg = ScenarioConfig(RoundRobin(), "endpoint", 0.99, 5, (1e-300, 1.0), lambda_mode="exploratory")
    try:
        run_simulation(m, cfg)
    except SimulationError as exc:
        assert exc.event_index >= 0


def test_poisson_caps_are_counted():
    sc = CORPUS["complementary_2/poisson_adversarial"]
    tr = run_simulation(sc.market, sc.config(3, horizon=50))
    capped = sum(abs(e.dt - 1.0) < 1e-12 for e in tr.events)
    # draws landing past the horizon are capped too but never executed
    assert 0 < capped <= tr.gap_caps <= capped + sc.market.n


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_event_invariants(name):
    sc = CORPUS[name]
    for staleness in STALENESS_MODELS:
        tr = run_simulation(sc.market, sc.config(1, horizon=30, staleness=staleness))
        last = {}
        prev_t = 0.0
        for k, e in enumerate(tr.events):
            assert 0 < e.dt <= 1
            assert e.z_min <= e.z_tilde <= e.z_max
            assert e.z_min <= e.z_accurate <= e.z_max
            assert e.alpha_j == last.get(e.good, 0.0)
            assert e.t >= prev_t
            if k and e.t == prev_t:
                assert e.good > tr.events[k - 1].good
            assert e.gamma == max(1.0, e.z_tilde) / (sc.base.lam * e.p_before)
            last[e.good] = e.t
            prev_t = e.t
        # nobody waits more than a time unit at the end of the run either
        if tr.stop_reason == "horizon":
            assert all(30 - t <= 1 + 1e-12 for t in last.values())


@pytest.mark.parametrize("name", ["mixed_3/poisson_adversarial", "leontief_3/jittered_average"])
def test_runs_are_repeatable(name):
    sc = CORPUS[name]
    a = run_simulation(sc.market, sc.config(5, horizon=40, staleness="random_point"))
    b = run_simulation(sc.market, sc.config(5, horizon=40, staleness="random_point"))
    assert a.events == b.events and a.phi == b.phi
    c = run_simulation(sc.market, sc.config(6, horizon=40, staleness="random_point"))
    assert c.events != a.events


def test_price_path_from_trace():
    sc = CORPUS["leontief_2/poisson_adversarial"]
    tr = run_simulation(sc.market, sc.config(0, horizon=10))
    path = PricePath.from_trace(tr)
    e = tr.events[-1]
    s = interval_z_stats(path, sc.market, e.good, e.alpha_j, e.t)
    assert s.z_min >= e.z_min - 1e-15 and s.z_max <= e.z_max + 1e-15
