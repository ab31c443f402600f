import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tatonnement.dynamics import (
    StepParams,
    additive_step,
    analysis_constants,
    async_step,
    max_safe_lambda,
    safety_condition,
    sync_step,
)

LAM = 1 / 26

prices = st.floats(1e-6, 1e6)
zs = st.floats(-1.0, 50.0)
lams = st.floats(1e-4, 0.5)
dts = st.floats(1e-9, 1.0)


def test_sync_examples():
    assert sync_step([1.0], [-0.5], LAM)[0] == pytest.approx(1 - 0.5 / 26, rel=1e-15)
    assert sync_step([1.0], [3.0], LAM)[0] == pytest.approx(27 / 26, rel=1e-15)
    assert sync_step([2.5], [0.0], LAM)[0] == 2.5


def test_sync_rejects_bad_input():
    with pytest.raises(ValueError):
        sync_step([1.0], [0.1], 1.0)
    with pytest.raises(ValueError):
        sync_step([1.0], [-1.5], LAM)


def test_async_examples():
    p, rec = async_step(1.0, -0.5, LAM, 0.5)
    assert p == pytest.approx(1 - 1 / 104, rel=1e-15)
    assert rec.gamma == pytest.approx(26.0, rel=1e-15)
    p, rec = async_step(2.0, 3.0, LAM, 1.0)
    assert p == pytest.approx(27 / 13, rel=1e-15)
    assert rec.gamma == pytest.approx(39.0, rel=1e-15)
    p, _ = async_step(1.0, -1.0, LAM, 1.0)
    assert p == pytest.approx(25 / 26, rel=1e-15) and p > 0


@pytest.mark.parametrize("dt", [0.0, -0.1, 1.5])
def test_async_rejects_bad_dt(dt):
    with pytest.raises(ValueError):
        async_step(1.0, 0.1, LAM, dt)


def test_max_safe_lambda():
    assert max_safe_lambda("complementary") == 1 / 25.5
    assert max_safe_lambda("leontief") == 1 / 25.5
    assert max_safe_lambda("mixed", 2.0) == 1 / 52
    with pytest.raises(ValueError):
        max_safe_lambda("mixed", 0.5)


def test_safety_condition_at_bound():
    v = safety_condition(1 / 25.5)
    assert v <= 1.0
    assert v == pytest.approx(4 * math.sqrt(21) / 25.5 * math.exp(8 / 25.5 * (1 + 1 / 25.5)), rel=1e-15)
    # the condition is not slack by much: 1/24 already fails
    assert safety_condition(1 / 24) > 1.0


def test_analysis_constants():
    c1, c2, c3 = analysis_constants(1e-12)
    assert c1 == pytest.approx(2 / math.sqrt(21), rel=1e-10)
    assert c2 == 0.25
    c1, _, c3 = analysis_constants(1 / 26)
    assert c1 == pytest.approx(2 / math.sqrt(21) * math.exp(2 / 26 * 27 / 26), rel=1e-15)
    assert c3 == pytest.approx(21 * c1 / 8, rel=1e-15)
    with pytest.raises(ValueError):
        analysis_constants(0.0)


def test_step_params_strict_mode():
    StepParams(1 / 25.5, "complementary")
    with pytest.raises(ValueError):
        StepParams(0.1, "complementary")
    StepParams(0.1, "complementary", strict=False)


@given(prices, zs, lams, dts)
def test_additive_form_agrees(p, z, lam, dt):
    after, rec = async_step(p, z, lam, dt)
    assert additive_step(rec) == pytest.approx(after, rel=1e-14)


@given(prices, zs, lams, dts)
def test_positivity_and_ratio(p, z, lam, dt):
    after, _ = async_step(p, z, lam, dt)
    assert after > 0
    assert (1 - lam) * (1 - 1e-15) <= after / p <= (1 + lam) * (1 + 1e-15)


@given(prices, lams, dts)
def test_fixed_point(p, lam, dt):
    assert async_step(p, 0.0, lam, dt)[0] == p


@given(prices, zs, zs, lams, dts)
def test_monotone_in_observation(p, z1, z2, lam, dt):
    lo, hi = sorted((z1, z2))
    assert async_step(p, lo, lam, dt)[0] <= async_step(p, hi, lam, dt)[0]


@given(st.lists(st.tuples(prices, zs), min_size=1, max_size=6), lams)
def test_sync_is_async_with_unit_gaps(pairs, lam):
    p = np.array([a for a, _ in pairs])
    z = np.array([b for _, b in pairs])
    s = sync_step(p, z, lam)
    a = np.array([async_step(pj, zj, lam, 1.0)[0] for pj, zj in zip(p, z)])
    assert np.array_equal(s, a)
