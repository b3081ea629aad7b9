import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from binchart.arl import SimConfig
from binchart.baselines import (
    CusumChart, EwmaChart, ShewhartChart, baseline_step, calibrate_baseline, chart_params,
    estimate_baseline_arl, make_baseline,
)
from binchart.chart import Signal
from binchart.design import UnreachableError

SIM = SimConfig(n_runs=5000)

# EWMA(lam=0.1) threshold for in-control ARL 435, pinned from the default seed
EWMA_L_PIN = 2.766


@pytest.mark.parametrize("y, sig", [(3.1, Signal.UPPER), (-3.1, Signal.LOWER), (2.9, Signal.IN_CONTROL)])
def test_shewhart_step(y, sig):
    assert baseline_step(ShewhartChart(L=3.0), y) is sig


@given(ys=st.lists(st.floats(-6, 6), min_size=1, max_size=40), L=st.floats(0.5, 4))
def test_ewma_lambda_one_is_shewhart(ys, L):
    ewma, shew = EwmaChart(lam=1.0, L=L), ShewhartChart(L=L)
    assert [ewma.step(y) for y in ys] == [shew.step(y) for y in ys]


def test_ewma_rejects_lambda():
    with pytest.raises(ValueError):
        EwmaChart(lam=0.0)


def test_cusum_accumulates():
    c = CusumChart(kappa=0.5, h=2.0)
    sigs = [c.step(1.0) for _ in range(5)]
    # S+ grows by 0.5 per step and first exceeds 2 at step 5
    assert sigs[:4] == [Signal.IN_CONTROL] * 4 and sigs[4] is Signal.UPPER


def test_cusum_upper_only_ignores_drop():
    c = CusumChart(kappa=0.0, h=1.0, sided="upper_only")
    assert all(c.step(-5.0) is Signal.IN_CONTROL for _ in range(10))


@pytest.mark.parametrize("kind", ["shewhart", "ewma", "cusum"])
def test_vectorized_update_matches_step(kind):
    chart = make_baseline(kind)
    rng = np.random.default_rng(3)
    y = rng.standard_normal((4, 200)) + 0.3
    state = chart.init_state(4)
    first_vec = np.full(4, -1)
    for j in range(200):
        state, sig = chart.update(state, y[:, j])
        first_vec[(first_vec < 0) & sig] = j
    for r in range(4):
        c = make_baseline(kind)
        first = next((j for j in range(200) if c.step(y[r, j]) is not Signal.IN_CONTROL), -1)
        assert first == first_vec[r]


def test_make_baseline_unknown():
    with pytest.raises(ValueError):
        make_baseline("gewma")


def test_shewhart_370_is_three_sigma():
    chart = calibrate_baseline("shewhart", 370, SIM)
    assert chart.L == pytest.approx(3.0, abs=0.05)


def test_cusum_h_increases_with_target():
    hs = [calibrate_baseline("cusum", t, SimConfig(n_runs=2000)).h for t in (150, 435, 900)]
    assert hs == sorted(hs) and len(set(hs)) == 3


def test_ewma_pin_and_accuracy():
    chart = calibrate_baseline("ewma", 435, SIM, lam=0.1)
    assert chart.L == pytest.approx(EWMA_L_PIN, abs=0.03)
    est = estimate_baseline_arl(chart, sim=SIM, stream=(9,))
    assert est.mean_rl == pytest.approx(435, rel=0.05)


def test_calibration_unreachable():
    with pytest.raises(UnreachableError):
        calibrate_baseline("shewhart", 1e9, SimConfig(n_runs=50, max_steps=1000))


def test_chart_params_drop_state():
    c = CusumChart(h=5.0)
    c.step(3.0)
    assert chart_params(c) == {"kappa": 0.25, "h": 5.0, "sided": "two_sided", "kind": "cusum"}


def test_shift_reduces_arl():
    chart = ShewhartChart(3.0)
    a0 = estimate_baseline_arl(chart, sim=SimConfig(n_runs=2000)).mean_rl
    a1 = estimate_baseline_arl(chart, jump=1.0, sim=SimConfig(n_runs=2000)).mean_rl
    assert a1 < a0
    # exact Shewhart ARL at jump 1: 1 / (P(Y > 3) + P(Y < -3)) with Y ~ N(1, 1)
    from scipy.stats import norm
    exact = 1 / (norm.sf(2.0) + norm.cdf(-4.0))
    assert a1 == pytest.approx(exact, rel=0.1)
