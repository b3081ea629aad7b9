import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from binchart.arl import first_signal_in_windows
from binchart.chart import (
    ClassicNpChart, Signal, binarize, binarize_array, buffer_limits, classic_limits,
    classic_run_length, init_buffer, run_length, signal_counts, step,
)

bits = st.integers(0, 1)


@pytest.mark.parametrize("y, z", [(0.0, 1), (-0.3, 0), (2.7, 1), (-0.0, 1), (1e-300, 1)])
def test_binarize(y, z):
    assert binarize(y) == z


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_binarize_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        binarize(bad)
    with pytest.raises(ValueError):
        binarize_array(np.array([0.0, bad]))


@pytest.mark.parametrize("M, p0, k, ucl, lcl", [
    (9, 0.5, 2.34, 8.01, 0.99),
    (4, 0.5, 0.0, 2.0, 2.0),
    (150, 0.5, 1.8, 75 + 1.8 * math.sqrt(37.5), 75 - 1.8 * math.sqrt(37.5)),
])
def test_buffer_limits(M, p0, k, ucl, lcl):
    lim = buffer_limits(M, p0, k)
    assert lim.ucl == pytest.approx(ucl, abs=1e-9)
    assert lim.lcl == pytest.approx(lcl, abs=1e-9)


def test_buffer_limits_m150_value():
    assert buffer_limits(150, 0.5, 1.8).ucl == pytest.approx(86.02, abs=5e-3)


@pytest.mark.parametrize("N, p0, k, ucl, lcl", [
    (100, 0.5, 3.0, 65.0, 35.0),
    (1, 0.5, 3.0, 2.0, -1.0),
    (25, 0.2, 2.0, 9.0, 1.0),
])
def test_classic_limits(N, p0, k, ucl, lcl):
    lim = classic_limits(N, p0, k)
    assert (lim.ucl, lim.lcl) == (pytest.approx(ucl), pytest.approx(lcl))


def test_classic_n1_never_signals():
    lim = classic_limits(1, 0.5, 3.0)
    assert [lim.classify(c) for c in (0, 1)] == [Signal.IN_CONTROL] * 2


@pytest.mark.parametrize("kwargs", [
    dict(M=0, p0=0.5, k=1.0), dict(M=3, p0=0.0, k=1.0), dict(M=3, p0=1.0, k=1.0),
    dict(M=3, p0=0.5, k=-0.1), dict(M=2.5, p0=0.5, k=1.0), dict(M=3, p0=0.5, k=math.nan),
])
def test_buffer_limits_rejects(kwargs):
    with pytest.raises(ValueError):
        buffer_limits(**kwargs)


@pytest.mark.parametrize("pre, J", [((1, 0, 1), 2), ((0, 0, 0), 0)])
def test_init_buffer_count(pre, J):
    assert init_buffer(3, 1.0, pre_run=pre).count == J


def test_init_buffer_wrong_length():
    with pytest.raises(ValueError):
        init_buffer(5, 1.0, pre_run=(0, 1, 0, 1))


def test_init_buffer_rejects_non_bits():
    with pytest.raises(ValueError):
        init_buffer(3, 1.0, pre_run=(0, 2, 1))


def test_step_eviction():
    chart = init_buffer(3, 5.0, pre_run=(1, 0, 1))
    J, sig = step(chart, 0)
    assert list(chart.ring) == [0, 1, 0] and J == 1 and sig is Signal.IN_CONTROL


def test_step_evicts_last_listed_bit():
    chart = init_buffer(3, 5.0, pre_run=(0, 0, 1))
    chart.step(0)
    assert list(chart.ring) == [0, 0, 0] and chart.count == 0


def test_step_upper_signal():
    chart = init_buffer(4, 1.0, pre_run=(1, 1, 1, 0))
    assert chart.limits.ucl == pytest.approx(3.0)
    assert step(chart, 1) == (4, Signal.UPPER)


def test_step_lower_signal():
    chart = init_buffer(4, 1.0, pre_run=(0, 0, 0, 1))
    assert chart.limits.lcl == pytest.approx(1.0)
    assert step(chart, 0) == (0, Signal.LOWER)


def test_upper_only_ignores_lower_limit():
    chart = init_buffer(4, 1.0, sided="upper_only", pre_run=(0, 0, 0, 1))
    assert step(chart, 0) == (0, Signal.IN_CONTROL)


def test_step_rejects_non_bit():
    chart = init_buffer(2, 1.0, pre_run=(0, 1))
    with pytest.raises(ValueError):
        chart.step(2)


def test_run_length_first_observation():
    chart = init_buffer(4, 1.0, pre_run=(1, 1, 1, 0))
    assert run_length(chart, iter([1.0] * 10), 100) == (1, False)


def test_run_length_censored():
    chart = init_buffer(4, 50.0, pre_run=(0, 1, 0, 1))
    rng = np.random.default_rng(0)
    assert run_length(chart, iter(rng.standard_normal(500)), 200) == (200, True)


def test_run_length_rejects_nonpositive_max():
    with pytest.raises(ValueError):
        run_length(init_buffer(2, 1.0, pre_run=(0, 1)), iter([1.0]), 0)


def test_classic_block_granularity():
    chart = ClassicNpChart(N=5, k=0.5)
    assert classic_run_length(chart, iter([1.0] * 20), 100) == (5, False)


def test_classic_hand_trace():
    chart = ClassicNpChart(N=2, k=1.0)
    assert chart.limits.ucl == pytest.approx(1 + math.sqrt(0.5))
    assert classic_run_length(chart, iter([1.0] * 10), 100) == (2, False)


def test_classic_censored():
    chart = ClassicNpChart(N=12, k=10.0)
    rng = np.random.default_rng(1)
    assert classic_run_length(chart, iter(rng.standard_normal(300)), 240) == (240, True)


def test_signal_counts_integer_form():
    lim = buffer_limits(12, 0.5, 2.31)
    hi, lo = signal_counts(lim, "two_sided")
    assert all((J >= hi or J <= lo) == (lim.classify(J) is not Signal.IN_CONTROL)
               for J in range(13))
    assert signal_counts(lim, "upper_only")[1] == -1


# --- properties -----------------------------------------------------------

@given(M=st.integers(1, 20), data=st.data())
def test_count_consistency_and_overlap(M, data):
    pre = data.draw(st.lists(bits, min_size=M, max_size=M))
    zs = data.draw(st.lists(bits, max_size=60))
    chart = init_buffer(M, 1.0, pre_run=pre)
    prev = chart.count
    history = list(pre)  # newest first
    for z in zs:
        J, _ = chart.step(z)
        history.insert(0, z)
        assert J == sum(chart.ring) == sum(history[:M])
        assert abs(J - prev) <= 1
        prev = J


@given(M=st.integers(1, 500), k=st.floats(0, 5))
def test_limit_symmetry(M, k):
    lim = buffer_limits(M, 0.5, k)
    assert lim.ucl + lim.lcl == pytest.approx(M)


@given(M=st.integers(1, 40), k1=st.floats(0, 4), k2=st.floats(0, 4), data=st.data())
def test_signal_set_shrinks_with_k(M, k1, k2, data):
    lo_k, hi_k = sorted((k1, k2))
    J = data.draw(st.integers(0, M))
    if buffer_limits(M, 0.5, hi_k).classify(J) is not Signal.IN_CONTROL:
        assert buffer_limits(M, 0.5, lo_k).classify(J) is not Signal.IN_CONTROL


@given(M=st.integers(1, 30), k=st.floats(0, 3.5), p0=st.floats(0.05, 0.95), data=st.data())
def test_buffer_matches_classic_on_one_block(M, k, p0, data):
    zs = data.draw(st.lists(bits, min_size=M, max_size=M))
    # a full buffer of fresh bits is one classic block
    buf = init_buffer(M, k, p0, pre_run=[0] * M)
    for z in zs:
        _, sig = buf.step(z)
    classic = ClassicNpChart(N=M, k=k, p0=p0)
    for z in zs:
        csig = classic.step(z)
    assert sig == csig


@settings(max_examples=60)
@given(M=st.integers(1, 12), k=st.sampled_from([0.5, 1.0, 1.5, 2.0, 2.5]), data=st.data())
def test_vectorized_first_signal_matches_scalar(M, k, data):
    n, B = 6, 25
    seed = data.draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    tail = (rng.random((n, M)) < 0.5).astype(np.int8)
    new = (rng.random((n, B)) < 0.5).astype(np.int8)
    hi, lo = signal_counts(buffer_limits(M, 0.5, k), "two_sided")
    got = first_signal_in_windows(tail, new, hi, lo)
    for r in range(n):
        chart = init_buffer(M, k, pre_run=tail[r, ::-1].tolist())
        want = -1
        for j in range(B):
            if chart.step(int(new[r, j]))[1] is not Signal.IN_CONTROL:
                want = j
                break
        assert int(got[r]) == want
