import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from binchart.noise import (
    GAUSSIAN, ChangePointSpec, ErrorDist, ImageNoiseModel, LocalAlternative, bernoulli_array,
    gen_bernoulli_stream, gen_stream, image_column_stream, jump_to_delta, sample_error,
    sample_image, shift_probability, unit_variance,
)
from binchart.rng import substream

dists = st.builds(ErrorDist, st.sampled_from(["gaussian", "laplace", "cauchy"]),
                  st.floats(0.05, 20.0))


def test_gaussian_sample_mean():
    x = GAUSSIAN.sample(substream(1, 0), 10 ** 6)
    assert abs(x.mean()) < 4e-3


def test_laplace_symmetric():
    x = ErrorDist("laplace").sample(substream(1, 1), 200_000)
    assert abs((x >= 0).mean() - 0.5) < 4 * 0.5 / math.sqrt(x.size)


def test_cauchy_median():
    x = ErrorDist("cauchy").sample(substream(1, 2), 200_000)
    assert abs(np.median(x)) < 0.02


def test_sample_error_scalar():
    assert isinstance(sample_error(GAUSSIAN, substream(1, 3)), float)


@pytest.mark.parametrize("family, scale", [("student", 1.0), ("gaussian", 0.0), ("laplace", -1.0)])
def test_error_dist_rejects(family, scale):
    with pytest.raises(ValueError):
        ErrorDist(family, scale)


@pytest.mark.parametrize("dist, m, p", [
    (GAUSSIAN, 0.5, 0.691462),
    (ErrorDist("cauchy"), 1.0, 0.75),
    (ErrorDist("laplace"), 1.0, 1 - 0.5 * math.exp(-1)),
])
def test_shift_probability_values(dist, m, p):
    assert shift_probability(dist, m) == pytest.approx(p, abs=1e-6)


@given(dist=dists)
def test_shift_probability_half_at_zero(dist):
    assert shift_probability(dist, 0.0) == 0.5


@given(dist=dists, m=st.floats(-30, 30))
def test_shift_probability_antisymmetric(dist, m):
    assert shift_probability(dist, m) + shift_probability(dist, -m) == pytest.approx(1.0, abs=1e-12)


@given(dist=dists, a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_shift_probability_increasing(dist, a, b):
    if abs(a - b) > 1e-6:
        lo, hi = sorted((a, b))
        assert shift_probability(dist, lo) < shift_probability(dist, hi)


def _take(it, n):
    return np.fromiter((next(it) for _ in range(n)), float, n)


def test_stream_in_control_frequency():
    y = _take(gen_stream(ChangePointSpec(0.0, 37), GAUSSIAN, substream(2, 0)), 200_000)
    assert abs((y >= 0).mean() - 0.5) < 0.005


def test_stream_huge_jump_all_ones():
    y = _take(gen_stream(ChangePointSpec(1e6, 0), GAUSSIAN, substream(2, 1)), 5000)
    assert (y >= 0).all()


def test_stream_jump_frequency():
    y = _take(gen_stream(ChangePointSpec(0.5, 0), GAUSSIAN, substream(2, 2)), 10 ** 6)
    assert (y >= 0).mean() == pytest.approx(0.6915, abs=0.002)


def test_stream_change_index():
    y = _take(gen_stream(ChangePointSpec(1e6, 10), GAUSSIAN, substream(2, 3)), 20)
    assert (y[10:] > 1e5).all() and (np.abs(y[:10]) < 100).all()


def test_local_alternative_no_drift():
    la = LocalAlternative(0.5, 0.0, 0.5, 1000)
    assert (la.success_probs() == 0.5).all()


def test_local_alternative_post_change_frequency():
    la = LocalAlternative(0.5, 2.0, 0.5, 10_000)
    assert la.p1 == pytest.approx(0.52)
    z = bernoulli_array(la, substream(3, 0), 20)
    post = z[:, la.change_index:].mean()
    assert post == pytest.approx(0.52, abs=4 * math.sqrt(0.25 / (20 * 5000)))


def test_local_alternative_boundary():
    N = 100
    la = LocalAlternative(0.5, 1.0, 1 - 1 / N, N)
    probs = la.success_probs()
    assert probs[-1] == la.p1 and (probs[:-2] == 0.5).all()


def test_bernoulli_stream_length():
    la = LocalAlternative(0.5, 1.0, 0.3, 50)
    assert len(list(gen_bernoulli_stream(la, substream(3, 1)))) == 50


def test_local_alternative_rejects_bad_p1():
    with pytest.raises(ValueError):
        LocalAlternative(0.5, 10.0, 0.5, 4)


@pytest.mark.parametrize("family, delta", [
    ("gaussian", 1 / math.sqrt(2 * math.pi)), ("laplace", 0.5), ("cauchy", 1 / math.pi),
])
def test_jump_to_delta(family, delta):
    assert jump_to_delta(ErrorDist(family), 1.0) == pytest.approx(delta, abs=1e-5)


def test_jump_to_delta_exact_converges():
    approx = jump_to_delta(GAUSSIAN, 1.0)
    assert jump_to_delta(GAUSSIAN, 1.0, N=10 ** 8, exact=True) == pytest.approx(approx, rel=1e-6)


def test_neighborhood_excludes_own_pixel():
    model = ImageNoiseModel(10, 10, h=2)
    for i in range(10):
        for j in range(10):
            cells = model.neighborhood(i, j)
            assert (i, j) not in cells
            # nothing at or above the current row in the own column
            assert all(l < j for c, l in cells if c == i)


def test_unit_variance_reduces_to_iid():
    model = ImageNoiseModel(5, 50, variance_fn=unit_variance)
    xi, eps, scales = sample_image(model, substream(4, 0))
    assert (scales == 1.0).all() and np.array_equal(xi, eps)


def test_image_column_stream_balanced():
    model = ImageNoiseModel(3, 100_000)
    z = np.fromiter((v >= 0 for v in image_column_stream(model, 1, substream(4, 1))), bool)
    assert abs(z.mean() - 0.5) < 4 * 0.5 / math.sqrt(z.size)


def test_image_column_out_of_range():
    with pytest.raises(ValueError):
        next(image_column_stream(ImageNoiseModel(3, 10), 3, substream(4, 2)))


def test_image_martingale_buckets():
    # conditional on the neighbourhood energy, the sign of eps is a fair coin
    model = ImageNoiseModel(60, 400)
    _, eps, scales = sample_image(model, substream(4, 3))
    z, s = (eps >= 0).ravel(), scales.ravel()
    edges = np.quantile(s, [0, 0.25, 0.5, 0.75, 1.0])
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (s >= lo) & (s <= hi)
        n = sel.sum()
        assert abs(z[sel].mean() - 0.5) < 4 * 0.5 / math.sqrt(n)


@pytest.mark.parametrize("family", ["gaussian", "laplace"])
def test_standardized_has_unit_variance(family):
    x = ErrorDist.standardized(family).sample(substream(5, 0), 400_000)
    assert x.var() == pytest.approx(1.0, abs=0.02)


def test_standardized_cauchy_keeps_unit_scale():
    assert ErrorDist.standardized("cauchy") == ErrorDist("cauchy", 1.0)
