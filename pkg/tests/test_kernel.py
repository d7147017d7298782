import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from phyauth.errors import DimensionError, InsufficientDataError, ParameterError
from phyauth.kernel import MIN_WIDTH, KernelParams, gaussian_kernel, kernel_matrix, median_heuristic_width

vec3 = arrays(float, 3, elements=st.floats(-5, 5))
widths = st.floats(0.05, 20)


def test_width_must_be_positive_finite():
    for w in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ParameterError):
            KernelParams(w)


def test_zero_distance_is_one():
    x = np.array([0.3, -0.2])
    assert gaussian_kernel(x, x, KernelParams(0.7)) == 1.0


def test_direct_value():
    assert gaussian_kernel([1.0, 1.0], [0.0, 0.0], KernelParams(1.0)) == pytest.approx(math.exp(-1), abs=1e-15)
    assert math.exp(-1) == pytest.approx(0.3678794, abs=1e-7)


def test_large_width_tends_to_one_monotonically():
    x, y = np.array([0.0, 1.0]), np.array([1.0, -1.0])
    vals = [gaussian_kernel(x, y, KernelParams(s)) for s in (0.5, 1, 2, 10, 100, 1e4)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(1.0, abs=1e-7)


def test_shape_mismatch():
    with pytest.raises(DimensionError):
        gaussian_kernel([1.0], [1.0, 2.0], KernelParams(1.0))


@given(vec3, vec3, widths)
def test_matches_oracle(x, y, w):
    assert gaussian_kernel(x, y, KernelParams(w)) == pytest.approx(oracles.kernel(x, y, w), rel=1e-13, abs=1e-300)


@given(vec3, vec3, widths)
def test_symmetric(x, y, w):
    kp = KernelParams(w)
    assert gaussian_kernel(x, y, kp) == gaussian_kernel(y, x, kp)


@given(vec3, vec3, widths)
def test_bounded(x, y, w):
    k = gaussian_kernel(x, y, KernelParams(w))
    assert 0 <= k <= 1
    if np.sum((x - y) ** 2) > 1e-15 and np.sum((x - y) ** 2) / (2 * w * w) < 700:
        assert 0 < k < 1


@given(st.integers(1, 8), st.integers(1, 4), widths, st.integers(0, 2 ** 32 - 1))
def test_gram_positive_semidefinite(m, n, w, seed):
    X = np.random.default_rng(seed).uniform(-1, 1, (m, n))
    K = kernel_matrix(X, X, KernelParams(w))
    assert np.all(np.diag(K) == 1.0)
    assert np.allclose(K, K.T)
    assert np.linalg.eigvalsh(K).min() >= -1e-9


def test_kernel_matrix_matches_pointwise(rng):
    X, Y = rng.normal(size=(7, 3)), rng.normal(size=(5, 3))
    K = kernel_matrix(X, Y, KernelParams(1.3), chunk=4)
    for i in range(7):
        for j in range(5):
            assert K[i, j] == pytest.approx(oracles.kernel(X[i], Y[j], 1.3), rel=1e-13)


def test_median_two_points():
    assert median_heuristic_width([[0.0, 0.0], [2.0, 0.0]]).width == 2.0


def test_median_three_collinear():
    assert median_heuristic_width([0.0, 1.0, 3.0]).width == 2.0


def test_median_identical_points_floor():
    assert median_heuristic_width(np.ones((5, 2))).width == MIN_WIDTH == 1e-6


def test_median_needs_two_points():
    with pytest.raises(InsufficientDataError):
        median_heuristic_width([[1.0, 2.0]])


@given(st.integers(2, 12).flatmap(lambda m: arrays(float, (m, 2), elements=st.floats(-3, 3))))
def test_median_matches_oracle(X):
    want = max(oracles.median_pairwise_distance(X), MIN_WIDTH)
    assert median_heuristic_width(X).width == pytest.approx(want, rel=1e-12)


def test_median_subsample_is_seeded(rng):
    X = rng.normal(size=(3000, 2))
    a = median_heuristic_width(X, seed=5).width
    assert a == median_heuristic_width(X, seed=5).width
    assert a == pytest.approx(oracles.median_pairwise_distance(X[:800]), rel=0.1)
