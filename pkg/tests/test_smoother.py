import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from groupspam.core import Dataset, FittedModel, GroupStructure
from groupspam.smoother import (SmootherSet, build_smoother, plugin_bandwidth,
                                predict_component, smooth)

columns = arrays(float, st.integers(2, 30), elements=st.floats(-5, 5), unique=True)


def naive_smoother(x, h):
    """Loop-based oracle for the normalized Gaussian kernel weights."""
    n = len(x)
    S = np.empty((n, n))
    for i in range(n):
        k = [math.exp(-((x[i] - x[m]) ** 2) / (2 * h * h)) for m in range(n)]
        tot = sum(k)
        S[i] = [v / tot for v in k]
    return S


def test_bandwidth_matches_stdlib():
    x = [0.3, -1.2, 2.2, 0.9, 1.7, -0.4]
    expected = 0.6 * statistics.stdev(x) * len(x) ** (-1 / 5)
    assert plugin_bandwidth(x) == pytest.approx(expected, rel=1e-14)


def test_bandwidth_rejects_degenerate_columns():
    with pytest.raises(ValueError, match="constant"):
        plugin_bandwidth([1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        plugin_bandwidth([1.0])


@given(columns, st.floats(0.2, 3.0))
def test_smoother_matches_loop_oracle(x, h):
    np.testing.assert_allclose(build_smoother(x, h), naive_smoother(x, h), rtol=1e-12, atol=1e-300)


@given(columns, st.floats(0.05, 3.0))
def test_smoother_is_stochastic(x, h):
    S = build_smoother(x, h)
    assert np.all(S >= 0)
    np.testing.assert_allclose(S.sum(axis=1), 1.0, rtol=1e-12)
    np.testing.assert_allclose(smooth(S, np.full(len(x), 3.5)), 3.5, rtol=1e-12)


def test_far_query_does_not_underflow():
    x = np.array([0.0, 1.0, 2.0])
    ds = Dataset(x[:, None], np.zeros(3))
    f = np.array([[-1.0, 0.0, 1.0]])
    m = FittedModel(f_hat=f, y_mean=0.0, train_x=ds.x, train_y=ds.y, bandwidths=np.array([0.1]),
                    lam=0.0, active_set=[0], group_structure=GroupStructure.singletons(1))
    out = predict_component(m, 0, [1e3, -1e3])
    np.testing.assert_allclose(out, [1.0, -1.0])


def test_smooth_dimension_check():
    with pytest.raises(ValueError):
        smooth(np.eye(3), np.zeros(4))
    with pytest.raises(ValueError):
        build_smoother([0.0, 1.0], 0.0)


def test_predict_component_at_training_points_is_smoothed_fit():
    rng = np.random.default_rng(1)
    x = rng.uniform(-2, 2, size=(25, 2))
    ds = Dataset(x, rng.standard_normal(25))
    S = SmootherSet.from_dataset(ds)
    f = np.vstack([np.sin(x[:, 0]), np.zeros(25)])
    m = FittedModel(f_hat=f, y_mean=0.0, train_x=x, train_y=ds.y, bandwidths=S.bandwidths,
                    lam=0.0, active_set=[0], group_structure=GroupStructure.singletons(2))
    np.testing.assert_allclose(predict_component(m, 0, x[:, 0]), S[0] @ f[0], rtol=1e-12)
    np.testing.assert_array_equal(predict_component(m, 1, x[:, 1]), np.zeros(25))
    with pytest.raises(IndexError):
        predict_component(m, 2, [0.0])


def test_smoother_set_take_shares_matrices():
    rng = np.random.default_rng(2)
    ds = Dataset(rng.uniform(size=(10, 3)), rng.standard_normal(10))
    S = SmootherSet.from_dataset(ds)
    T = S.take([2, 0, 2])
    assert T.p == 3 and T.n == 10
    np.testing.assert_array_equal(T[0], S[2])
    np.testing.assert_array_equal(T[2], S[2])
    np.testing.assert_array_equal(T.bandwidths, S.bandwidths[[2, 0, 2]])


def test_system_cache_is_bounded():
    rng = np.random.default_rng(3)
    ds = Dataset(rng.uniform(size=(6, 4)), rng.standard_normal(6))
    S = SmootherSet.from_dataset(ds, max_cached=2)
    built = []
    factory = lambda mats: built.append(len(mats)) or object()
    a = S.cached_system((0, 1), factory)
    assert S.cached_system((0, 1), factory) is a
    S.cached_system((2,), factory)
    S.cached_system((3,), factory)
    assert S.cached_system((0, 1), factory) is not a  # evicted
    assert built == [2, 1, 1, 2]
