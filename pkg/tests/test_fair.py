import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fairconformal.dataset import EmptyGroupError
from fairconformal.fair import (
    EmpiricalCdf,
    FairTransformer,
    JitterConfig,
    Smoothing,
    default_sigma,
    fit_transformer,
    jitter,
    location_statistic,
    smooth_quantile_fn,
)

from oracles import ecdf, generalized_inverse

EMP = Smoothing("empirical")


@pytest.mark.derived
def test_ecdf_direct_count():
    assert EmpiricalCdf([1, 2, 3])(2) == pytest.approx(ecdf([1, 2, 3], 2)) == pytest.approx(2 / 3)


@pytest.mark.derived
def test_generalized_inverse_first_order_statistic():
    cdf = EmpiricalCdf([10, 20, 30])
    assert cdf.quantile(1 / 3) == generalized_inverse([10, 20, 30], 1 / 3) == 10


def test_quantile_level_range():
    cdf = EmpiricalCdf([1.0, 2.0])
    for t in (0.0, -0.1, 1.1):
        with pytest.raises(ValueError):
            cdf.quantile(t)
    assert cdf.quantile(1.0) == 2.0
    with pytest.raises(ValueError):
        EmpiricalCdf([])


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=30), st.floats(0.001, 1.0))
@settings(max_examples=80, deadline=None)
def test_quantile_matches_scan_oracle(values, t):
    assert EmpiricalCdf(values).quantile(t) == generalized_inverse(values, t)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=30, unique=True))
@settings(max_examples=50, deadline=None)
def test_quantile_inverts_cdf_on_sample(values):
    cdf = EmpiricalCdf(values)
    for v in values:
        assert cdf.quantile(cdf(v)) == v


def test_jitter_range_and_zero_sigma():
    v = np.arange(100.0)
    assert np.array_equal(jitter(v, JitterConfig(0.0)), v)
    out = jitter(v, JitterConfig(0.01, seed=1))
    assert np.all(np.abs(out - v) <= 0.01) and not np.array_equal(out, v)
    np.testing.assert_array_equal(out, jitter(v, JitterConfig(0.01, seed=1)))
    with pytest.raises(ValueError):
        JitterConfig(-1.0)
    assert default_sigma([0, 1, 2, 3, 4]) == pytest.approx(2e-6)
    assert default_sigma([5, 5, 5]) == pytest.approx(1e-6)


@pytest.mark.derived
def test_kernel_small_bandwidth_limit():
    cdf = EmpiricalCdf(np.arange(1, 101) / 100)
    q = smooth_quantile_fn(cdf, Smoothing("triangular", bandwidth=1e-4, inner_size=65536))
    # fine-grid quadrature oracle degenerates to the empirical quantile
    assert abs(q(0.5) - cdf.quantile(0.5)) <= 0.02


@pytest.mark.derived
def test_triangular_consistency_uniform():
    rng = np.random.default_rng(2023)
    q = smooth_quantile_fn(EmpiricalCdf(rng.uniform(size=1000)), Smoothing("triangular", 0.1))
    assert abs(q(0.5) - 0.5) <= 0.05


def _quadrature_oracle(sample, t, h):
    # triangular convolution of the empirical quantile on a very fine grid,
    # with the integrand point-reflected about its end values
    xs = np.sort(sample)
    n = xs.size
    v = np.linspace(t - h, t + h, 20001)

    def finv(w):
        return xs[np.clip(np.ceil(w * n - 1e-9).astype(int), 1, n) - 1]

    f = np.where(v < 0, 2 * xs[0] - finv(-v), np.where(v > 1, 2 * xs[-1] - finv(2 - v),
                                                       finv(np.clip(v, 0, 1))))
    k = 1 - np.abs(v - t) / h
    return np.trapezoid(k * f, v) / np.trapezoid(k, v)


@pytest.mark.parametrize("t", [0.02, 0.3, 0.5, 0.97])
def test_kernel_grid_matches_quadrature(t):
    rng = np.random.default_rng(5)
    sample = rng.normal(size=300)
    q = smooth_quantile_fn(EmpiricalCdf(sample), Smoothing("triangular", 0.1, grid_size=4096,
                                                           inner_size=16384))
    assert q(t) == pytest.approx(_quadrature_oracle(sample, t, 0.1), abs=2e-3)


@pytest.mark.parametrize("method", ["triangular", "gaussian", "local_linear", "empirical"])
def test_smoothed_quantiles_monotone(method):
    rng = np.random.default_rng(8)
    q = smooth_quantile_fn(EmpiricalCdf(rng.exponential(size=500)), Smoothing(method))
    assert np.all(np.diff(q.values) >= 0)
    t = np.linspace(0.001, 0.999, 500)
    assert np.all(np.diff(q(t)) >= 0)


def test_local_linear_tracks_linear_quantile():
    u = (np.arange(2000) + 0.5) / 2000
    q = smooth_quantile_fn(EmpiricalCdf(3 * u + 1), Smoothing("local_linear", 0.05))
    assert q(0.5) == pytest.approx(2.5, abs=1e-3)
    assert q(0.01) == pytest.approx(1.03, abs=5e-3)


def _two_group(a, b, weights=None):
    preds = np.r_[a, b]
    groups = np.r_[np.zeros(len(a), int), np.ones(len(b), int)]
    return fit_transformer(preds, groups, preds, groups, 2, smoothing=EMP, weights=weights)


@pytest.mark.derived
def test_weights_from_calibration_counts():
    tf = fit_transformer(np.arange(100.0), np.r_[np.zeros(30, int), np.ones(70, int)],
                         np.arange(4.0), [0, 1, 0, 1], 2, smoothing=EMP)
    np.testing.assert_allclose(tf.weights, [30 / 100, 70 / 100])


@pytest.mark.derived
@pytest.mark.parametrize("x,expected", [(0.0, 5.0), (1.0, 6.0)])
def test_calibration_sync_hand_composition(x, expected):
    tf = _two_group([0.0, 1.0], [10.0, 11.0], weights=[0.5, 0.5])
    # hand composition: own-group CDF, then the oracle inverse of each group
    rank = ecdf([0.0, 1.0], x)
    oracle = 0.5 * generalized_inverse([0, 1], rank) + 0.5 * generalized_inverse([10, 11], rank)
    assert oracle == expected
    assert tf.synchronize_calibration(x, 0) == expected


@pytest.mark.derived
def test_location_statistic_no_ties():
    assert location_statistic(np.array([1.0, 2.0, 3.0]), 5.0, 0.5) == pytest.approx(3.5 / 4)


@pytest.mark.derived
def test_location_statistic_tie_branch():
    assert location_statistic(np.array([2.0]), 2.0, 1.0) == pytest.approx(1.0)
    assert location_statistic(np.array([2.0, 3.0]), 1.0, 0.0) == 0.0


@pytest.mark.derived
def test_test_sync_two_step_composition():
    train = np.array([1.0, 2.0, 3.0, 4.0])
    cal = np.array([10.0, 20.0, 30.0, 40.0])
    tf = fit_transformer(cal, np.zeros(4, int), train, np.zeros(4, int), 1, smoothing=EMP)
    # value between training points: rank (2 + 0.5) / 5 = 0.5 -> 2nd calibration value
    assert tf.synchronize_test(2.5, 0, u=0.5) == generalized_inverse(cal, (2 + 0.5) / 5) == 20.0
    # value equal to a training point carries tie mass 1: (2 + 0.5 * 2) / 5 = 0.6 -> 3rd
    assert tf.synchronize_test(3.0, 0, u=0.5) == generalized_inverse(cal, (2 + 0.5 * 2) / 5) == 30.0


def test_boundary_ranks_are_clamped():
    tf = fit_transformer([0.0, 1.0], [0, 0], [2.0], [0], 1, smoothing=EMP)
    assert tf.synchronize_test(2.0, 0, u=1.0) == 1.0     # rank 1 -> just below 1
    assert tf.synchronize_test(-5.0, 0, u=0.0) == 0.0    # rank 0 -> just above 0
    assert np.isfinite(tf.synchronize_calibration(-10.0, 0))


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=40), st.floats(0, 1))
@settings(max_examples=40, deadline=None)
def test_sync_monotone_in_input(points, u):
    rng = np.random.default_rng(0)
    train = rng.normal(size=(30,))
    cal = rng.normal(size=(40,))
    g = np.r_[np.zeros(15, int), np.ones(15, int)]
    gc = np.r_[np.zeros(20, int), np.ones(20, int)]
    tf = fit_transformer(cal, gc, train, g, 2)
    x = np.sort(points)
    for s in (0, 1):
        out = tf.synchronize_test(x, np.full(x.size, s), u=np.full(x.size, u))
        assert np.all(np.diff(out) >= -1e-12)
        out = tf.synchronize_calibration(x, np.full(x.size, s))
        assert np.all(np.diff(out) >= -1e-12)


@pytest.mark.derived
def test_identical_groups_preserve_distribution():
    rng = np.random.default_rng(77)
    def draw(size):
        return rng.normal(size=size), rng.integers(0, 2, size)
    tr, gt = draw(20000)
    ca, gc = draw(20000)
    te, gte = draw(2000)
    tf = fit_transformer(ca, gc, tr, gt, 2, jitter_config=JitterConfig(1e-6),
                         rng=np.random.default_rng(1))
    out = tf.synchronize_test(te, gte, np.random.default_rng(2))
    assert stats.ks_2samp(out, te).pvalue > 0.01


def test_fair_outputs_group_independent():
    rng = np.random.default_rng(3)
    def draw(size):
        g = rng.integers(0, 2, size)
        return rng.normal(size=size) + 3 * g, g
    tr, gt = draw(3000)
    ca, gc = draw(3000)
    te, gte = draw(4000)
    tf = fit_transformer(ca, gc, tr, gt, 2)
    out = tf.synchronize_test(te, gte, np.random.default_rng(0))
    assert stats.ks_2samp(out[gte == 0], out[gte == 1]).pvalue > 0.01
    assert stats.ks_2samp(te[gte == 0], te[gte == 1]).pvalue < 1e-10


def test_location_statistic_uniform():
    # uniform marginally over the training draw: each point gets its own sample
    rng = np.random.default_rng(4)
    ranks = [location_statistic(np.sort(rng.normal(size=50)), rng.normal(), rng.uniform())
             for _ in range(3000)]
    assert stats.kstest(ranks, "uniform").pvalue > 0.01


def test_location_statistic_with_ties_uniform():
    rng = np.random.default_rng(5)
    ranks = [location_statistic(np.sort(rng.integers(0, 4, 20).astype(float)),
                                float(rng.integers(0, 4)), rng.uniform()) for _ in range(3000)]
    assert stats.kstest(ranks, "uniform").pvalue > 0.01


def test_errors():
    with pytest.raises(EmptyGroupError):
        fit_transformer([1.0, 2.0], [0, 0], [1.0], [0], 2)
    tf = fit_transformer([1.0, 2.0], [0, 0], [1.0], [0], 1)
    with pytest.raises(ValueError, match="unknown group"):
        tf.synchronize_test(1.0, 3, u=0.5)
    with pytest.raises(ValueError, match="unknown group"):
        tf.synchronize_calibration(1.0, -1)
    with pytest.raises(ValueError):
        fit_transformer([1.0, 2.0], [0, 1], [1.0, 2.0], [0, 1], 2, weights=[0.9, 0.9])
    with pytest.raises(ValueError):
        Smoothing("boxcar")


def test_transformer_json_round_trip():
    rng = np.random.default_rng(6)
    g = rng.integers(0, 2, 200)
    tf = fit_transformer(rng.normal(size=200), g, rng.normal(size=200), g, 2,
                         jitter_config=JitterConfig(1e-3), rng=np.random.default_rng(0))
    back = FairTransformer.from_json(tf.to_json())
    x = rng.normal(size=50)
    gg = rng.integers(0, 2, 50)
    np.testing.assert_array_equal(back.synchronize_test(x, gg, np.random.default_rng(1)),
                                  tf.synchronize_test(x, gg, np.random.default_rng(1)))
    np.testing.assert_array_equal(back.synchronize_calibration(), tf.synchronize_calibration())


def test_seeded_rng_determinism():
    g = np.r_[np.zeros(50, int), np.ones(50, int)]
    x = np.linspace(0, 1, 100)
    runs = [fit_transformer(x, g, x, g, 2, jitter_config=JitterConfig(0.01),
                            rng=np.random.default_rng(5)).synchronize_test(
                                x, g, np.random.default_rng(6)) for _ in range(2)]
    np.testing.assert_array_equal(*runs)
