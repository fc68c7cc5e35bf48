"""End-to-end fair conformal intervals, and the plain conformalized quantile
regression baseline.

The core functions work on prediction arrays, so any quantile regressor can
feed them; :func:`cfqp_intervals` and :func:`cqr_baseline` wrap a fitted
:class:`~fairconformal.quantile.QuantilePair`.
"""
from dataclasses import dataclass

import numpy as np

from .conformal import (
    calibrate,
    calibrate_asymmetric,
    predict_interval,
    predict_interval_asymmetric,
)
from .fair import JitterConfig, Smoothing, default_sigma, fit_transformer


@dataclass(frozen=True, eq=False)
class QuantilePredictions:
    """Raw lower/upper quantile predictions for a set of points."""

    lower: np.ndarray
    upper: np.ndarray
    groups: np.ndarray

    @classmethod
    def from_pair(cls, pair, data, indices=None):
        if indices is None:
            indices = np.arange(len(data))
        X, g = data.X[indices], data.groups[indices]
        lo, hi = pair.predict(X, g)
        return cls(lo, hi, np.asarray(g, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class ConformalResult:
    """Intervals for the test points plus everything needed to audit them.

    ``test_lower``/``test_upper`` are the band endpoints before the conformal
    margin (fair quantiles for the fair method, raw ones otherwise).
    """

    intervals: object
    test_lower: np.ndarray
    test_upper: np.ndarray
    calibration: object
    cal_lower: np.ndarray
    cal_upper: np.ndarray
    transformers: tuple = ()
    test_ranks: tuple = ()


def _calibrate(cal_lo, cal_hi, cal_y, alpha, asymmetric):
    if asymmetric is None:
        return calibrate(cal_lo, cal_hi, cal_y, alpha)
    return calibrate_asymmetric(cal_lo, cal_hi, cal_y, *asymmetric)


def _intervals(lo, hi, cal):
    if cal.mode == "symmetric":
        return predict_interval(lo, hi, cal)
    return predict_interval_asymmetric(lo, hi, cal)


def conformalize(cal, cal_y, test, alpha, asymmetric=None):
    """Conformalized quantile regression on raw predictions.

    Parameters
    ----------
    cal, test : QuantilePredictions
    cal_y : array
        Calibration responses.
    alpha : float
        Miscoverage level.
    asymmetric : (alpha_lo, alpha_hi), optional
        Calibrate the two tails separately at these levels.
    """
    calib = _calibrate(cal.lower, cal.upper, cal_y, alpha, asymmetric)
    return ConformalResult(
        _intervals(test.lower, test.upper, calib),
        np.asarray(test.lower, dtype=np.float64), np.asarray(test.upper, dtype=np.float64),
        calib, np.asarray(cal.lower, dtype=np.float64), np.asarray(cal.upper, dtype=np.float64),
    )


def fair_conformalize(train, cal, cal_y, test, n_groups, alpha, smoothing=None, sigma=0.0,
                      seed=None, asymmetric=None, levels=(None, None)):
    """Fair conformal intervals from raw predictions.

    Both quantile levels are synchronized onto their barycenters (calibration
    points through the calibration CDFs, test points through the randomized
    training CDFs), then the fair band is conformalized on the calibration set.

    Parameters
    ----------
    train, cal, test : QuantilePredictions
        Raw predictions on the proper training, calibration and test points.
    cal_y : array
    n_groups : int
    alpha : float
    smoothing : Smoothing, optional
    sigma : float
        Jitter half-width.
    seed : int or SeedSequence, optional
        Root of four independent streams: fit/test jitter for each level.
    asymmetric : (alpha_lo, alpha_hi), optional
    levels : (float, float)
        Quantile levels recorded on the transformers.
    """
    smoothing = smoothing or Smoothing()
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    # explicit spawn keys: SeedSequence.spawn() would mutate a caller-owned root
    streams = [np.random.default_rng(np.random.SeedSequence(root.entropy,
                                                            spawn_key=root.spawn_key + (k,)))
               for k in range(4)]
    jit = JitterConfig(sigma)
    tfs, cal_fair, test_fair, ranks = [], [], [], []
    for k, (tr, ca, te) in enumerate(((train.lower, cal.lower, test.lower),
                                      (train.upper, cal.upper, test.upper))):
        tf = fit_transformer(ca, cal.groups, tr, train.groups, n_groups, levels[k],
                             jit, smoothing, rng=streams[k])
        tfs.append(tf)
        cal_fair.append(tf.synchronize_calibration())
        fair, r = tf.synchronize_test(te, test.groups, streams[2 + k], return_ranks=True)
        test_fair.append(np.atleast_1d(fair))
        ranks.append(r)
    calib = _calibrate(cal_fair[0], cal_fair[1], cal_y, alpha, asymmetric)
    return ConformalResult(
        _intervals(test_fair[0], test_fair[1], calib), test_fair[0], test_fair[1], calib,
        cal_fair[0], cal_fair[1], tuple(tfs), tuple(ranks),
    )


def cqr_baseline(pair, data, splits, alpha, test, asymmetric=None):
    """Conformalized quantile regression with a fitted pair.

    ``splits.calibration`` indexes ``data``; ``test`` is a Dataset of new
    points.
    """
    cal = QuantilePredictions.from_pair(pair, data, splits.calibration)
    return conformalize(cal, data.y[splits.calibration], QuantilePredictions.from_pair(pair, test),
                        alpha, asymmetric)


def cfqp_intervals(pair, data, splits, alpha, test, smoothing=None, sigma=None, seed=None,
                   asymmetric=None):
    """Fair conformal intervals with a fitted pair.

    ``sigma=None`` uses :func:`~fairconformal.fair.default_sigma` on the
    proper-training responses.
    """
    if sigma is None:
        sigma = default_sigma(data.y[splits.train])
    return fair_conformalize(
        QuantilePredictions.from_pair(pair, data, splits.train),
        QuantilePredictions.from_pair(pair, data, splits.calibration),
        data.y[splits.calibration],
        QuantilePredictions.from_pair(pair, test),
        data.n_groups, alpha, smoothing, sigma, seed, asymmetric, pair.levels,
    )
