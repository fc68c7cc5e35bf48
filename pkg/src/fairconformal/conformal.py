"""Split-conformal calibration of a plug-in quantile band."""
import math
from dataclasses import dataclass

import numpy as np

from .quantile import check_level


def _as_vectors(*arrays):
    out = [np.asarray(a, dtype=np.float64).reshape(-1) for a in arrays]
    n = out[0].size
    if any(a.size != n for a in out):
        raise ValueError(f"length mismatch: {[a.size for a in out]}")
    if n == 0:
        raise ValueError("need at least one calibration point")
    return out


def conformity_scores(lower, upper, y):
    """Sorted ``max(lower - y, y - upper)``; negative inside the band."""
    lower, upper, y = _as_vectors(lower, upper, y)
    return np.sort(np.maximum(lower - y, y - upper))


def conformal_index(n, alpha):
    """1-based order statistic used by the margin, ``ceil((1 - alpha)(1 + 1/n) n)``,
    clamped to ``[1, n]``."""
    level = (1.0 - alpha) * (1.0 + 1.0 / n)
    if level >= 1.0:
        return n
    return min(max(int(math.ceil(level * n - 1e-9)), 1), n)


def conformal_margin(scores, alpha):
    """The ``(1 - alpha)(1 + 1/n)``-th empirical quantile of ``scores``.

    Levels above 1 fall back to the largest score.
    """
    alpha = check_level(alpha)
    scores = np.sort(np.asarray(scores, dtype=np.float64).reshape(-1))
    if scores.size == 0:
        raise ValueError("cannot calibrate on an empty score set")
    return float(scores[conformal_index(scores.size, alpha) - 1])


@dataclass(frozen=True)
class ConformalCalibration:
    alpha: float
    margin_lo: float
    margin_hi: float
    mode: str = "symmetric"
    n: int = 0

    @property
    def margin(self):
        if self.mode != "symmetric":
            raise ValueError("asymmetric calibration has two margins")
        return self.margin_lo


@dataclass(frozen=True, eq=False)
class PredictionIntervals:
    """Closed intervals ``[lower, upper]``; ``lower > upper`` marks an empty one."""

    lower: np.ndarray
    upper: np.ndarray

    def __len__(self):
        return self.lower.size

    @property
    def crossed(self):
        return self.lower > self.upper

    def __getitem__(self, i):
        return float(self.lower[i]), float(self.upper[i])


def calibrate(lower, upper, y, alpha):
    """Symmetric calibration: one margin added to both ends."""
    alpha = check_level(alpha)
    scores = conformity_scores(lower, upper, y)
    m = conformal_margin(scores, alpha)
    return ConformalCalibration(alpha, m, m, "symmetric", scores.size)


def calibrate_asymmetric(lower, upper, y, alpha_lo, alpha_hi):
    """Separate margins for the two tails, at miscoverage ``alpha_lo`` below
    the band and ``alpha_hi`` above it."""
    alpha_lo = check_level(alpha_lo, "alpha_lo")
    alpha_hi = check_level(alpha_hi, "alpha_hi")
    lower, upper, y = _as_vectors(lower, upper, y)
    m_lo = conformal_margin(lower - y, alpha_lo)
    m_hi = conformal_margin(y - upper, alpha_hi)
    return ConformalCalibration(alpha_lo + alpha_hi, m_lo, m_hi, "asymmetric", y.size)


def predict_interval(lower, upper, cal):
    """``[lower - margin, upper + margin]`` for a symmetric calibration."""
    if cal.mode != "symmetric":
        raise ValueError(f"expected a symmetric calibration, got {cal.mode!r}")
    return _widen(lower, upper, cal.margin_lo, cal.margin_hi)


def predict_interval_asymmetric(lower, upper, cal):
    """``[lower - margin_lo, upper + margin_hi]`` for an asymmetric calibration."""
    if cal.mode != "asymmetric":
        raise ValueError(f"expected an asymmetric calibration, got {cal.mode!r}")
    return _widen(lower, upper, cal.margin_lo, cal.margin_hi)


def _widen(lower, upper, m_lo, m_hi):
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if lower.shape != upper.shape:
        raise ValueError("lower and upper predictions differ in shape")
    return PredictionIntervals(np.atleast_1d(lower - m_lo), np.atleast_1d(upper + m_hi))
