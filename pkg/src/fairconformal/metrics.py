"""Coverage, interval length, KS unfairness and MAE of quantile estimates."""
import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import _backend

CSV_COLUMNS = ("seed", "coverage", "mean_length", "ks_lo", "ks_hi", "mae_lo", "mae_hi",
               "crossing_count")


def _bounds(intervals):
    if hasattr(intervals, "lower"):
        return (np.asarray(intervals.lower, dtype=np.float64),
                np.asarray(intervals.upper, dtype=np.float64))
    lower, upper = intervals
    return np.asarray(lower, dtype=np.float64), np.asarray(upper, dtype=np.float64)


def covered(intervals, y):
    """Boolean mask of ``lower <= y <= upper`` (crossed intervals never cover)."""
    lower, upper = _bounds(intervals)
    y = np.asarray(y, dtype=np.float64)
    if lower.shape != y.shape:
        raise ValueError(f"length mismatch: {lower.size} intervals, {y.size} responses")
    return (lower <= y) & (y <= upper)


def coverage(intervals, y):
    return float(np.mean(covered(intervals, y)))


def mean_length(intervals):
    """Mean of ``upper - lower``, counting crossed (empty) intervals as 0."""
    lower, upper = _bounds(intervals)
    return float(np.mean(np.maximum(upper - lower, 0.0)))


def mae(predictions, y):
    predictions = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if predictions.shape != y.shape:
        raise ValueError(f"length mismatch: {predictions.size} vs {y.size}")
    if y.size == 0:
        raise ValueError("mae of empty vectors")
    return float(np.mean(np.abs(y - predictions)))


def ks_2samp(a, b):
    """Exact two-sample KS statistic ``sup_t |F_a(t) - F_b(t)|``."""
    a = np.sort(np.asarray(a, dtype=np.float64).reshape(-1))
    b = np.sort(np.asarray(b, dtype=np.float64).reshape(-1))
    if a.size == 0 or b.size == 0:
        raise ValueError("KS statistic needs two non-empty samples")
    return float(_backend.ks_sorted(a, b))


def ks_unfairness(values, groups, n_groups=None):
    """Largest pairwise KS distance between group-conditional samples.

    With ``n_groups`` every label in ``0 .. n_groups - 1`` must be present;
    otherwise the labels found in ``groups`` are compared.
    """
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    groups = np.asarray(groups).reshape(-1)
    if values.shape != groups.shape:
        raise ValueError("values and groups differ in length")
    labels = range(n_groups) if n_groups is not None else np.unique(groups)
    parts = []
    for s in labels:
        part = values[groups == s]
        if part.size == 0:
            raise ValueError(f"group {s} has no members")
        parts.append(part)
    if len(parts) < 2:
        raise ValueError("KS unfairness needs at least two groups")
    return max(ks_2samp(a, b) for a, b in itertools.combinations(parts, 2))


def ks_critical_value(n1, n2, level=0.01):
    """Asymptotic two-sample KS critical value at significance ``level``."""
    c = math.sqrt(-0.5 * math.log(level / 2.0))
    return c * math.sqrt((n1 + n2) / (n1 * n2))


def ks_2samp_pvalue(a, b):
    return float(stats.ks_2samp(a, b).pvalue)


def ks_uniform_pvalue(values):
    """p-value of the one-sample KS test against Uniform(0, 1)."""
    return float(stats.kstest(np.asarray(values, dtype=np.float64), "uniform").pvalue)


@dataclass(frozen=True)
class EvaluationReport:
    coverage: float
    mean_length: float
    ks_lo: float
    ks_hi: float
    mae_lo: float
    mae_hi: float
    crossing_count: int
    per_group_coverage: tuple
    n_test: int = 0
    empty_intervals: int = 0
    single_group: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["per_group_coverage"] = list(self.per_group_coverage)
        return d

    @staticmethod
    def csv_header(n_groups):
        return list(CSV_COLUMNS) + [f"coverage_g{k}" for k in range(n_groups)]

    def csv_row(self, seed):
        return [seed, self.coverage, self.mean_length, self.ks_lo, self.ks_hi, self.mae_lo,
                self.mae_hi, self.crossing_count, *self.per_group_coverage]


def evaluate(y, groups, lower_est, upper_est, intervals, n_groups):
    """Assemble all metrics for one test set.

    ``lower_est``/``upper_est`` are the quantile estimates (band endpoints
    before the conformal margin); ``intervals`` the final intervals. With a
    single group the KS fields are 0 and ``single_group`` is set.
    """
    y = np.asarray(y, dtype=np.float64)
    groups = np.asarray(groups, dtype=np.int64)
    lower_est = np.asarray(lower_est, dtype=np.float64)
    upper_est = np.asarray(upper_est, dtype=np.float64)
    n = y.size
    if not (groups.size == lower_est.size == upper_est.size == n == len(_bounds(intervals)[0])):
        raise ValueError("inconsistent lengths in evaluation inputs")
    hit = covered(intervals, y)
    per_group = tuple(float(np.mean(hit[groups == s])) if np.any(groups == s) else math.nan
                      for s in range(n_groups))
    single = n_groups < 2
    lower, upper = _bounds(intervals)
    return EvaluationReport(
        coverage=float(np.mean(hit)),
        mean_length=mean_length(intervals),
        ks_lo=0.0 if single else ks_unfairness(lower_est, groups, n_groups),
        ks_hi=0.0 if single else ks_unfairness(upper_est, groups, n_groups),
        mae_lo=mae(lower_est, y),
        mae_hi=mae(upper_est, y),
        crossing_count=int(np.sum(lower_est > upper_est)),
        per_group_coverage=per_group,
        n_test=n,
        empty_intervals=int(np.sum(lower > upper)),
        single_group=single,
    )
