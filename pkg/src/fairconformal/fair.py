"""Functional synchronization of quantile predictions onto their Wasserstein-2
barycenter across sensitive groups.

A raw quantile prediction of group ``s`` is mapped to its rank within the
group's prediction distribution, and the rank is sent through the weighted
average of all groups' (smoothed) quantile functions. In one dimension that
average is the quantile function of the barycenter, so the output distribution
no longer depends on the group.
"""
import json
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _backend
from .dataset import EmptyGroupError

log = logging.getLogger(__name__)

METHODS = ("empirical", "triangular", "gaussian", "local_linear")
_KERNEL_IDS = {"triangular": 0, "gaussian": 1}
MAX_DEFAULT_BANDWIDTH = 0.45


@dataclass(frozen=True)
class JitterConfig:
    """Uniform tie-breaking noise on ``[-sigma, sigma]``."""

    sigma: float = 0.0
    seed: object = None

    def __post_init__(self):
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")


def default_sigma(responses, factor=1e-6):
    """``factor`` times the interquartile range of ``responses`` (1 if that is 0)."""
    q75, q25 = np.percentile(np.asarray(responses, dtype=np.float64), [75, 25])
    iqr = q75 - q25
    return factor * (iqr if iqr > 0 else 1.0)


def jitter(values, config, rng=None):
    """Add i.i.d. ``U[-sigma, sigma]`` noise to ``values``.

    Draws from ``rng`` when given, otherwise from a generator seeded with
    ``config.seed``. ``sigma == 0`` returns an exact copy.
    """
    values = np.array(values, dtype=np.float64)
    if config.sigma == 0:
        return values
    if rng is None:
        rng = np.random.default_rng(config.seed)
    return values + rng.uniform(-config.sigma, config.sigma, size=values.shape)


class EmpiricalCdf:
    """Right-continuous step CDF of a finite sample."""

    def __init__(self, values):
        values = np.sort(np.asarray(values, dtype=np.float64).reshape(-1))
        if values.size == 0:
            raise ValueError("empirical CDF of an empty sample")
        if not np.all(np.isfinite(values)):
            raise ValueError("sample values must be finite")
        values.setflags(write=False)
        self.values = values

    @property
    def n(self):
        return self.values.size

    def evaluate(self, t):
        """Fraction of sample values ``<= t``."""
        out = np.searchsorted(self.values, t, side="right") / self.n
        return float(out) if np.ndim(out) == 0 else out

    __call__ = evaluate

    def quantile(self, t):
        """Generalized inverse: the ``ceil(t * n)``-th order statistic, ``t`` in (0, 1]."""
        t_arr = np.asarray(t, dtype=np.float64)
        if np.any(~(t_arr > 0)) or np.any(t_arr > 1):
            raise ValueError("quantile level must lie in (0, 1]")
        k = np.clip(np.ceil(t_arr * self.n - 1e-9).astype(np.int64), 1, self.n)
        out = self.values[k - 1]
        return float(out) if out.ndim == 0 else out


def _inverse_on(values, v):
    # F^-1(v) with F^-1(0) = F^-1(0+); v assumed in [0, 1]
    n = values.size
    k = np.clip(np.ceil(v * n - 1e-9).astype(np.int64), 1, n)
    return values[k - 1]


@dataclass(frozen=True)
class Smoothing:
    """How group quantile functions are estimated.

    ``method`` is ``"empirical"`` (no smoothing), ``"triangular"`` or
    ``"gaussian"`` (kernel convolution of the empirical quantile function), or
    ``"local_linear"``. ``bandwidth`` is the kernel bandwidth or the
    local-linear radius; ``None`` means ``N ** -0.25`` (capped at
    ``MAX_DEFAULT_BANDWIDTH``).
    """

    method: str = "triangular"
    bandwidth: float = None
    grid_size: int = 1024
    inner_size: int = 4096

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown smoothing method {self.method!r}; choose from {METHODS}")
        if self.grid_size < 16:
            raise ValueError("grid_size must be >= 16")
        if self.inner_size < 16:
            raise ValueError("inner_size must be >= 16")
        if self.bandwidth is not None and not 0 < self.bandwidth < 0.5:
            raise ValueError(f"bandwidth must lie in (0, 0.5), got {self.bandwidth}")

    def bandwidth_for(self, n):
        if self.bandwidth is not None:
            return float(self.bandwidth)
        return min(n ** -0.25, MAX_DEFAULT_BANDWIDTH)


def _kernel_grid(values, t, h, kernel, inner_size):
    # Integrand extended past [0, 1] by point reflection about the end values,
    # which keeps it monotone and removes the first-order boundary bias.
    dv = 1.0 / (inner_size - 1)
    support = h if kernel == "triangular" else min(4.0 * h, 1.0)
    pad = int(math.ceil(support / dv)) + 1
    j = np.arange(-pad, inner_size + pad)
    v = j * dv
    f = np.empty(v.size)
    mid = (v >= 0) & (v <= 1)
    f[mid] = _inverse_on(values, v[mid])
    low = v < 0
    high = v > 1
    f[low] = 2.0 * values[0] - _inverse_on(values, -v[low])
    f[high] = 2.0 * values[-1] - _inverse_on(values, 2.0 - v[high])
    return _backend.kernel_smooth(f, -pad * dv, dv, t, h, support, _KERNEL_IDS[kernel])


def _local_linear_grid(values, t, radius):
    n = values.size
    pos = (np.arange(n) + 0.5) / n
    out = np.empty(t.size)
    for i, ti in enumerate(t):
        lo = np.searchsorted(pos, ti - radius, side="left")
        hi = np.searchsorted(pos, ti + radius, side="right")
        v = pos[lo:hi]
        x = values[lo:hi]
        w = 1.0 - np.abs(v - ti) / radius
        keep = w > 0
        v, x, w = v[keep], x[keep], w[keep]
        if v.size < 2:
            out[i] = values[min(int(ti * n), n - 1)]
            continue
        sw = w.sum()
        vbar = (w @ v) / sw
        xbar = (w @ x) / sw
        dv = v - vbar
        sxx = w @ (dv * dv)
        slope = (w @ (dv * (x - xbar))) / sxx if sxx > 0 else 0.0
        out[i] = xbar + slope * (ti - vbar)
    return out


class SmoothedQuantileFn:
    """Quantile function of one group, tabulated on a grid of levels.

    Evaluation interpolates linearly between grid points (flat beyond the
    outermost ones). With ``method == "empirical"`` evaluation uses the exact
    order statistics instead, so ``Q(F(x)) == x`` on sample points.
    """

    def __init__(self, source, method, bandwidth, grid, values):
        self.source = source
        self.method = method
        self.bandwidth = bandwidth
        self.grid = np.asarray(grid, dtype=np.float64)
        self.values = np.asarray(values, dtype=np.float64)

    def __call__(self, t):
        if self.method == "empirical":
            return self.source.quantile(t)
        out = np.interp(t, self.grid, self.values)
        return float(out) if np.ndim(out) == 0 else out

    def mean(self):
        """Average of the tabulated values (midpoint rule over (0, 1))."""
        return float(np.mean(self.values))


def smooth_quantile_fn(cdf, smoothing=None):
    """Estimate a smoothed quantile function from the sample behind ``cdf``."""
    smoothing = smoothing or Smoothing()
    m = smoothing.grid_size
    t = (np.arange(m) + 0.5) / m
    values = cdf.values
    if smoothing.method == "empirical":
        return SmoothedQuantileFn(cdf, "empirical", None, t, cdf.quantile(t))
    h = smoothing.bandwidth_for(cdf.n)
    if not 0 < h < 0.5:
        raise ValueError(f"bandwidth must lie in (0, 0.5), got {h}")
    if smoothing.method == "local_linear":
        raw = _local_linear_grid(values, t, h)
    else:
        raw = _kernel_grid(values, t, h, smoothing.method, smoothing.inner_size)
    drops = raw[:-1] - raw[1:]
    if np.any(drops > 0):
        log.debug("monotone rearrangement: max violation %.3g", float(drops.max()))
    return SmoothedQuantileFn(cdf, smoothing.method, h, t, np.maximum.accumulate(raw))


def _clamp_rank(rank, n):
    rank = np.asarray(rank, dtype=np.float64)
    lo = 1.0 / (2.0 * n)
    return np.where(rank <= 0, lo, np.where(rank >= 1, 1.0 - lo, rank))


def location_statistic(sample, t, u):
    """Randomized rank of ``t`` within an ascending ``sample``.

    ``(#{sample < t} + u * (1 + #{sample == t})) / (len(sample) + 1)``; uniform
    on [0, 1] when ``t`` is exchangeable with the sample and ``u ~ U[0, 1]``.
    """
    sample = np.asarray(sample, dtype=np.float64)
    below = np.searchsorted(sample, t, side="left")
    ties = np.searchsorted(sample, t, side="right") - below
    return (below + np.asarray(u, dtype=np.float64) * (1.0 + ties)) / (sample.size + 1.0)


def _split_by_group(values, groups, n_groups, what):
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    groups = np.asarray(groups, dtype=np.int64).reshape(-1)
    if values.shape != groups.shape:
        raise ValueError(f"{what}: predictions and groups differ in length")
    if groups.size and (groups.min() < 0 or groups.max() >= n_groups):
        raise ValueError(f"{what}: group labels must lie in [0, {n_groups - 1}]")
    parts = []
    for s in range(n_groups):
        part = values[groups == s]
        if part.size == 0:
            raise EmptyGroupError(s)
        parts.append(part)
    return parts


class FairTransformer:
    """Fitted synchronization state for one quantile level.

    Attributes
    ----------
    level : float
    weights : ndarray, shape (K,)
        Group proportions in the calibration set.
    calibration_cdfs : tuple of EmpiricalCdf
        Jittered calibration predictions per group.
    quantile_fns : tuple of SmoothedQuantileFn
    training_samples : tuple of ndarray
        Sorted jittered training predictions per group.
    calibration_jittered, calibration_groups : ndarray
        Jittered calibration predictions in input order, and their groups.
    """

    def __init__(self, level, weights, calibration_cdfs, quantile_fns, training_samples,
                 jitter_config, smoothing, calibration_jittered=None, calibration_groups=None):
        self.level = level
        self.weights = np.asarray(weights, dtype=np.float64)
        self.calibration_cdfs = tuple(calibration_cdfs)
        self.quantile_fns = tuple(quantile_fns)
        self.training_samples = tuple(np.sort(np.asarray(s, dtype=np.float64))
                                      for s in training_samples)
        self.jitter_config = jitter_config
        self.smoothing = smoothing
        self.calibration_jittered = calibration_jittered
        self.calibration_groups = calibration_groups

    @property
    def n_groups(self):
        return self.weights.size

    def _check_groups(self, groups):
        groups = np.asarray(groups, dtype=np.int64)
        if groups.size and (groups.min() < 0 or groups.max() >= self.n_groups):
            bad = groups[(groups < 0) | (groups >= self.n_groups)]
            raise ValueError(f"unknown group label {int(np.ravel(bad)[0])}")
        return groups

    def barycenter_quantile(self, rank):
        """``sum_s p_s * Q_s(rank)`` for ranks in (0, 1)."""
        rank = np.asarray(rank, dtype=np.float64)
        out = np.zeros(rank.shape)
        for p, q in zip(self.weights, self.quantile_fns):
            out = out + p * np.asarray(q(rank))
        return out

    def calibration_rank(self, values, groups):
        """Own-group calibration CDF at (already jittered) ``values``, clamped."""
        values = np.asarray(values, dtype=np.float64)
        groups = self._check_groups(groups)
        values, groups = np.broadcast_arrays(values, groups)
        rank = np.empty(values.shape)
        for s, cdf in enumerate(self.calibration_cdfs):
            mask = groups == s
            if np.any(mask):
                rank[mask] = _clamp_rank(cdf.evaluate(values[mask]), cdf.n)
        return rank

    def synchronize_calibration(self, values=None, groups=None):
        """Fair values of jittered calibration predictions.

        Without arguments, synchronizes the calibration sample the transformer
        was fitted on, in its original order.
        """
        if values is None:
            values, groups = self.calibration_jittered, self.calibration_groups
        out = self.barycenter_quantile(self.calibration_rank(values, groups))
        return float(out) if out.ndim == 0 else out

    def location_statistic(self, values, groups, u):
        """Randomized training-set rank of jittered test predictions (unclamped)."""
        values = np.asarray(values, dtype=np.float64)
        groups = self._check_groups(groups)
        values, groups, u = np.broadcast_arrays(values, groups, np.asarray(u, dtype=np.float64))
        rank = np.empty(values.shape)
        for s, sample in enumerate(self.training_samples):
            mask = groups == s
            if np.any(mask):
                rank[mask] = location_statistic(sample, values[mask], u[mask])
        return rank

    def synchronize_test(self, raw, groups, rng=None, u=None, return_ranks=False):
        """Fair values of raw (un-jittered) test predictions.

        ``rng`` supplies the jitter (all points, then) and the tie-break
        uniforms ``u``; pass ``u`` explicitly to fix the latter.
        """
        raw = np.asarray(raw, dtype=np.float64)
        groups = self._check_groups(groups)
        if rng is None:
            rng = np.random.default_rng()
        noisy = jitter(raw, self.jitter_config, rng)
        if u is None:
            u = rng.random(raw.shape)
        ranks = self.location_statistic(noisy, groups, u)
        clamped = np.empty(ranks.shape)
        g = np.broadcast_to(groups, ranks.shape)
        for s, sample in enumerate(self.training_samples):
            mask = g == s
            clamped[mask] = _clamp_rank(ranks[mask], sample.size + 1)
        out = self.barycenter_quantile(clamped)
        if out.ndim == 0:
            out = float(out)
        return (out, ranks) if return_ranks else out

    def to_dict(self):
        return {
            "level": self.level,
            "weights": self.weights.tolist(),
            "jitter": {"sigma": self.jitter_config.sigma, "seed": self.jitter_config.seed},
            "smoothing": asdict(self.smoothing),
            "calibration_samples": [c.values.tolist() for c in self.calibration_cdfs],
            "training_samples": [s.tolist() for s in self.training_samples],
            "calibration_jittered": (None if self.calibration_jittered is None
                                     else np.asarray(self.calibration_jittered).tolist()),
            "calibration_groups": (None if self.calibration_groups is None
                                   else np.asarray(self.calibration_groups).tolist()),
            "quantile_fns": [
                {"method": q.method, "bandwidth": q.bandwidth,
                 "grid": q.grid.tolist(), "values": q.values.tolist()}
                for q in self.quantile_fns
            ],
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        cdfs = [EmpiricalCdf(v) for v in d["calibration_samples"]]
        fns = [SmoothedQuantileFn(c, q["method"], q["bandwidth"], q["grid"], q["values"])
               for c, q in zip(cdfs, d["quantile_fns"])]
        cal_jit, cal_groups = d.get("calibration_jittered"), d.get("calibration_groups")
        return cls(d["level"], d["weights"], cdfs, fns, d["training_samples"],
                   JitterConfig(**d["jitter"]), Smoothing(**d["smoothing"]),
                   None if cal_jit is None else np.asarray(cal_jit, dtype=np.float64),
                   None if cal_groups is None else np.asarray(cal_groups, dtype=np.int64))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def fit_transformer(cal_preds, cal_groups, train_preds, train_groups, n_groups, level=None,
                    jitter_config=None, smoothing=None, weights=None, rng=None):
    """Fit the synchronization state from raw calibration and training predictions.

    Jitter is drawn from ``rng`` (or a generator seeded with
    ``jitter_config.seed``): calibration predictions first, in input order,
    then training predictions. ``weights`` default to the calibration group
    proportions.
    """
    jitter_config = jitter_config or JitterConfig()
    smoothing = smoothing or Smoothing()
    if rng is None:
        rng = np.random.default_rng(jitter_config.seed)
    cal_groups = np.asarray(cal_groups, dtype=np.int64)
    cal_parts = _split_by_group(cal_preds, cal_groups, n_groups, "calibration")
    _split_by_group(train_preds, train_groups, n_groups, "training")  # validates groups
    cal_jit = jitter(cal_preds, jitter_config, rng)
    train_jit = jitter(train_preds, jitter_config, rng)
    train_groups = np.asarray(train_groups, dtype=np.int64)
    counts = np.array([p.size for p in cal_parts], dtype=np.float64)
    if weights is None:
        weights = counts / counts.sum()
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (n_groups,) or np.any(weights < 0) or abs(weights.sum() - 1) > 1e-12:
        raise ValueError("weights must be a non-negative vector of length K summing to 1")
    cdfs = [EmpiricalCdf(cal_jit[cal_groups == s]) for s in range(n_groups)]
    fns = [smooth_quantile_fn(c, smoothing) for c in cdfs]
    samples = [train_jit[train_groups == s] for s in range(n_groups)]
    return FairTransformer(level, weights, cdfs, fns, samples, jitter_config, smoothing,
                           cal_jit, cal_groups)
