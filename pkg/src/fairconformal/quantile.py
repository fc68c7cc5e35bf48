"""Pinball-loss quantile regression.

The sensitive attribute enters the design as one-hot columns appended to the
features (reference level dropped, since the model carries an intercept).
"""
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _backend


def check_level(alpha, name="alpha"):
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"{name} must lie in the open interval (0, 1), got {alpha}")
    return alpha


def pinball_loss(y, q, level):
    """Check loss ``alpha * (y - q)`` if ``y >= q`` else ``(1 - alpha) * (q - y)``.

    Broadcasts over array inputs.
    """
    level = check_level(level, "level")
    y = np.asarray(y, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    out = np.where(y >= q, level * (y - q), (1.0 - level) * (q - y))
    return float(out) if out.ndim == 0 else out


def empirical_pinball_minimizer(values, level):
    """Smallest minimizer of the mean pinball loss: the ceil(level*n)-th order statistic."""
    values = np.sort(np.asarray(values, dtype=np.float64))
    k = min(max(int(math.ceil(level * values.size - 1e-9)), 1), values.size)
    return float(values[k - 1])


def group_design(X, groups, n_groups):
    """Append one-hot group columns (reference group 0 dropped) to ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    groups = np.asarray(groups, dtype=np.int64).reshape(-1)
    if groups.size and (groups.min() < 0 or groups.max() >= n_groups):
        raise ValueError(f"group labels must lie in [0, {n_groups - 1}]")
    dummies = (groups[:, None] == np.arange(1, n_groups)[None, :]).astype(np.float64)
    return np.hstack([X, dummies])


@dataclass(frozen=True)
class OptimizerSettings:
    """Averaged subgradient descent with step ``step / sqrt(t)``."""

    max_iter: int = 2000
    step: float = 1.0
    tol: float = 1e-8
    window: int = 50
    standardize: bool = True


@dataclass(frozen=True, eq=False)
class LinearQuantileModel:
    """Linear conditional-quantile predictor ``w @ standardize(x~) + b``.

    ``x~`` is the feature vector followed by the group one-hot columns;
    ``mean`` and ``scale`` are the fit-time standardization of ``x~``.
    """

    level: float
    weights: np.ndarray
    intercept: float
    n_groups: int = 1
    mean: np.ndarray = None
    scale: np.ndarray = None
    objective: float = math.nan
    n_iter: int = 0
    converged: bool = True
    dropped: tuple = field(default=())

    def __post_init__(self):
        check_level(self.level, "level")
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        d = w.size
        mean = np.zeros(d) if self.mean is None else np.array(self.mean, dtype=np.float64)
        scale = np.ones(d) if self.scale is None else np.array(self.scale, dtype=np.float64)
        if mean.shape != (d,) or scale.shape != (d,):
            raise ValueError("mean/scale must match the weight vector length")
        if d < self.n_groups - 1:
            raise ValueError("weight vector shorter than the group one-hot block")
        if not (np.all(np.isfinite(w)) and math.isfinite(self.intercept)
                and np.all(np.isfinite(mean)) and np.all(np.isfinite(scale))):
            raise ValueError("model parameters must be finite")
        for name, a in (("weights", w), ("mean", mean), ("scale", scale)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def n_features(self):
        return self.weights.size - (self.n_groups - 1)

    def predict(self, X, groups):
        """Predict the conditional quantile for each row of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = (X.reshape(-1, self.n_features) if self.n_features
                 else np.zeros((np.size(groups), 0)))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        Xt = group_design(X, groups, self.n_groups)
        return (Xt - self.mean) / self.scale @ self.weights + self.intercept

    def predict_one(self, x, s):
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.size != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.size}")
        return float(self.predict(x[None, :], [s])[0])

    def to_dict(self):
        return {
            "level": self.level,
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "n_groups": self.n_groups,
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "objective": self.objective,
            "n_iter": self.n_iter,
            "converged": self.converged,
            "dropped": list(self.dropped),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["dropped"] = tuple(d.get("dropped", ()))
        return cls(**d)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def fit_linear_quantile(data, indices=None, level=0.5, opts=None, seed=None):
    """Fit a linear quantile model by averaged subgradient descent.

    The averaged iterate is followed by an exact intercept step (the
    pinball-optimal intercept for fixed slopes is a residual quantile), and the
    result is never worse than the best constant predictor.

    Parameters
    ----------
    data : Dataset
    indices : array of int, optional
        Rows to fit on; all rows by default.
    level : float
        Quantile level in (0, 1).
    opts : OptimizerSettings, optional
    seed : optional
        Unused; the solver is deterministic. Kept so stochastic regressors can
        share the call signature.
    """
    level = check_level(level, "level")
    opts = opts or OptimizerSettings()
    if indices is None:
        indices = np.arange(len(data))
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ValueError("cannot fit on an empty index set")
    Xt = group_design(data.X[indices], data.groups[indices], data.n_groups)
    y = data.y[indices]
    n, d = Xt.shape

    mean = Xt.mean(axis=0) if d else np.zeros(0)
    spread = Xt.std(axis=0) if d else np.zeros(0)
    const = spread <= 1e-12 * np.maximum(1.0, np.abs(mean))
    dropped = tuple(int(j) for j in np.flatnonzero(const))
    if dropped:
        warnings.warn(f"dropping zero-variance design columns {list(dropped)}", stacklevel=2)
    if opts.standardize:
        scale = np.where(const, 1.0, spread)
    else:
        mean = np.zeros(d)
        scale = np.ones(d)
    active = ~const

    y_loc = float(np.median(y))
    y_scale = float(np.std(y))
    if not y_scale > 0:
        y_scale = 1.0
    Z = np.hstack([np.ones((n, 1)), ((Xt - mean) / scale)[:, active]])
    theta, n_iter, converged = _backend.subgradient_pinball(
        Z, (y - y_loc) / y_scale, level, int(opts.max_iter), float(opts.step),
        float(opts.tol), int(opts.window),
    )
    w = np.zeros(d)
    w[active] = theta[1:] * y_scale
    fitted = ((Xt - mean) / scale) @ w
    b = empirical_pinball_minimizer(y - fitted, level)
    obj = float(np.mean(pinball_loss(y, fitted + b, level)))

    b0 = empirical_pinball_minimizer(y, level)
    obj0 = float(np.mean(pinball_loss(y, b0, level)))
    if obj0 < obj:
        w, b, obj = np.zeros(d), b0, obj0
    return LinearQuantileModel(
        level, w, b, data.n_groups, mean, scale, obj, int(n_iter), bool(converged), dropped
    )


@dataclass(frozen=True, eq=False)
class QuantilePair:
    lower: object
    upper: object

    def __post_init__(self):
        if not self.lower.level < self.upper.level:
            raise ValueError(
                f"lower level {self.lower.level} must be below upper level {self.upper.level}"
            )

    @property
    def levels(self):
        return (self.lower.level, self.upper.level)

    def predict(self, X, groups):
        return self.lower.predict(X, groups), self.upper.predict(X, groups)

    def to_dict(self):
        return {"lower": self.lower.to_dict(), "upper": self.upper.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(LinearQuantileModel.from_dict(d["lower"]),
                   LinearQuantileModel.from_dict(d["upper"]))


def default_levels(alpha):
    alpha = check_level(alpha)
    return alpha / 2.0, 1.0 - alpha / 2.0


def fit_pair(data, indices=None, alpha=0.1, opts=None, seed=None, levels=None):
    """Fit lower/upper quantile models, at ``(alpha/2, 1 - alpha/2)`` unless
    ``levels`` overrides them."""
    lo, hi = default_levels(alpha) if levels is None else levels
    lo = check_level(lo, "lower level")
    hi = check_level(hi, "upper level")
    if not lo < hi:
        raise ValueError(f"lower level {lo} must be below upper level {hi}")
    return QuantilePair(
        fit_linear_quantile(data, indices, lo, opts, seed),
        fit_linear_quantile(data, indices, hi, opts, seed),
    )
