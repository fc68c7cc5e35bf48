"""Fair conformal quantile prediction.

Quantile regression endpoints are mapped onto the Wasserstein barycenter of
their group-conditional distributions (demographic parity) and wrapped in
split-conformal intervals.
"""
from ._backend import BACKEND
from .conformal import (
    ConformalCalibration,
    PredictionIntervals,
    calibrate,
    calibrate_asymmetric,
    conformal_margin,
    conformity_scores,
    predict_interval,
    predict_interval_asymmetric,
)
from .dataset import (
    Dataset,
    generate_synthetic,
    load_csv,
    partition_by_group,
    split,
    write_csv,
)
from .fair import (
    EmpiricalCdf,
    FairTransformer,
    JitterConfig,
    Smoothing,
    fit_transformer,
    smooth_quantile_fn,
)
from .metrics import EvaluationReport, coverage, evaluate, ks_2samp, ks_unfairness, mean_length
from .pipeline import QuantilePredictions, cfqp_intervals, conformalize, cqr_baseline, fair_conformalize
from .quantile import LinearQuantileModel, QuantilePair, fit_linear_quantile, fit_pair, pinball_loss

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ConformalCalibration", "Dataset", "EmpiricalCdf", "EvaluationReport",
    "FairTransformer", "JitterConfig", "LinearQuantileModel", "PredictionIntervals",
    "QuantilePair", "QuantilePredictions", "Smoothing", "calibrate", "calibrate_asymmetric",
    "cfqp_intervals", "conformal_margin", "conformalize", "conformity_scores", "coverage",
    "cqr_baseline", "evaluate", "fair_conformalize", "fit_linear_quantile", "fit_pair",
    "fit_transformer", "generate_synthetic", "ks_2samp", "ks_unfairness", "load_csv",
    "mean_length", "partition_by_group", "pinball_loss", "predict_interval",
    "predict_interval_asymmetric", "smooth_quantile_fn", "split", "write_csv",
]
