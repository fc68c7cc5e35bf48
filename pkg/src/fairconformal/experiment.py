"""Repeated split / fit / synchronize / conformalize / evaluate runs."""
import csv
import io
import json
import logging
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import _backend
from .config import ExperimentConfig
from .dataset import generate_synthetic, load_csv, split
from .fair import Smoothing, default_sigma
from .metrics import EvaluationReport, evaluate
from .pipeline import QuantilePredictions, conformalize, fair_conformalize
from .quantile import OptimizerSettings, fit_pair

log = logging.getLogger(__name__)

MAX_ABORT_FRACTION = 0.10


class ExperimentFailure(RuntimeError):
    """Too many repetitions aborted."""


def stage_seed(base_seed, repetition, tag):
    """Seed for one stage of one repetition.

    ``SeedSequence([base_seed, repetition, crc32(tag)])``: every (repetition,
    stage) pair gets an independent stream, so a stage can be replayed alone.
    """
    return np.random.SeedSequence([int(base_seed), int(repetition),
                                   zlib.crc32(tag.encode("utf-8"))])


def _load_source(config):
    if config.csv:
        return load_csv(config.csv, config.csv_features, config.csv_group,
                        config.csv_response, config.csv_delimiter)
    return None


def _repetition_data(config, r, source):
    if source is None:
        pool = generate_synthetic(config.scenario, config.n, stage_seed(config.seed, r, "data"))
        test = generate_synthetic(config.scenario, config.n_test,
                                  stage_seed(config.seed, r, "test_data"))
        return pool, test
    holdout = split(source, config.test_fraction, stage_seed(config.seed, r, "holdout"))
    return source.subset(holdout.train), source.subset(holdout.calibration)


def run_repetition(config, r, source=None):
    """One repetition; returns ``{method: EvaluationReport}`` in config order."""
    pool, test = _repetition_data(config, r, source)
    parts = split(pool, config.calibration_fraction, stage_seed(config.seed, r, "split"),
                  stratify=config.stratify)
    opts = OptimizerSettings(max_iter=config.max_iter, step=config.step_size)
    pair = fit_pair(pool, parts.train, config.alpha, opts, levels=config.levels)
    train = QuantilePredictions.from_pair(pair, pool, parts.train)
    cal = QuantilePredictions.from_pair(pair, pool, parts.calibration)
    tst = QuantilePredictions.from_pair(pair, test)
    cal_y = pool.y[parts.calibration]
    out = {}
    for method in config.methods:
        if method == "unfair":
            lo, hi, intervals = tst.lower, tst.upper, (tst.lower, tst.upper)
        elif method == "cqr":
            res = conformalize(cal, cal_y, tst, config.alpha, config.asymmetric)
            lo, hi, intervals = res.test_lower, res.test_upper, res.intervals
        else:
            sigma = default_sigma(pool.y[parts.train]) if config.sigma is None else config.sigma
            smoothing = Smoothing(config.smoothing, config.bandwidth, config.grid_size)
            res = fair_conformalize(train, cal, cal_y, tst, pool.n_groups, config.alpha,
                                    smoothing, sigma, stage_seed(config.seed, r, "fair"),
                                    config.asymmetric, pair.levels)
            lo, hi, intervals = res.test_lower, res.test_upper, res.intervals
        report = evaluate(test.y, test.groups, lo, hi, intervals, pool.n_groups)
        bounds = intervals if isinstance(intervals, tuple) else (intervals.lower, intervals.upper)
        report.extra["lower_coverage"] = float(np.mean(test.y >= bounds[0]))
        report.extra["upper_coverage"] = float(np.mean(test.y <= bounds[1]))
        out[method] = report
    return out


def _safe_repetition(args):
    config, r, source = args
    try:
        return r, run_repetition(config, r, source), None
    except Exception as exc:  # one bad repetition must not kill the run
        return r, None, f"{type(exc).__name__}: {exc}"


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    reports: dict          # method -> list of (seed, EvaluationReport), repetition order
    failures: list         # (repetition, message)
    summary: dict
    n_groups: int


def _stderr(x):
    x = np.asarray(x, dtype=np.float64)
    return float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def summarize_rows(header, rows):
    """Mean and standard error of every metric column of per-repetition rows."""
    cols = list(zip(*rows)) if rows else [[] for _ in header]
    out = {}
    for name, col in zip(header, cols):
        if name == "seed":
            continue
        col = np.asarray(col, dtype=np.float64)
        out[name] = {"mean": float(np.mean(col)) if col.size else math.nan,
                     "stderr": _stderr(col)}
    return out


def table_row(stats):
    """Format one method's summary like a results-table row."""
    def cell(name, scale=1.0, digits=2):
        s = stats[name]
        return f"{s['mean'] * scale:.{digits}f}±{s['stderr'] * scale:.{digits}f}"
    return (f"Coverage {cell('coverage', 100)} | Length {cell('mean_length', 1, 3)} | "
            f"KS(lo) {cell('ks_lo')} | KS(hi) {cell('ks_hi')} | "
            f"MAE(lo) {cell('mae_lo', 1, 3)} | MAE(hi) {cell('mae_hi', 1, 3)}")


def run_experiment(config, write=True):
    """Run all repetitions and (optionally) write the reports.

    Repetition ``r`` uses seed ``config.seed + r`` in the CSV and derives its
    stage streams with :func:`stage_seed`. Aborted repetitions are logged and
    counted; more than 10% aborted raises :class:`ExperimentFailure`.
    """
    source = _load_source(config)
    jobs = [(config, r, source) for r in range(config.repetitions)]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as ex:
            results = list(ex.map(_safe_repetition, jobs))
    else:
        results = [_safe_repetition(j) for j in jobs]

    n_groups = source.n_groups if source is not None else len(config.scenario.proportions)
    reports = {m: [] for m in config.methods}
    failures = []
    for r, rep, err in results:
        if err is not None:
            log.warning("repetition %d aborted: %s", r, err)
            failures.append((r, err))
            continue
        for m in config.methods:
            reports[m].append((config.seed + r, rep[m]))
    if len(failures) > MAX_ABORT_FRACTION * config.repetitions:
        raise ExperimentFailure(
            f"{len(failures)} of {config.repetitions} repetitions aborted; first: {failures[0][1]}"
        )

    header = EvaluationReport.csv_header(n_groups)
    summary = {
        "repetitions": config.repetitions,
        "completed": config.repetitions - len(failures),
        "aborted": len(failures),
        "backend": _backend.BACKEND,
        "config": _config_dict(config),
        "methods": {},
    }
    for m in config.methods:
        rows = [rep.csv_row(seed) for seed, rep in reports[m]]
        stats = summarize_rows(header, rows)
        summary["methods"][m] = {"metrics": stats, "table_row": table_row(stats)}
    result = ExperimentResult(config, reports, failures, summary, n_groups)
    if write:
        write_outputs(result)
    return result


def _config_dict(config):
    d = asdict(config)
    d["methods"] = list(config.methods)
    d["csv_features"] = list(config.csv_features)
    return d


def repetition_csv(result, method):
    """Per-repetition CSV text for one method (fixed column order)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EvaluationReport.csv_header(result.n_groups))
    for seed, rep in result.reports[method]:
        writer.writerow([v if isinstance(v, (int, np.integer)) else repr(float(v))
                         for v in rep.csv_row(seed)])
    return buf.getvalue()


def write_outputs(result):
    out = result.config.output_dir
    os.makedirs(out, exist_ok=True)
    paths = {"summary": os.path.join(out, "summary.json")}
    with open(paths["summary"], "w", encoding="utf-8") as fh:
        json.dump(result.summary, fh, indent=2, sort_keys=False)
        fh.write("\n")
    for m in result.config.methods:
        p = os.path.join(out, f"repetitions_{m}.csv")
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(repetition_csv(result, m))
        paths[m] = p
    return paths


def read_repetition_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return header, rows


# ------------------------------------------------------- imported predictions


def load_predictions_csv(path, delimiter=","):
    """Read externally produced quantile predictions.

    Columns: ``split`` (``train``, ``calibration`` or ``test``), ``group``,
    ``response``, ``q_lo``, ``q_hi``. Group labels are re-encoded densely as in
    :func:`~fairconformal.dataset.load_csv`. Returns ``(parts, n_groups,
    labels)`` where ``parts[split] = (QuantilePredictions, responses)``.
    """
    from .dataset import CsvParseError, DatasetError, _label_order, _parse_float, MissingFileError

    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        need = {"split", "group", "response", "q_lo", "q_hi"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise DatasetError(f"{path}: header must contain {sorted(need)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            sp = row["split"].strip()
            if sp not in ("train", "calibration", "test"):
                raise CsvParseError(lineno, "split", sp, "expected train/calibration/test")
            rows.append((sp, row["group"].strip(),
                         _parse_float(row["response"].strip(), lineno, "response"),
                         _parse_float(row["q_lo"].strip(), lineno, "q_lo"),
                         _parse_float(row["q_hi"].strip(), lineno, "q_hi")))
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    labels = _label_order({r[1] for r in rows})
    code = {lab: k for k, lab in enumerate(labels)}
    parts = {}
    for sp in ("train", "calibration", "test"):
        sel = [r for r in rows if r[0] == sp]
        if not sel:
            raise DatasetError(f"{path}: no rows with split={sp!r}")
        g = np.array([code[r[1]] for r in sel], dtype=np.int64)
        parts[sp] = (QuantilePredictions(np.array([r[3] for r in sel]),
                                         np.array([r[4] for r in sel]), g),
                     np.array([r[2] for r in sel]))
    return parts, len(labels), labels


def evaluate_predictions(parts, n_groups, alpha=0.1, methods=("cfqp", "cqr"), smoothing=None,
                         sigma=None, seed=0, asymmetric=None):
    """Post-process imported predictions with each method and evaluate on the test split."""
    train, y_train = parts["train"]
    cal, y_cal = parts["calibration"]
    test, y_test = parts["test"]
    out = {}
    for m in methods:
        if m == "unfair":
            lo, hi, iv = test.lower, test.upper, (test.lower, test.upper)
        elif m == "cqr":
            res = conformalize(cal, y_cal, test, alpha, asymmetric)
            lo, hi, iv = res.test_lower, res.test_upper, res.intervals
        elif m == "cfqp":
            s = default_sigma(y_train) if sigma is None else sigma
            res = fair_conformalize(train, cal, y_cal, test, n_groups, alpha, smoothing, s,
                                    seed, asymmetric)
            lo, hi, iv = res.test_lower, res.test_upper, res.intervals
        else:
            raise ValueError(f"unknown method {m!r}")
        out[m] = evaluate(y_test, test.groups, lo, hi, iv, n_groups)
    return out


__all__ = [
    "ExperimentFailure", "ExperimentResult", "evaluate_predictions",
    "load_predictions_csv", "read_repetition_csv", "repetition_csv", "run_experiment",
    "run_repetition", "stage_seed", "summarize_rows", "table_row", "write_outputs",
]
