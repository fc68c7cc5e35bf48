"""(X, S, Y) triplets: containers, CSV ingestion, seeded splits, synthetic data."""
import csv
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np


class DatasetError(ValueError):
    """Base class for dataset construction and ingestion errors."""


class MissingFileError(DatasetError, FileNotFoundError):
    pass


class EmptyFileError(DatasetError):
    pass


class CsvParseError(DatasetError):
    def __init__(self, row, column, value, reason="not a finite number"):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r} ({reason})")


class ConstantGroupError(DatasetError):
    pass


class EmptyGroupError(DatasetError):
    def __init__(self, group):
        self.group = group
        super().__init__(f"empty group {group}")


class DegenerateSplitError(DatasetError):
    pass


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Observation:
    features: np.ndarray
    group: int
    response: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix, dense group labels and responses.

    Attributes
    ----------
    X : ndarray, shape (n, p)
    groups : ndarray of int, shape (n,)
        Labels in ``0 .. n_groups - 1``.
    y : ndarray, shape (n,)
    n_groups : int
    group_labels : tuple of str
        Original label of each dense group code (sidecar mapping).
    feature_names : tuple of str
    """

    X: np.ndarray
    groups: np.ndarray
    y: np.ndarray
    n_groups: int
    group_labels: tuple = ()
    feature_names: tuple = ()

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        groups = np.asarray(self.groups)
        y = np.asarray(self.y, dtype=np.float64)
        n = y.shape[0]
        if n == 0:
            raise DatasetError("dataset is empty")
        if X.shape[0] != n or groups.shape != (n,):
            raise DatasetError(
                f"inconsistent lengths: X {X.shape}, groups {groups.shape}, y {y.shape}"
            )
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise DatasetError("features and responses must be finite")
        if groups.dtype.kind not in "iu":
            if not np.all(np.equal(np.mod(groups, 1), 0)):
                raise DatasetError("group labels must be integers")
        groups = groups.astype(np.int64)
        if groups.min() < 0 or groups.max() >= self.n_groups:
            raise DatasetError(f"group labels must lie in [0, {self.n_groups - 1}]")
        object.__setattr__(self, "X", _frozen(X, np.float64))
        object.__setattr__(self, "groups", _frozen(groups, np.int64))
        object.__setattr__(self, "y", _frozen(y, np.float64))
        if not self.group_labels:
            object.__setattr__(self, "group_labels", tuple(str(k) for k in range(self.n_groups)))
        if not self.feature_names:
            object.__setattr__(
                self, "feature_names", tuple(f"x{j + 1}" for j in range(X.shape[1]))
            )

    def __len__(self):
        return self.y.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    def observation(self, i):
        return Observation(self.X[i], int(self.groups[i]), float(self.y[i]))

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.X[indices], self.groups[indices], self.y[indices], self.n_groups,
            self.group_labels, self.feature_names,
        )


@dataclass(frozen=True, eq=False)
class SplitIndices:
    train: np.ndarray
    calibration: np.ndarray


@dataclass(frozen=True, eq=False)
class GroupPartition:
    """Per-group index lists and empirical group proportions."""

    indices: tuple
    weights: np.ndarray
    counts: np.ndarray = field(default=None)


# --------------------------------------------------------------------- CSV


def _parse_float(text, row, column):
    try:
        value = float(text)
    except ValueError:
        raise CsvParseError(row, column, text) from None
    if not math.isfinite(value):
        raise CsvParseError(row, column, text)
    return value


def _label_order(labels):
    try:
        return sorted(labels, key=float)
    except ValueError:
        return sorted(labels)


def load_csv(path, features, group, response, delimiter=",", n_groups=None):
    """Read a dataset from a headed CSV file.

    Parameters
    ----------
    path : str or path-like
    features : sequence of str
        Feature column names, in the order they enter the feature matrix.
    group : str
        Sensitive-attribute column. Labels are re-encoded densely in sorted
        order (numeric sort when every label parses as a number); the original
        labels are kept in ``Dataset.group_labels``.
    response : str
    delimiter : str
    n_groups : int, optional
        Declared number of groups; checked against the data.
    """
    features = list(features)
    if not features:
        raise DatasetError("at least one feature column is required")
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise EmptyFileError(f"{path}: empty file (header row required)")
        header = [h.strip() for h in header]
        for name in features + [group, response]:
            if name not in header:
                raise DatasetError(f"{path}: column {name!r} not in header {header}")
        fcols = [header.index(name) for name in features]
        gcol = header.index(group)
        ycol = header.index(response)
        rows_X, rows_g, rows_y = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise CsvParseError(lineno, "*", delimiter.join(row),
                                    f"expected {len(header)} fields, got {len(row)}")
            rows_X.append([_parse_float(row[c].strip(), lineno, header[c]) for c in fcols])
            label = row[gcol].strip()
            if not label:
                raise CsvParseError(lineno, group, label, "missing group label")
            rows_g.append(label)
            rows_y.append(_parse_float(row[ycol].strip(), lineno, response))
    if not rows_y:
        raise EmptyFileError(f"{path}: no data rows")
    labels = _label_order(set(rows_g))
    if n_groups is not None and n_groups > 1 and len(labels) == 1:
        raise ConstantGroupError(
            f"{path}: column {group!r} is constant ({labels[0]!r}) but {n_groups} groups declared"
        )
    if n_groups is not None and len(labels) != n_groups:
        raise DatasetError(
            f"{path}: column {group!r} has {len(labels)} distinct labels, {n_groups} declared"
        )
    code = {label: k for k, label in enumerate(labels)}
    return Dataset(
        np.array(rows_X, dtype=np.float64).reshape(len(rows_y), len(features)),
        np.array([code[g] for g in rows_g], dtype=np.int64),
        np.array(rows_y),
        len(labels),
        tuple(labels),
        tuple(features),
    )


def write_csv(dataset, path, group="group", response="response", delimiter=","):
    """Write ``dataset`` so that :func:`load_csv` reads it back unchanged."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(list(dataset.feature_names) + [group, response])
        for i in range(len(dataset)):
            writer.writerow(
                [repr(float(v)) for v in dataset.X[i]]
                + [dataset.group_labels[dataset.groups[i]], repr(float(dataset.y[i]))]
            )


# ------------------------------------------------------------------ splits


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def split(dataset, calibration_fraction=0.5, seed=None, stratify=False):
    """Random partition into proper-training and calibration indices.

    ``|calibration| = round(calibration_fraction * n)``. With ``stratify=True``
    the rounding is done per group instead, so every group with at least two
    members lands on both sides.
    """
    n = dataset if isinstance(dataset, (int, np.integer)) else len(dataset)
    if not 0.0 < calibration_fraction < 1.0:
        raise DegenerateSplitError(f"calibration_fraction must be in (0, 1), got {calibration_fraction}")
    rng = np.random.default_rng(seed)
    if stratify:
        if isinstance(dataset, (int, np.integer)):
            raise DatasetError("stratified split needs a Dataset")
        cal = []
        for g in range(dataset.n_groups):
            members = np.flatnonzero(dataset.groups == g)
            k = _round_half_up(calibration_fraction * members.size)
            cal.append(rng.permutation(members)[:k])
        cal = np.sort(np.concatenate(cal))
        train = np.setdiff1d(np.arange(n), cal)
    else:
        k = _round_half_up(calibration_fraction * n)
        perm = rng.permutation(n)
        cal = np.sort(perm[:k])
        train = np.sort(perm[k:])
    if cal.size == 0 or train.size == 0:
        raise DegenerateSplitError(
            f"fraction {calibration_fraction} of n={n} leaves an empty side "
            f"(train {train.size}, calibration {cal.size})"
        )
    return SplitIndices(_frozen(train, np.int64), _frozen(cal, np.int64))


def partition_by_group(dataset, indices=None, min_group_size=10):
    """Split ``indices`` by group label, preserving their order.

    Raises :class:`EmptyGroupError` if some group has no member in
    ``indices``; warns when a group has fewer than ``min_group_size`` members.
    """
    if indices is None:
        indices = np.arange(len(dataset))
    indices = np.asarray(indices, dtype=np.int64)
    g = dataset.groups[indices]
    parts = []
    for s in range(dataset.n_groups):
        members = indices[g == s]
        if members.size == 0:
            raise EmptyGroupError(s)
        if members.size < min_group_size:
            warnings.warn(
                f"group {s} has only {members.size} members (< {min_group_size})",
                stacklevel=2,
            )
        parts.append(_frozen(members, np.int64))
    counts = np.array([p.size for p in parts], dtype=np.int64)
    return GroupPartition(tuple(parts), _frozen(counts / counts.sum(), np.float64),
                          _frozen(counts, np.int64))


# --------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class SyntheticScenario:
    """Linear model with a per-group location shift and noise scale.

    ``Y = X @ coef + shifts[S] + scales[S] * eps`` with ``X`` standard normal
    and ``eps`` standardized noise (``gaussian``, or centred ``lognormal`` for
    right skew). ``coef`` defaults to ``ones(p) / sqrt(p)``.
    """

    proportions: tuple = (0.5, 0.5)
    shifts: tuple = (0.0, 0.0)
    scales: tuple = (1.0, 1.0)
    n_features: int = 3
    noise: str = "gaussian"
    coef: tuple = None

    def validate(self):
        k = len(self.proportions)
        if k < 1:
            raise DatasetError("a scenario needs at least one group")
        if len(self.shifts) != k or len(self.scales) != k:
            raise DatasetError("proportions, shifts and scales must have the same length")
        if any(p < 0 for p in self.proportions) or abs(sum(self.proportions) - 1.0) > 1e-9:
            raise DatasetError(f"proportions must be non-negative and sum to 1, got {list(self.proportions)}")
        if any(not s > 0 for s in self.scales):
            raise DatasetError(f"scales must be positive, got {list(self.scales)}")
        if self.n_features < 1:
            raise DatasetError("n_features must be >= 1")
        if self.noise not in ("gaussian", "lognormal"):
            raise DatasetError(f"unknown noise family {self.noise!r}")
        if self.coef is not None and len(self.coef) != self.n_features:
            raise DatasetError("coef length must equal n_features")
        return self


SCENARIOS = {
    "identical": SyntheticScenario(),
    "shift": SyntheticScenario(shifts=(0.0, 3.0)),
    "heteroscedastic": SyntheticScenario(
        proportions=(0.6, 0.4), shifts=(0.0, 2.0), scales=(1.0, 2.0)
    ),
    "skewed": SyntheticScenario(shifts=(0.0, 3.0), noise="lognormal"),
}


def generate_synthetic(scenario, n, seed=None):
    """Draw ``n`` observations from ``scenario`` (a :class:`SyntheticScenario`
    or the name of a preset in :data:`SCENARIOS`)."""
    if isinstance(scenario, str):
        try:
            scenario = SCENARIOS[scenario]
        except KeyError:
            raise DatasetError(f"unknown scenario {scenario!r}; choose from {sorted(SCENARIOS)}") from None
    scenario.validate()
    if n < 1:
        raise DatasetError("n must be >= 1")
    rng = np.random.default_rng(seed)
    k = len(scenario.proportions)
    p = scenario.n_features
    groups = rng.choice(k, size=n, p=np.asarray(scenario.proportions, dtype=float))
    X = rng.standard_normal((n, p))
    z = rng.standard_normal(n)
    if scenario.noise == "lognormal":
        z = (np.exp(z) - math.exp(0.5)) / math.sqrt((math.e - 1.0) * math.e)
    coef = (np.full(p, 1.0 / math.sqrt(p)) if scenario.coef is None
            else np.asarray(scenario.coef, dtype=float))
    shifts = np.asarray(scenario.shifts, dtype=float)
    scales = np.asarray(scenario.scales, dtype=float)
    y = X @ coef + shifts[groups] + scales[groups] * z
    return Dataset(X, groups, y, k)
