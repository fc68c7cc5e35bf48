import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairconformal.dataset import (
    SCENARIOS,
    ConstantGroupError,
    CsvParseError,
    Dataset,
    DatasetError,
    DegenerateSplitError,
    EmptyFileError,
    EmptyGroupError,
    MissingFileError,
    SyntheticScenario,
    generate_synthetic,
    load_csv,
    partition_by_group,
    split,
    write_csv,
)


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


@pytest.mark.derived
def test_string_labels_reencoded(tmp_path):
    path = _write(tmp_path, "x,s,y\n1,b,0.5\n2,a,1.5\n3,a,2.5\n4,b,3.5\n")
    data = load_csv(path, ["x"], "s", "y")
    # hand re-encoding: sorted labels a -> 0, b -> 1
    assert data.group_labels == ("a", "b")
    assert data.groups.tolist() == [1, 0, 0, 1]
    assert data.y.tolist() == [0.5, 1.5, 2.5, 3.5]


def test_numeric_labels_sorted_numerically(tmp_path):
    path = _write(tmp_path, "x,s,y\n1,10,0\n2,2,1\n3,10,2\n")
    data = load_csv(path, ["x"], "s", "y")
    assert data.group_labels == ("2", "10")
    assert data.groups.tolist() == [1, 0, 1]


def test_delimiter(tmp_path):
    path = _write(tmp_path, "x;s;y\n1;0;2\n3;1;4\n")
    data = load_csv(path, ["x"], "s", "y", delimiter=";")
    assert data.X[:, 0].tolist() == [1.0, 3.0]


def test_parse_error_reports_line_and_column(tmp_path):
    path = _write(tmp_path, "x,s,y\n1,0,2\n1,1,abc\n")
    with pytest.raises(CsvParseError) as info:
        load_csv(path, ["x"], "s", "y")
    assert info.value.row == 3 and info.value.column == "y"


@pytest.mark.parametrize("bad", ["nan", "inf", ""])
def test_non_finite_values_rejected(tmp_path, bad):
    path = _write(tmp_path, f"x,s,y\n{bad},0,2\n1,1,3\n")
    with pytest.raises(CsvParseError):
        load_csv(path, ["x"], "s", "y")


def test_missing_and_empty_files(tmp_path):
    with pytest.raises(MissingFileError):
        load_csv(str(tmp_path / "nope.csv"), ["x"], "s", "y")
    with pytest.raises(EmptyFileError):
        load_csv(_write(tmp_path, ""), ["x"], "s", "y")
    with pytest.raises(EmptyFileError):
        load_csv(_write(tmp_path, "x,s,y\n", "h.csv"), ["x"], "s", "y")


def test_missing_column(tmp_path):
    with pytest.raises(DatasetError, match="not in header"):
        load_csv(_write(tmp_path, "x,s,y\n1,0,2\n"), ["z"], "s", "y")


def test_constant_group_with_declared_k(tmp_path):
    path = _write(tmp_path, "x,s,y\n1,0,2\n2,0,3\n")
    with pytest.raises(ConstantGroupError):
        load_csv(path, ["x"], "s", "y", n_groups=2)


def test_csv_round_trip_exact(tmp_path):
    data = generate_synthetic("heteroscedastic", 50, seed=3)
    path = str(tmp_path / "rt.csv")
    write_csv(data, path)
    back = load_csv(path, list(data.feature_names), "group", "response")
    np.testing.assert_array_equal(back.X, data.X)
    np.testing.assert_array_equal(back.y, data.y)
    np.testing.assert_array_equal(back.groups, data.groups)


def test_dataset_validation():
    with pytest.raises(DatasetError):
        Dataset(np.zeros((3, 1)), [0, 1], np.zeros(3), 2)
    with pytest.raises(DatasetError):
        Dataset(np.zeros((2, 1)), [0, 2], np.zeros(2), 2)
    with pytest.raises(DatasetError):
        Dataset(np.array([[np.nan], [0]]), [0, 1], np.zeros(2), 2)
    d = Dataset(np.zeros((2, 0)), [0, 1], [1.0, 2.0], 2)
    assert d.n_features == 0 and len(d) == 2
    with pytest.raises(ValueError):
        d.y[0] = 5.0


@pytest.mark.derived
def test_group_weights_direct_count():
    d = Dataset(np.zeros((4, 1)), [0, 0, 0, 1], np.arange(4.0), 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        part = partition_by_group(d)
    np.testing.assert_allclose(part.weights, [0.75, 0.25])
    assert [p.tolist() for p in part.indices] == [[0, 1, 2], [3]]


def test_partition_warns_and_raises():
    d = Dataset(np.zeros((4, 1)), [0, 0, 0, 0], np.arange(4.0), 2)
    with pytest.raises(EmptyGroupError, match="empty group 1"), pytest.warns(UserWarning):
        partition_by_group(d)
    d2 = Dataset(np.zeros((4, 1)), [0, 0, 1, 1], np.arange(4.0), 2)
    with pytest.warns(UserWarning):
        partition_by_group(d2, min_group_size=10)


def test_split_sizes_and_determinism():
    s1 = split(101, 0.5, seed=7)
    s2 = split(101, 0.5, seed=7)
    assert s1.calibration.size == 51 and s1.train.size == 50
    np.testing.assert_array_equal(s1.train, s2.train)
    assert sorted(np.concatenate([s1.train, s1.calibration]).tolist()) == list(range(101))
    with pytest.raises(DegenerateSplitError):
        split(1, 0.5, seed=0)


def test_stratified_split_keeps_group_shares():
    d = generate_synthetic(SyntheticScenario(proportions=(0.8, 0.2)), 1000, seed=0)
    s = split(d, 0.5, seed=1, stratify=True)
    share = lambda idx: np.mean(d.groups[idx] == 1)
    assert abs(share(s.train) - share(s.calibration)) < 0.01


@given(n=st.integers(2, 400), f=st.floats(0.05, 0.95), seed=st.integers(0, 2**31))
@settings(max_examples=60, deadline=None)
def test_split_is_a_partition(n, f, seed):
    try:
        s = split(n, f, seed=seed)
    except DegenerateSplitError:
        return
    both = np.concatenate([s.train, s.calibration])
    assert np.array_equal(np.sort(both), np.arange(n))
    assert s.calibration.size == int(np.floor(f * n + 0.5))


@pytest.mark.derived
def test_synthetic_shift_mean_difference():
    sc = SyntheticScenario(shifts=(0.0, 5.0), scales=(1.0, 1.0))
    d = generate_synthetic(sc, 5000, seed=2024)
    # independent oracle: the features have mean zero, so group means differ by the shift
    diff = d.y[d.groups == 1].mean() - d.y[d.groups == 0].mean()
    assert abs(diff - 5.0) < 0.1


def test_synthetic_reproducible_and_scenarios():
    a = generate_synthetic("shift", 100, seed=5)
    b = generate_synthetic("shift", 100, seed=5)
    np.testing.assert_array_equal(a.y, b.y)
    for name in SCENARIOS:
        d = generate_synthetic(name, 200, seed=0)
        assert d.n_groups == len(SCENARIOS[name].proportions)
    with pytest.raises(ValueError):
        SyntheticScenario(proportions=(0.5, 0.6)).validate()
