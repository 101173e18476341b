import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from loadcluster import io
from loadcluster.errors import DataQualityError, ParseError, ValidationError

STAMPS = ["2017-01-01T00:00:00", "2017-01-01T01:00:00", "2017-01-01T02:00:00"]


def test_load_clean_csv(csv_writer):
    path = csv_writer(["timestamp", "A", "B"], [[t, i + 1, 10 * (i + 1)] for i, t in enumerate(STAMPS)])
    m = io.load_profiles(path)
    assert m.shape == (3, 2)
    assert m.area_ids == ("A", "B")
    assert not m.normalized
    assert m.summary.filled_cells == 0
    np.testing.assert_array_equal(m.values, [[1, 10], [2, 20], [3, 30]])
    assert m.timestamps[1] == np.datetime64("2017-01-01T01:00:00")


HOURS5 = STAMPS + ["2017-01-01T03:00:00", "2017-01-01T04:00:00"]


def test_interior_gap_is_interpolated(csv_writer):
    # five rows: one gap is 20% missing, at the limit
    a = [1, "", 5, 6, 7]
    path = csv_writer(["timestamp", "A", "B"], [[t, x, 10 * i] for i, (t, x) in enumerate(zip(HOURS5, a))])
    m = io.load_profiles(path)
    assert m.values[1, 0] == 3.0
    assert m.summary.filled_cells == 1
    assert m.summary.filled_per_area == {"A": 1, "B": 0}


def test_interpolation_uses_time_spacing(csv_writer):
    rows = [["2017-01-01T00:00:00", 0], ["2017-01-01T01:00:00", ""], ["2017-01-01T04:00:00", 8],
            ["2017-01-01T05:00:00", 9], ["2017-01-01T06:00:00", 9]]
    m = io.load_profiles(csv_writer(["timestamp", "A"], rows))
    assert m.values[1, 0] == 2.0


def test_edge_gaps_extend_nearest_value(csv_writer):
    stamps = [f"2017-01-01T{h:02d}:00:00" for h in range(10)]
    a = ["", 4, 5, 6, 7, 8, 9, 10, 11, ""]
    m = io.load_profiles(csv_writer(["timestamp", "A"], [[t, x] for t, x in zip(stamps, a)]))
    np.testing.assert_array_equal(m.values[:, 0], [4, 4, 5, 6, 7, 8, 9, 10, 11, 11])
    assert m.summary.filled_cells == 2


def test_too_many_missing_names_area(csv_writer):
    stamps = [f"2017-01-01T{h:02d}:00:00" for h in range(10)]
    a = ["", "", ""] + list(range(7))
    path = csv_writer(["timestamp", "A", "B"], [[t, x, 1.0 + h] for h, (t, x) in enumerate(zip(stamps, a))])
    with pytest.raises(DataQualityError, match="'A'") as info:
        io.load_profiles(path)
    assert info.value.area_id == "A"
    assert info.value.missing_fraction == pytest.approx(0.3)


def test_exactly_twenty_percent_missing_is_allowed(csv_writer):
    stamps = [f"2017-01-01T{h:02d}:00:00" for h in range(10)]
    a = ["", ""] + list(range(8))
    m = io.load_profiles(csv_writer(["timestamp", "A"], [[t, x] for t, x in zip(stamps, a)]))
    assert m.summary.filled_cells == 2


def test_ragged_row_reports_row(csv_writer):
    path = csv_writer(["timestamp", "A", "B"], [[STAMPS[0], 1, 2], [STAMPS[1], 1], [STAMPS[2], 1, 2]])
    with pytest.raises(ParseError, match="row 3"):
        io.load_profiles(path)


def test_duplicate_timestamps(csv_writer):
    path = csv_writer(["timestamp", "A"], [[STAMPS[0], 1], [STAMPS[0], 2], [STAMPS[1], 3]])
    with pytest.raises(ValidationError, match="duplicate"):
        io.load_profiles(path)


def test_unordered_timestamps(csv_writer):
    path = csv_writer(["timestamp", "A"], [[STAMPS[1], 1], [STAMPS[0], 2]])
    with pytest.raises(ValidationError):
        io.load_profiles(path)


def test_bad_number_and_timestamp(csv_writer):
    with pytest.raises(ParseError, match="not a number"):
        io.load_profiles(csv_writer(["timestamp", "A"], [[STAMPS[0], "abc"]]))
    with pytest.raises(ParseError, match="timestamp"):
        io.load_profiles(csv_writer(["timestamp", "A"], [["yesterday", 1]], name="b.csv"))


def test_schema_selects_and_renames(csv_writer):
    path = csv_writer(["timestamp", "x", "y"], [[t, 1, 2] for t in STAMPS])
    m = io.load_profiles(path, schema={"y": "north"})
    assert m.area_ids == ("north",)
    np.testing.assert_array_equal(m.values[:, 0], [2, 2, 2])
    with pytest.raises(ValidationError):
        io.load_profiles(path, schema={"z": "south"})


def _matrix(col):
    col = np.asarray(col, dtype=float)
    ts = np.datetime64("2017-01-01T00") + np.arange(col.size).astype("timedelta64[h]")
    return io.LoadMatrix(ts, col[:, None], ["A"])


@pytest.mark.parametrize(
    "raw, expected",
    [([2, 4, 6], [0, 0.5, 1]), ([-1, 0, 3], [0, 0.25, 1])],
)
def test_normalize_examples(raw, expected):
    m = io.normalize(_matrix(raw))
    assert m.normalized
    np.testing.assert_allclose(m.values[:, 0], expected, rtol=1e-12, atol=0)
    assert m.scalers == ((min(raw), max(raw)),)


def test_constant_column_maps_to_zero_with_warning():
    with pytest.warns(UserWarning, match="constant"):
        m = io.normalize(_matrix([5, 5, 5]))
    np.testing.assert_array_equal(m.values[:, 0], [0, 0, 0])


def test_normalize_twice_is_rejected():
    with pytest.raises(ValueError):
        io.normalize(io.normalize(_matrix([1, 2, 3])))


def test_loadmatrix_invariants():
    ts = np.datetime64("2017-01-01T00") + np.arange(3).astype("timedelta64[h]")
    with pytest.raises(ValueError):
        io.LoadMatrix(ts, np.zeros((3, 2)), ["A"])
    with pytest.raises(ValidationError):
        io.LoadMatrix(ts[::-1], np.zeros((3, 1)), ["A"])
    with pytest.raises(ValueError):
        io.LoadMatrix(ts, np.zeros((3, 1)), ["A"], normalized=True)


columns = arrays(
    np.float64, st.integers(2, 60),
    elements=st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False),
).filter(lambda c: c.max() > c.min())


@given(columns)
def test_normalized_range_is_exact(col):
    y = io.normalize(_matrix(col)).values[:, 0]
    assert y.min() == 0.0 and y.max() == 1.0
    assert np.all((y >= 0) & (y <= 1))


@given(columns)
def test_renormalizing_is_a_no_op(col):
    y = io.normalize(_matrix(col)).values[:, 0]
    again = io.normalize(_matrix(y)).values[:, 0]
    np.testing.assert_array_equal(again, y)


@given(columns)
def test_denormalize_round_trip(col):
    back = io.denormalize(io.normalize(_matrix(col))).values[:, 0]
    # relative to the column's magnitude; entries near zero carry absolute error only
    scale = np.abs(col).max()
    np.testing.assert_allclose(back, col, rtol=1e-12, atol=1e-12 * scale)


def test_write_and_reload_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    ts = np.datetime64("2017-03-01T00") + np.arange(5).astype("timedelta64[h]")
    m = io.LoadMatrix(ts, rng.normal(size=(5, 3)), ["a", "b", "c"])
    io.write_profiles(m, tmp_path / "m.csv")
    back = io.load_profiles(tmp_path / "m.csv")
    np.testing.assert_array_equal(back.values, m.values)
    np.testing.assert_array_equal(back.timestamps, m.timestamps)
    assert back.area_ids == m.area_ids
    assert not list(tmp_path.glob("*.tmp"))
