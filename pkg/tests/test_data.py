import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frailtyfit.data import (ClusteredSurvivalData, DataError, Subject, build_risk_sets, from_subjects,
                            load_csv, write_csv)


def _write(tmp_path, text):
    path = tmp_path / "d.csv"
    path.write_text(text)
    return path


def test_load_small_file(tmp_path):
    path = _write(tmp_path, "cluster,time,status,x1\na,1.0,1,0.5\na,2.0,0,1.5\nb,3.0,1,-1\nb,0.5,1,2\n")
    data = load_csv(path)
    assert (data.n, data.g, data.p) == (4, 2, 1)
    np.testing.assert_array_equal(data.cluster, [0, 0, 1, 1])
    np.testing.assert_array_equal(data.events_per_cluster, [1, 2])


def test_labels_reindexed_by_first_appearance(tmp_path):
    path = _write(tmp_path, "cluster,time,status,x1\n7,1,1,0\n3,2,1,0\n7,3,0,0\n")
    data = load_csv(path)
    np.testing.assert_array_equal(data.cluster, [0, 1, 0])
    assert data.labels == ("7", "3")


@pytest.mark.parametrize("body, message", [
    ("cluster,time,status,x1\na,1,1,0\nb,2,1,0\na,3,2,0\n", "invalid status, row 3"),
    ("cluster,time,status,x1\na,1,1,0\nb,-2,1,0\n", "invalid time (must be > 0), row 2"),
    ("cluster,time,status,x1\na,0,1,0\nb,2,1,0\n", "invalid time (must be > 0), row 1"),
    ("cluster,time,status,x1\na,1,1,zz\nb,2,1,0\n", "non-numeric cell, row 1"),
    ("cluster,status,x1\na,1,0\n", "missing column 'time'"),
    ("cluster,time,status,x1\na,1,1,0\na,2,1,0\n", "fewer than 2 clusters, row 2"),
    ("cluster,time,status,x1\na,1,0,0\nb,2,0,0\n", "no events in data"),
])
def test_load_errors_name_the_row(tmp_path, body, message):
    with pytest.raises(DataError) as err:
        load_csv(_write(tmp_path, body))
    assert message in str(err.value)


def test_load_missing_file(tmp_path):
    with pytest.raises(DataError, match="file not found"):
        load_csv(tmp_path / "nope.csv")


def test_construction_invariants():
    with pytest.raises(DataError, match="at least 2 clusters"):
        ClusteredSurvivalData([1.0, 2.0], [1, 1], [[0.0], [1.0]], [0, 0])
    with pytest.raises(DataError, match="densely"):
        ClusteredSurvivalData([1.0, 2.0], [1, 1], [[0.0], [1.0]], [0, 2])
    data = ClusteredSurvivalData([1.0, 2.0], [1, 0], [[0.0], [1.0]], [0, 1])
    with pytest.raises(ValueError):
        data.time[0] = 5.0


def test_from_subjects_round_trip():
    subs = [Subject(1.0, 1, (0.5,), 4), Subject(2.0, 0, (1.0,), 9), Subject(0.3, 1, (2.0,), 4)]
    data = from_subjects(subs)
    np.testing.assert_array_equal(data.cluster, [0, 1, 0])
    assert [s.time for s in data.subjects()] == [1.0, 2.0, 0.3]


def _data(times, status):
    n = len(times)
    return ClusteredSurvivalData(times, status, np.zeros((n, 1)), np.arange(n) % 2)


def test_risk_sets_distinct_times():
    rs = build_risk_sets(_data([1.0, 2.0, 3.0], [1, 1, 1]))
    assert rs.r == 3
    np.testing.assert_array_equal(rs.sizes(), [3, 2, 1])
    np.testing.assert_array_equal(rs.deaths, [1, 1, 1])


def test_risk_sets_ties_collapse():
    rs = build_risk_sets(_data([1.0, 1.0, 2.0], [1, 1, 0]))
    assert rs.r == 1
    assert sorted(rs.risk_set(0)) == [0, 1, 2]
    np.testing.assert_array_equal(rs.deaths, [2])


def test_censored_before_event_excluded():
    rs = build_risk_sets(_data([1.0, 2.0], [0, 1]))
    assert rs.r == 1
    assert list(rs.risk_set(0)) == [1]


def test_censored_at_event_time_is_at_risk():
    rs = build_risk_sets(_data([1.0, 1.0, 2.0], [1, 0, 1]))
    assert sorted(rs.risk_set(0)) == [0, 1, 2]


datasets = st.integers(2, 40).flatmap(lambda n: st.tuples(
    st.lists(st.integers(1, 8), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
    st.lists(st.floats(-3, 3), min_size=n, max_size=n),
))


def _build(raw):
    t, s, x = raw
    s = list(s)
    s[0] = 1
    n = len(t)
    cluster = np.arange(n) % 2
    return ClusteredSurvivalData(np.array(t, float) / 2, np.array(s), np.array(x)[:, None], cluster)


@given(datasets)
def test_risk_set_properties(raw):
    data = _build(raw)
    rs = build_risk_sets(data)
    assert rs.deaths.sum() == data.status.sum()
    assert np.all(rs.deaths >= 1)
    assert np.all(np.diff(rs.event_times) > 0)
    for v in range(rs.r):
        members = set(rs.risk_set(v).tolist())
        assert members == set(np.flatnonzero(data.time >= rs.event_times[v]).tolist())
        if v + 1 < rs.r:
            assert set(rs.risk_set(v + 1).tolist()) <= members


@given(datasets)
def test_csv_round_trip(tmp_path_factory, raw):
    data = _build(raw)
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    write_csv(data, path)
    back = load_csv(path)
    np.testing.assert_array_equal(back.time, data.time)
    np.testing.assert_array_equal(back.status, data.status)
    np.testing.assert_array_equal(back.X, data.X)
    np.testing.assert_array_equal(back.cluster, data.cluster)
