import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ibshell.io import (
    SnapshotFormatError,
    file_checksum,
    read_snapshot,
    read_timeseries,
    write_snapshot,
    write_timeseries,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(arrays(float, (7, 9), elements=finite), st.floats(0, 10))
@settings(max_examples=25, deadline=None)
def test_snapshot_round_trip_exact(tmp_path_factory, data, t):
    path = tmp_path_factory.mktemp("s") / "snap.txt"
    write_snapshot(path, data[:, 0], data[:, 1], data[:, 2:5], data[:, 5:8], data[:, 8], t=t)
    s = read_snapshot(path)
    assert s["t"] == t and s["n"] == 7
    np.testing.assert_array_equal(s["X"], data[:, 2:5])
    np.testing.assert_array_equal(s["F"], data[:, 5:8])
    np.testing.assert_array_equal(s["H"], data[:, 8])


def test_snapshot_nan_curvature(tmp_path):
    path = write_snapshot(tmp_path / "a.txt", [0.0], [0.0], [[1, 0, 0]], [[0, 0, 0]], [np.nan])
    assert np.isnan(read_snapshot(path)["H"][0])


def test_snapshot_length_mismatch(tmp_path):
    with pytest.raises(ValueError):
        write_snapshot(tmp_path / "a.txt", [0, 1], [0], [[0, 0, 0]], [[0, 0, 0]], [0])


def test_snapshot_bad_files(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("1 2 3\n")
    with pytest.raises(SnapshotFormatError):
        read_snapshot(p)
    p.write_text("# n=2 t=0.0\n" + " ".join(["0"] * 9) + "\n")
    with pytest.raises(SnapshotFormatError):
        read_snapshot(p)
    p.write_text("# t=0.0\n")
    with pytest.raises(SnapshotFormatError):
        read_snapshot(p)


def test_timeseries_round_trip(tmp_path):
    t = [0.0, 0.5, 1.0]
    ser = {"a": [1.0, 2.0, 1 / 3], "b": [0.0, -1.0, 1e-300]}
    path = write_timeseries(tmp_path / "ts.csv", t, ser)
    back = read_timeseries(path)
    assert list(back) == ["t", "a", "b"]
    np.testing.assert_array_equal(back["a"], ser["a"])
    np.testing.assert_array_equal(back["b"], ser["b"])


def test_timeseries_validation(tmp_path):
    with pytest.raises(ValueError, match="increasing"):
        write_timeseries(tmp_path / "x.csv", [0, 0], {"a": [1, 2]})
    with pytest.raises(ValueError, match="values"):
        write_timeseries(tmp_path / "x.csv", [0, 1], {"a": [1]})


def test_checksum(tmp_path):
    p = tmp_path / "f"
    p.write_bytes(b"abc")
    assert file_checksum(p) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
