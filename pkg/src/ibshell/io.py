"""Plain-text output: membrane snapshots and CSV time series."""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np

__all__ = [
    "SnapshotFormatError",
    "file_checksum",
    "read_snapshot",
    "read_timeseries",
    "write_snapshot",
    "write_timeseries",
]

SNAPSHOT_COLUMNS = ("lam", "theta", "x", "y", "z", "Fx", "Fy", "Fz", "H")


class SnapshotFormatError(ValueError):
    pass


def write_snapshot(path, lam, theta, X, F, H, t=0.0):
    """Write one node per line: lam, theta, x, y, z, Fx, Fy, Fz, H.

    The header line is ``# n=<count> t=<time> columns=...``. Values use 17
    significant digits so that rereading is bit-exact.
    """
    lam = np.asarray(lam, dtype=float).ravel()
    theta = np.asarray(theta, dtype=float).ravel()
    X = np.asarray(X, dtype=float).reshape(-1, 3)
    F = np.asarray(F, dtype=float).reshape(-1, 3)
    H = np.asarray(H, dtype=float).ravel()
    n = len(lam)
    if not (len(theta) == n and len(X) == n and len(F) == n and len(H) == n):
        raise ValueError("snapshot columns differ in length")
    data = np.column_stack([lam, theta, X, F, H])
    header = f"n={n} t={float(t)!r} columns={','.join(SNAPSHOT_COLUMNS)}"
    np.savetxt(path, data, fmt="%.17g", header=header, comments="# ")
    return Path(path)


def read_snapshot(path):
    """Read a snapshot; returns a dict with ``t``, ``n`` and one array per column."""
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise SnapshotFormatError(f"{path}: missing header line")
        fields = dict(tok.split("=", 1) for tok in first[1:].split() if "=" in tok)
        try:
            n = int(fields["n"])
            t = float(fields["t"])
        except (KeyError, ValueError):
            raise SnapshotFormatError(f"{path}: malformed header {first.strip()!r}") from None
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (n, len(SNAPSHOT_COLUMNS)) and not (n == 0 and data.size == 0):
        raise SnapshotFormatError(f"{path}: expected {n} rows of {len(SNAPSHOT_COLUMNS)} values, got {data.shape}")
    data = data.reshape(n, len(SNAPSHOT_COLUMNS))
    out = {"t": t, "n": n, "lam": data[:, 0], "theta": data[:, 1]}
    out["X"] = data[:, 2:5]
    out["F"] = data[:, 5:8]
    out["H"] = data[:, 8]
    return out


def write_timeseries(path, t, series):
    """CSV with a ``t`` column followed by one column per series.

    Parameters
    ----------
    t : sequence of float, strictly increasing
    series : dict of name -> sequence aligned with ``t``
    """
    t = np.asarray(t, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError("time column must be strictly increasing")
    names = list(series)
    cols = [np.asarray(series[k], dtype=float) for k in names]
    for k, c in zip(names, cols):
        if len(c) != len(t):
            raise ValueError(f"series {k!r} has {len(c)} values for {len(t)} times")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + names)
        for i in range(len(t)):
            w.writerow([f"{t[i]:.17g}"] + [f"{c[i]:.17g}" for c in cols])
    return Path(path)


def read_timeseries(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    names = rows[0]
    data = np.array(rows[1:], dtype=float).reshape(-1, len(names))
    return {k: data[:, i] for i, k in enumerate(names)}


def file_checksum(path):
    """SHA-256 hex digest of a file."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
