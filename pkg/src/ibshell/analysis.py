"""Diagnostics computed from membrane states and recorded time series."""

from __future__ import annotations

import math

import numpy as np

from .geometry import curvature

__all__ = [
    "Trajectory",
    "analyze",
    "bleb_size",
    "center_of_mass",
    "cross_section",
    "fit_power_law",
    "force_error",
    "is_monotone",
    "radial_extremes",
    "richardson_order",
    "sign_changes",
    "face_sign_changes",
    "trailing_face_sign_changes",
]


class Trajectory:
    """Time series of scalar diagnostics plus optional snapshots.

    ``series[name]`` is a list aligned with ``t``.
    """

    def __init__(self, meta=None):
        self.t = []
        self.series = {}
        self.snapshots = []
        self.meta = dict(meta or {})
        self.summary = {}

    def record(self, t, **values):
        if self.t and not t > self.t[-1]:
            raise ValueError(f"time {t} does not increase past {self.t[-1]}")
        self.t.append(float(t))
        for k, v in values.items():
            self.series.setdefault(k, []).append(float(v))

    def array(self, name):
        return np.asarray(self.series[name])

    def __len__(self):
        return len(self.t)


def center_of_mass(X, w):
    w = np.asarray(w, dtype=float)
    return w @ np.asarray(X) / w.sum()


def radial_extremes(X, w):
    """Largest and smallest distance from the center of mass."""
    r = np.linalg.norm(np.asarray(X) - center_of_mass(X, w), axis=1)
    return float(r.max()), float(r.min())


def is_monotone(y, increasing=False, tol=0.0):
    d = np.diff(np.asarray(y, dtype=float))
    return bool(np.all(d >= -tol) if increasing else np.all(d <= tol))


def fit_power_law(x, y):
    """Exponent p of a least-squares fit ``y = C x**p`` in log space."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if len(x) < 2 or np.any(y <= 0):
        return math.nan
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def richardson_order(h, d):
    """Convergence order from three solutions on grids of spacing ``h``.

    Solves ``(d0 - d1) / (d1 - d2) = (h0**p - h1**p) / (h1**p - h2**p)``
    for p, which allows unequal refinement ratios.
    """
    h = np.asarray(h, dtype=float)
    d = np.asarray(d, dtype=float)
    if len(h) != 3:
        raise ValueError("three grids are required")
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (d[0] - d[1]) / (d[1] - d[2])
    if not np.isfinite(r) or r <= 0:
        return math.nan

    def g(p):
        return (h[0] ** p - h[1] ** p) / (h[1] ** p - h[2] ** p) - r

    lo, hi = 1e-3, 12.0
    if g(lo) * g(hi) > 0:
        return math.nan
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(lo) * g(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def force_error(F, F_exact):
    """Discrete l-infinity error ``max_i |F_i - F_exact_i|_inf``."""
    return float(np.abs(np.asarray(F) - np.asarray(F_exact)).max())


def sign_changes(values, deadband=0.0):
    """Number of sign changes in a sequence, ignoring ``|v| <= deadband``."""
    v = np.asarray(values, dtype=float)
    s = np.sign(v[np.abs(v) > deadband])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def cross_section(membrane, samples=400):
    """Material curve initially in the plane y = 0 (lam = 0 and lam = pi).

    Returns the parameter along the curve, positions and mean curvature.
    Samples are offset by half a step so that no node lies on a pole.
    """
    s = (np.arange(samples) + 0.5) * 2.0 * math.pi / samples
    front = s < math.pi
    lam = np.where(front, 0.0, math.pi)
    theta = np.where(front, s - 0.5 * math.pi, 1.5 * math.pi - s)
    jet = membrane.material_jet(lam, theta)
    return s, jet.X, curvature(jet).H


def face_sign_changes(membrane, face="trailing", samples=400, rim_fraction=0.7, deadband_fraction=0.02):
    """Sign changes of H across one face of the y = 0 cross-section.

    The trailing (leading) face is the part of the curve behind (ahead of)
    the center of mass in x, restricted to
    ``|z - z_c| < rim_fraction * max |z - z_c|`` to exclude the rim; values
    within ``deadband_fraction * max |H|`` are ignored.
    """
    if face not in ("trailing", "leading"):
        raise ValueError(f"face must be 'trailing' or 'leading', got {face!r}")
    s, X, H = cross_section(membrane, samples)
    com = membrane.center_of_mass()
    dz = np.abs(X[:, 2] - com[2])
    behind = X[:, 0] < com[0]
    sel = (behind if face == "trailing" else ~behind) & (dz < rim_fraction * dz.max())
    if sel.sum() < 3:
        return 0
    # order along the curve from one rim to the other
    idx = np.flatnonzero(sel)
    order = np.argsort(X[idx, 2])
    Hs = H[idx][order]
    return sign_changes(Hs, deadband_fraction * np.abs(H).max())


def trailing_face_sign_changes(membrane, **kw):
    """``face_sign_changes`` on the trailing face."""
    return face_sign_changes(membrane, "trailing", **kw)


def bleb_size(membrane, angle, ring_samples=64, cap_samples=24):
    """Height of the highest membrane point above the bleb-ring midpoint.

    The ring is the material circle at polar angle ``angle`` from +z; its
    midpoint is the mean of the ring points. The highest point is searched
    over the material cap inside the ring.
    """
    lam = -math.pi + 2 * math.pi * np.arange(ring_samples) / ring_samples
    ring = membrane.material_points(lam, np.full(ring_samples, 0.5 * math.pi - angle))
    mid = ring.mean(axis=0)
    phis = angle * np.arange(cap_samples) / cap_samples
    L, P = np.meshgrid(lam, phis, indexing="ij")
    cap = membrane.material_points(L.ravel(), 0.5 * math.pi - P.ravel())
    return float(cap[:, 2].max() - mid[2])


def analyze(traj):
    """Summary statistics of a recorded trajectory."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    out = {"t_final": traj.t[-1], "steps_recorded": len(traj)}
    ser = traj.series
    if "volume" in ser:
        v = traj.array("volume")
        out["volume_drift"] = float(np.abs(v - v[0]).max() / v[0])
    if "area" in ser:
        a = traj.array("area")
        out["area_drift"] = float(np.abs(a - a[0]).max() / a[0])
    if "r_max" in ser:
        r = traj.array("r_max")
        out["r_max_final"] = float(r[-1])
        out["r_max_monotone"] = is_monotone(r, tol=1e-12)
    if "d_max" in ser:
        out["d_max_final"] = float(traj.array("d_max")[-1])
    if "bleb_size" in ser:
        b = traj.array("bleb_size")
        out["bleb_size_final"] = float(b[-1])
    if "max_speed" in ser:
        out["max_speed_final"] = float(traj.array("max_speed")[-1])
    if "net_force" in ser:
        out["net_force_max"] = float(traj.array("net_force").max())
    out.update(traj.summary)
    return out
