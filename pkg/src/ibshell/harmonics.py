"""Real spherical harmonics, interpolation systems and surface jets.

The harmonics use latitude ``theta`` as the Legendre argument, ``sin theta``,
and are orthonormal on the unit sphere:

    Y_l^k = Pbar_l^k(sin theta) * sqrt(2) cos(k lam)      k > 0
    Y_l^0 = Pbar_l^0(sin theta)
    Y_l^k = Pbar_l^|k|(sin theta) * sqrt(2) sin(|k| lam)  k < 0

where ``Pbar`` are the associated Legendre functions normalized to
``1/(4 pi)`` mean square without the Condon-Shortley phase. Columns are
ordered (0,0), (1,0), (1,-1), (1,1), (2,0), (2,-1), (2,1), (2,-2), (2,2), ...
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "DegenerateBasisError",
    "HarmonicBasis",
    "JetEvaluator",
    "PoleError",
    "ShellInterpolant",
    "SurfaceJet",
    "build_basis",
    "column_index",
    "degree_order",
    "derivative_keys",
    "eval_harmonic",
    "eval_harmonic_jet",
    "evaluate_jet",
    "fit_interpolant",
    "fit_scalar_field",
    "harmonic_matrices",
    "legendre_table",
]

POLE_GUARD = 1e-8
COND_LIMIT = 1e12
_CHUNK = 512


class PoleError(ValueError):
    """Derivative evaluation requested too close to a pole."""


class DegenerateBasisError(ValueError):
    """The interpolation matrix is numerically singular."""


def column_index(l, k):
    """Column of Y_l^k in the interpolation matrix."""
    if abs(k) > l:
        raise ValueError(f"|k| = {abs(k)} exceeds l = {l}")
    if k == 0:
        return l * l
    return l * l + (2 * k if k > 0 else 2 * (-k) - 1)


def degree_order(M):
    """Arrays ``(l, k)`` listing the (M+1)**2 columns in matrix order."""
    ls, ks = [], []
    for l in range(M + 1):
        ls.append(l)
        ks.append(0)
        for a in range(1, l + 1):
            ls += [l, l]
            ks += [-a, a]
    return np.array(ls), np.array(ks)


def legendre_table(L, theta, derivs=0):
    """Normalized associated Legendre functions of ``sin theta``.

    Parameters
    ----------
    L : int
        Maximum degree.
    theta : ndarray, shape (n,)
        Latitudes.
    derivs : int
        Number of theta-derivatives to return.

    Returns
    -------
    list of ndarray
        ``derivs + 1`` arrays of shape (L+1, L+1, n), indexed ``[l, k]``
        with ``k >= 0``. Entries with ``k > l`` are zero.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    x = np.sin(theta)
    c = np.cos(theta)
    n = theta.size
    P = np.zeros((L + 1, L + 1, n))
    P[0, 0] = 1.0 / math.sqrt(4.0 * math.pi)
    for k in range(1, L + 1):
        P[k, k] = math.sqrt((2 * k + 1) / (2 * k)) * c * P[k - 1, k - 1]
    for k in range(L):
        P[k + 1, k] = math.sqrt(2 * k + 3) * x * P[k, k]
    for l in range(2, L + 1):
        k = np.arange(l - 1)
        a = np.sqrt((4.0 * l * l - 1.0) / (l * l - k * k))[:, None]
        b = np.sqrt(((l - 1.0) ** 2 - k * k) / (4.0 * (l - 1.0) ** 2 - 1.0))[:, None]
        P[l, : l - 1] = a * (x * P[l - 1, : l - 1] - b * P[l - 2, : l - 1])
    out = [P]
    cur = P
    for _ in range(derivs):
        cur = _dtheta(cur, L)
        out.append(cur)
    return out


def _dtheta(P, L):
    # d/dtheta = -d/dcolatitude; uses only neighbouring orders, no 1/cos
    l = np.arange(L + 1, dtype=float)[:, None]
    k = np.arange(L + 1, dtype=float)[None, :]
    up = np.sqrt(np.clip((l + k) * (l - k + 1), 0.0, None))
    dn = np.sqrt(np.clip((l + k + 1) * (l - k), 0.0, None))
    D = np.zeros_like(P)
    # k = 0
    if L >= 1:
        D[:, 0] = np.sqrt(l[:, 0] * (l[:, 0] + 1))[:, None] * P[:, 1]
        Pm = P[:, :-1]  # order k-1 for k = 1..L
        Pp = np.concatenate([P[:, 2:], np.zeros_like(P[:, :1])], axis=1)  # order k+1
        D[:, 1:] = -0.5 * (up[:, 1:, None] * Pm - dn[:, 1:, None] * Pp)
    return D


def _check_pole(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(np.abs(theta) > math.pi / 2 - POLE_GUARD):
        raise PoleError("derivatives are undefined within 1e-8 of a pole")


def derivative_keys(order):
    """Keys ``"l" * a + "t" * b`` for all partials with ``a + b <= order``.

    The value itself has key ``"v"``.
    """
    keys = ["v"]
    for total in range(1, order + 1):
        keys += ["l" * a + "t" * (total - a) for a in range(total, -1, -1)]
    return keys


def harmonic_matrices(M, lam, theta, derivs=0, chunk=_CHUNK):
    """Values and partial derivatives of all harmonics up to degree M.

    Parameters
    ----------
    M : int
        Maximum degree; the matrices have (M+1)**2 columns.
    lam, theta : ndarray, shape (n,)
    derivs : int
        Highest total derivative order; keys follow :func:`derivative_keys`
        (``"v"``; ``"l", "t"``; ``"ll", "lt", "tt"``; ...).

    Returns
    -------
    dict of ndarray, each shape (n, (M+1)**2)
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if derivs:
        _check_pole(theta)
    n = lam.size
    m = (M + 1) ** 2
    keys = derivative_keys(derivs)
    out = {key: np.empty((n, m)) for key in keys}
    ls, ks = degree_order(M)
    ak = np.abs(ks)
    scale = np.where(ks == 0, 1.0, math.sqrt(2.0))
    for s in range(0, n, chunk):
        sl = slice(s, min(s + chunk, n))
        tabs = [t[ls, ak].T for t in legendre_table(M, theta[sl], derivs=derivs)]
        e = np.exp(1j * np.outer(lam[sl], ak))
        # d^a/dlam^a of cos(k lam), sin(k lam) are Re, Im of (i k)^a e^{i k lam}
        trig = []
        for a in range(derivs + 1):
            z = (1j * ak) ** a * e
            trig.append(np.where(ks >= 0, z.real, z.imag) * scale)
        for key in keys:
            a = key.count("l")
            b = key.count("t")
            out[key][sl] = tabs[b] * trig[a]
    return out


def eval_harmonic(l, k, lam, theta):
    """Value of the real harmonic Y_l^k at (lam, theta)."""
    if l < 0 or abs(k) > l:
        raise ValueError(f"invalid harmonic index (l={l}, k={k})")
    lam_a = np.atleast_1d(np.asarray(lam, dtype=float))
    th_a = np.broadcast_to(np.asarray(theta, dtype=float), lam_a.shape).ravel()
    P = legendre_table(l, th_a)[0][l, abs(k)]
    lam_r = np.broadcast_to(lam_a, th_a.shape).ravel()
    if k > 0:
        val = math.sqrt(2) * P * np.cos(k * lam_r)
    elif k < 0:
        val = math.sqrt(2) * P * np.sin(-k * lam_r)
    else:
        val = P
    if np.ndim(lam) == 0 and np.ndim(theta) == 0:
        return float(val[0])
    return val.reshape(np.broadcast_shapes(np.shape(lam), np.shape(theta)))


def eval_harmonic_jet(l, k, lam, theta):
    """Value and the five partials (l, t, ll, lt, tt) of Y_l^k."""
    if l < 0 or abs(k) > l:
        raise ValueError(f"invalid harmonic index (l={l}, k={k})")
    _check_pole(theta)
    lam_a = np.atleast_1d(np.asarray(lam, dtype=float))
    th_a = np.atleast_1d(np.asarray(theta, dtype=float))
    lam_a, th_a = np.broadcast_arrays(lam_a, th_a)
    P, Pt, Ptt = (t[l, abs(k)] for t in legendre_table(l, th_a.ravel(), derivs=2))
    s = 1.0 if k == 0 else math.sqrt(2)
    a = abs(k)
    lr = lam_a.ravel()
    if k >= 0:
        f, df = np.cos(a * lr), -a * np.sin(a * lr)
    else:
        f, df = np.sin(a * lr), a * np.cos(a * lr)
    f, df = s * f, s * df
    res = (P * f, P * df, Pt * f, -(a * a) * P * f, Pt * df, Ptt * f)
    if np.ndim(lam) == 0 and np.ndim(theta) == 0:
        return tuple(float(r[0]) for r in res)
    return tuple(r.reshape(lam_a.shape) for r in res)


@dataclass(frozen=True)
class SurfaceJet:
    """Position and first/second partials of a surface map at n nodes.

    Every field has shape (n, 3). The mixed partial is stored once.
    """

    X: np.ndarray
    d_l: np.ndarray
    d_t: np.ndarray
    d_ll: np.ndarray
    d_lt: np.ndarray
    d_tt: np.ndarray

    @property
    def n(self):
        return len(self.X)

    def take(self, idx):
        return SurfaceJet(*(getattr(self, f)[idx] for f in _JET_FIELDS))

    def scaled(self, a):
        return SurfaceJet(*(a * getattr(self, f) for f in _JET_FIELDS))

    def translated(self, v):
        v = np.asarray(v, dtype=float)
        return SurfaceJet(self.X + v, self.d_l, self.d_t, self.d_ll, self.d_lt, self.d_tt)

    def rotated(self, Q):
        Q = np.asarray(Q, dtype=float)
        return SurfaceJet(*(getattr(self, f) @ Q.T for f in _JET_FIELDS))


_JET_FIELDS = ("X", "d_l", "d_t", "d_ll", "d_lt", "d_tt")


class HarmonicBasis:
    """Square interpolation system on (M+1)**2 nodes with a cached LU."""

    constructions = 0

    def __init__(self, points, M):
        m = (M + 1) ** 2
        if points.n != m:
            raise ValueError(f"degree {M} needs {m} nodes, got {points.n}")
        self.degree = M
        self.points = points
        self.matrix = harmonic_matrices(M, points.lam, points.theta)["v"]
        self.matrix.setflags(write=False)
        with warnings.catch_warnings():
            # singular matrices are reported through the condition check below
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            self.lu = scipy.linalg.lu_factor(self.matrix, check_finite=False)
        anorm = np.abs(self.matrix).sum(axis=0).max()
        rcond, info = scipy.linalg.lapack.dgecon(self.lu[0], anorm, norm="1")
        self.cond_estimate = math.inf if rcond == 0.0 else 1.0 / rcond
        if not self.cond_estimate <= COND_LIMIT:
            raise DegenerateBasisError(
                f"interpolation matrix condition estimate {self.cond_estimate:.3e}"
            )
        type(self).constructions += 1
        self._jet_cache = {}

    @property
    def m(self):
        return (self.degree + 1) ** 2

    def solve(self, rhs):
        return scipy.linalg.lu_solve(self.lu, rhs, check_finite=False)

    def evaluator(self, lam, theta, key=None, order=2):
        """Derivative matrices at fixed nodes, cached under ``key`` if given."""
        if key is not None:
            key = (key, order)
            if key in self._jet_cache:
                return self._jet_cache[key]
        ev = JetEvaluator(self.degree, lam, theta, order=order)
        if key is not None:
            self._jet_cache[key] = ev
        return ev


def build_basis(points, M):
    return HarmonicBasis(points, M)


class JetEvaluator:
    """Precomputed harmonic derivative matrices at a fixed node set.

    Evaluating an interpolant then costs one (n, m) x (m, 3) product per
    partial. ``order`` is the highest derivative order kept (at least 2).
    """

    def __init__(self, M, lam, theta, order=2):
        self.degree = M
        self.order = max(2, int(order))
        self.lam = np.asarray(lam, dtype=float)
        self.theta = np.asarray(theta, dtype=float)
        self.mats = harmonic_matrices(M, self.lam, self.theta, derivs=self.order)

    @property
    def n(self):
        return self.lam.size

    def jet(self, coeffs):
        mt = self.mats
        return SurfaceJet(*(mt[k] @ coeffs for k in ("v", "l", "t", "ll", "lt", "tt")))

    def partials(self, coeffs):
        """All partials up to ``order`` as a dict keyed like the matrices."""
        return {k: M @ coeffs for k, M in self.mats.items()}

    def values(self, coeffs):
        return self.mats["v"] @ coeffs

    def first(self, coeffs):
        mt = self.mats
        return mt["v"] @ coeffs, mt["l"] @ coeffs, mt["t"] @ coeffs


@dataclass(frozen=True)
class ShellInterpolant:
    """Coefficients of the three Cartesian component maps, shape (m, 3)."""

    basis: HarmonicBasis
    coeffs: np.ndarray

    @property
    def cx(self):
        return self.coeffs[:, 0]

    @property
    def cy(self):
        return self.coeffs[:, 1]

    @property
    def cz(self):
        return self.coeffs[:, 2]

    def positions(self, lam, theta):
        V = harmonic_matrices(self.basis.degree, lam, theta)["v"]
        return V @ self.coeffs


def fit_interpolant(basis, positions):
    positions = np.asarray(positions, dtype=float)
    if positions.shape != (basis.m, 3):
        raise ValueError(f"expected ({basis.m}, 3) positions, got {positions.shape}")
    return ShellInterpolant(basis, basis.solve(positions))


def fit_scalar_field(basis, samples):
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] != basis.m:
        raise ValueError(f"expected {basis.m} samples, got {samples.shape[0]}")
    return basis.solve(samples)


def evaluate_jet(interp, lam, theta):
    """Jet of an interpolant at arbitrary nodes (builds matrices on the fly)."""
    return JetEvaluator(interp.basis.degree, lam, theta).jet(interp.coeffs)

