"""Differential geometry of parameterized surfaces.

All functions act on :class:`~ibshell.harmonics.SurfaceJet` objects holding
n nodes at once; 2x2 tensors are returned as arrays of shape (n, 2, 2).
The normal is ``X_lam x X_theta`` normalized, which points outward for the
standard spherical parameterization, so convex closed surfaces have H < 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .harmonics import harmonic_matrices

__all__ = [
    "CurvatureData",
    "DegenerateMetricError",
    "MetricPair",
    "curvature",
    "first_form",
    "laplacian_of_mean_curvature",
    "metric_pair",
    "surface_gradient",
    "surface_laplacian",
    "unit_normal",
]

DET_MIN = 1e-14


class DegenerateMetricError(ValueError):
    pass


def _dot(a, b):
    return np.einsum("ij,ij->i", a, b)


def first_form(jet):
    """Coefficients (E, F, G) of the first fundamental form."""
    return _dot(jet.d_l, jet.d_l), _dot(jet.d_l, jet.d_t), _dot(jet.d_t, jet.d_t)


def _tensor(E, F, G):
    return np.stack([np.stack([E, F], -1), np.stack([F, G], -1)], -2)


def _check_det(det, what):
    bad = np.flatnonzero(~(det > DET_MIN))
    if bad.size:
        raise DegenerateMetricError(f"{what} metric degenerate at node {bad[0]} (det={det[bad[0]]:.3e})")


@dataclass(frozen=True)
class MetricPair:
    """Current and reference metrics with the deformation invariants."""

    G: np.ndarray
    G0: np.ndarray
    C: np.ndarray
    I1: np.ndarray
    I2: np.ndarray

    @property
    def det_G(self):
        return np.linalg.det(self.G)

    @property
    def det_G0(self):
        return np.linalg.det(self.G0)


def metric_pair(jet_X, jet_Z):
    E, F, G = first_form(jet_X)
    E0, F0, G0 = first_form(jet_Z)
    g0 = E0 * G0 - F0 * F0
    _check_det(g0, "reference")
    g = E * G - F * F
    # C = G G0^{-1} with G0^{-1} = adj(G0)/g0
    Gm = _tensor(E, F, G)
    H = _tensor(G0, -F0, E0) / g0[:, None, None]
    C = Gm @ H
    I1 = (E * G0 - 2.0 * F * F0 + G * E0) / g0 - 2.0
    I2 = g / g0 - 1.0
    return MetricPair(G=Gm, G0=_tensor(E0, F0, G0), C=C, I1=I1, I2=I2)


def unit_normal(jet):
    c = np.cross(jet.d_l, jet.d_t)
    nrm = np.linalg.norm(c, axis=1)
    bad = np.flatnonzero(~(nrm > DET_MIN))
    if bad.size:
        raise DegenerateMetricError(f"degenerate tangents at node {bad[0]}")
    return c / nrm[:, None]


@dataclass(frozen=True)
class CurvatureData:
    n_hat: np.ndarray
    E: np.ndarray
    F: np.ndarray
    G1: np.ndarray
    e: np.ndarray
    f: np.ndarray
    g: np.ndarray
    H: np.ndarray
    R: np.ndarray


def curvature(jet):
    """Normal, fundamental forms, mean curvature H and scalar curvature R."""
    E, F, G1 = first_form(jet)
    det = E * G1 - F * F
    _check_det(det, "current")
    n = unit_normal(jet)
    e, f, g = _dot(jet.d_ll, n), _dot(jet.d_lt, n), _dot(jet.d_tt, n)
    H = (e * G1 - 2.0 * f * F + g * E) / (2.0 * det)
    R = 2.0 * (e * g - f * f) / det
    return CurvatureData(n_hat=n, E=E, F=F, G1=G1, e=e, f=f, g=g, H=H, R=R)


def surface_gradient(df_l, df_t, jet):
    """Cartesian surface gradient ``G^{ij} d_j f X_i`` from coordinate partials."""
    E, F, G = first_form(jet)
    det = E * G - F * F
    _check_det(det, "current")
    a = (G * df_l - F * df_t) / det
    b = (-F * df_l + E * df_t) / det
    return a[:, None] * jet.d_l + b[:, None] * jet.d_t


def surface_laplacian(field, jet, basis, points=None):
    """Laplace-Beltrami operator of a sampled scalar field.

    The field is expanded in the degree-M harmonic basis (interpolation on
    the basis nodes, least squares on any other node set) and the
    expansion is differentiated analytically:
    ``lap f = G^ij (f_ij - Gamma^k_ij f_k)`` with Christoffel symbols
    ``Gamma^k_ij = G^kl X_ij . X_l`` from the surface jets.

    Parameters
    ----------
    field : ndarray, shape (n,)
        Samples at ``points`` (default: the basis nodes).
    jet : SurfaceJet
        Surface jets at the same nodes.
    basis : HarmonicBasis
    points : SpherePointSet, optional
        Sample nodes; at least ``basis.m`` of them.
    """
    field = np.asarray(field, dtype=float)
    pts = basis.points if points is None else points
    if field.shape != (pts.n,) or jet.n != pts.n:
        raise ValueError("field, jets and nodes differ in length")
    mats = harmonic_matrices(basis.degree, pts.lam, pts.theta, derivs=2)
    if pts is basis.points:
        c = basis.solve(field)
    else:
        if pts.n < basis.m:
            raise ValueError(f"need at least {basis.m} samples, got {pts.n}")
        c = scipy.linalg.lstsq(mats["v"], field)[0]
    fl, ft = mats["l"] @ c, mats["t"] @ c
    fll, flt, ftt = mats["ll"] @ c, mats["lt"] @ c, mats["tt"] @ c
    E, F, G = first_form(jet)
    det = E * G - F * F
    _check_det(det, "current")
    Gi = np.stack([np.stack([G, -F], -1), np.stack([-F, E], -1)], -2) / det[:, None, None]
    T = (jet.d_l, jet.d_t)
    S = ((jet.d_ll, jet.d_lt), (jet.d_lt, jet.d_tt))
    df = (fl, ft)
    hess = ((fll, flt), (flt, ftt))
    out = np.zeros_like(field)
    for i in range(2):
        for j in range(2):
            # Gamma^k_ij f_k = G^kl (X_ij . X_l) f_k
            corr = sum(Gi[:, k, l] * _dot(S[i][j], T[l]) * df[k] for k in range(2) for l in range(2))
            out += Gi[:, i, j] * (hess[i][j] - corr)
    return out


class _Taylor2:
    """Value with first and second (lam, theta) partials.

    Arrays may carry trailing axes (e.g. Cartesian components); products
    follow the Leibniz rule truncated at second order.
    """

    __slots__ = ("v", "l", "t", "ll", "lt", "tt")

    def __init__(self, v, l, t, ll, lt, tt):
        self.v, self.l, self.t, self.ll, self.lt, self.tt = v, l, t, ll, lt, tt

    def _parts(self):
        return (self.v, self.l, self.t, self.ll, self.lt, self.tt)

    def __add__(self, o):
        return _Taylor2(*(a + b for a, b in zip(self._parts(), o._parts())))

    def __sub__(self, o):
        return _Taylor2(*(a - b for a, b in zip(self._parts(), o._parts())))

    def scale(self, c):
        return _Taylor2(*(c * a for a in self._parts()))

    def bilinear(self, o, op):
        a, b = self, o
        return _Taylor2(
            op(a.v, b.v),
            op(a.l, b.v) + op(a.v, b.l),
            op(a.t, b.v) + op(a.v, b.t),
            op(a.ll, b.v) + 2 * op(a.l, b.l) + op(a.v, b.ll),
            op(a.lt, b.v) + op(a.l, b.t) + op(a.t, b.l) + op(a.v, b.lt),
            op(a.tt, b.v) + 2 * op(a.t, b.t) + op(a.v, b.tt),
        )

    def __mul__(self, o):
        return self.bilinear(o, np.multiply)

    def dot(self, o):
        return self.bilinear(o, lambda x, y: np.einsum("ij,ij->i", x, y))

    def cross(self, o):
        return self.bilinear(o, np.cross)

    def times_vec(self, o):
        """Scalar jet times vector jet."""
        return self.bilinear(o, lambda x, y: x[:, None] * y)

    def apply(self, f, f1, f2):
        """Composition with a scalar function given f, f', f'' at ``v``."""
        return _Taylor2(
            f,
            f1 * self.l,
            f1 * self.t,
            f1 * self.ll + f2 * self.l * self.l,
            f1 * self.lt + f2 * self.l * self.t,
            f1 * self.tt + f2 * self.t * self.t,
        )

    def reciprocal(self):
        r = 1.0 / self.v
        return self.apply(r, -r * r, 2.0 * r * r * r)

    def sqrt(self):
        s = np.sqrt(self.v)
        return self.apply(s, 0.5 / s, -0.25 / (s * s * s))


def _shifted(D, key):
    """Jet of the partial ``key`` built from higher partials in ``D``."""

    def get(k):
        k = "".join(sorted(k))  # "l" sorts before "t"
        return D[k] if k else D["v"]

    return _Taylor2(get(key), get(key + "l"), get(key + "t"), get(key + "ll"), get(key + "lt"), get(key + "tt"))


def laplacian_of_mean_curvature(D):
    """Mean curvature and its exact surface Laplacian from 4th-order partials.

    Parameters
    ----------
    D : dict
        Partials of the surface map up to total order 4, keyed as in
        :func:`~ibshell.harmonics.derivative_keys`, each of shape (n, 3).

    Returns
    -------
    H : ndarray, shape (n,)
    lap_H : ndarray, shape (n,)
    """
    Xl, Xt = _shifted(D, "l"), _shifted(D, "t")
    Xll, Xlt, Xtt = _shifted(D, "ll"), _shifted(D, "lt"), _shifted(D, "tt")
    E, F, G = Xl.dot(Xl), Xl.dot(Xt), Xt.dot(Xt)
    det = E * G - F * F
    _check_det(det.v, "current")
    N = Xl.cross(Xt)
    inv_norm = N.dot(N).sqrt().reciprocal()
    e, f, g = Xll.dot(N) * inv_norm, Xlt.dot(N) * inv_norm, Xtt.dot(N) * inv_norm
    H = (e * G - (f * F).scale(2.0) + g * E) * det.reciprocal().scale(0.5)
    # lap H = G^ij H_ij + (1/sqrt g) d_i(sqrt g G^ij) H_j
    sg = det.v ** 0.5
    Gi11, Gi12, Gi22 = G.v / det.v, -F.v / det.v, E.v / det.v
    # d_i(sqrt g G^ij) = d_i of (G, -F, E) / sqrt(g)
    rs = det.sqrt().reciprocal()
    A11, A12, A22 = G * rs, F.scale(-1.0) * rs, E * rs
    div_l = A11.l + A12.t
    div_t = A12.l + A22.t
    lap = Gi11 * H.ll + 2.0 * Gi12 * H.lt + Gi22 * H.tt + (div_l * H.l + div_t * H.t) / sg
    return H.v, lap
