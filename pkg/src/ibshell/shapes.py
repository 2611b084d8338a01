"""Closed-form surface maps with analytic jets.

Every shape maps (lam, theta) on the unit sphere to R^3 and returns
positions and first/second partials as a :class:`SurfaceJet`.
"""

from __future__ import annotations

import functools
import math

import numpy as np

from .harmonics import SurfaceJet

__all__ = [
    "RBC_RADIUS",
    "Ellipsoid",
    "PerturbedEllipsoid",
    "RBCShape",
    "Sphere",
    "make_shape",
    "tensor_grid_measure",
]

RBC_RADIUS = 3.91


class _AxialShape:
    """Maps of the form (A(t) cos l, B(t) sin l, C(t)).

    Subclasses provide ``_profiles(theta)`` returning the three profile
    functions and their first two theta-derivatives.
    """

    def jet(self, lam, theta):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        (A, A1, A2), (B, B1, B2), (C, C1, C2) = self._profiles(theta)
        cl, sl = np.cos(lam), np.sin(lam)
        z = np.zeros_like(lam)
        X = np.stack([A * cl, B * sl, C], 1)
        d_l = np.stack([-A * sl, B * cl, z], 1)
        d_t = np.stack([A1 * cl, B1 * sl, C1], 1)
        d_ll = np.stack([-A * cl, -B * sl, z], 1)
        d_lt = np.stack([-A1 * sl, B1 * cl, z], 1)
        d_tt = np.stack([A2 * cl, B2 * sl, C2], 1)
        return SurfaceJet(X, d_l, d_t, d_ll, d_lt, d_tt)

    def positions(self, lam, theta):
        return self.jet(lam, theta).X

    @staticmethod
    def _times_cos(f, f1, f2, theta):
        c, s = np.cos(theta), np.sin(theta)
        return f * c, f1 * c - f * s, f2 * c - 2 * f1 * s - f * c

    @staticmethod
    def _times_sin(f, f1, f2, theta):
        c, s = np.cos(theta), np.sin(theta)
        return f * s, f1 * s + f * c, f2 * s + 2 * f1 * c - f * s


class Ellipsoid(_AxialShape):
    """(a cos l cos t, b sin l cos t, c sin t)."""

    def __init__(self, a=1.1, b=None, c=None):
        self.a = float(a)
        self.b = float(b) if b is not None else 1.0 / math.sqrt(self.a)
        self.c = float(c) if c is not None else 1.0 / math.sqrt(self.a)

    def _profiles(self, theta):
        z = np.zeros_like(theta)
        return (
            self._times_cos(self.a + z, z, z, theta),
            self._times_cos(self.b + z, z, z, theta),
            self._times_sin(self.c + z, z, z, theta),
        )

    def implicit_gradient(self, X):
        """Gradient of x^2/a^2 + y^2/b^2 + z^2/c^2 (outward normal direction)."""
        return 2 * X / np.array([self.a, self.b, self.c]) ** 2


class Sphere(Ellipsoid):
    def __init__(self, r=1.0):
        super().__init__(r, r, r)
        self.r = float(r)


class PerturbedEllipsoid(_AxialShape):
    """Ellipsoid with axes scaled by ``1 + B exp(-sin t)`` (``B/5`` on x).

    ``Vf`` defaults to the factor giving the enclosed volume 4 pi / 3.
    """

    def __init__(self, a=0.1, b=0.2, c=0.2, B=0.25, Vf=None):
        self.a, self.b, self.c, self.B = float(a), float(b), float(c), float(B)
        self.Vf = float(Vf) if Vf is not None else _unit_volume_factor(self.a, self.b, self.c, self.B)

    def _profiles(self, theta):
        s, c = np.sin(theta), np.cos(theta)
        E = np.exp(-s)
        E1 = -c * E
        E2 = (s + c * c) * E
        V, B = self.Vf, self.B
        ax = (V * self.a * (1 + B / 5 * E), V * self.a * B / 5 * E1, V * self.a * B / 5 * E2)
        by = (V * self.b * (1 + B * E), V * self.b * B * E1, V * self.b * B * E2)
        cz = (V * self.c * (1 + B * E), V * self.c * B * E1, V * self.c * B * E2)
        return self._times_cos(*ax, theta), self._times_cos(*by, theta), self._times_sin(*cz, theta)


@functools.lru_cache(maxsize=None)
def _unit_volume_factor(a, b, c, B):
    _, vol = tensor_grid_measure(PerturbedEllipsoid(a, b, c, B, Vf=1.0), 256, 128)
    return (4.0 * math.pi / 3.0 / vol) ** (1.0 / 3.0)


class RBCShape:
    """Biconcave reference map R (q(x_s), y_s, z_s) with
    q(s) = s (0.21 + 2 rho - 1.12 rho^2) / 2 and rho = 1 - s^2."""

    def __init__(self, R=RBC_RADIUS):
        self.R = float(R)

    @staticmethod
    def _q(s):
        rho = 1.0 - s * s
        q = 0.5 * s * (0.21 + 2 * rho - 1.12 * rho * rho)
        # q(s) = 0.5 (0.21 s + 2 s - 2 s^3 - 1.12 (s - 2 s^3 + s^5))
        q1 = 0.5 * (0.21 + 2 - 6 * s * s - 1.12 * (1 - 6 * s * s + 5 * s**4))
        q2 = 0.5 * (-12 * s - 1.12 * (-12 * s + 20 * s**3))
        return q, q1, q2

    def jet(self, lam, theta):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        cl, sl, ct, st = np.cos(lam), np.sin(lam), np.cos(theta), np.sin(theta)
        z = np.zeros_like(lam)
        xs = cl * ct
        xl, xt = -sl * ct, -cl * st
        xll, xlt, xtt = -cl * ct, sl * st, -cl * ct
        q, q1, q2 = self._q(xs)
        R = self.R
        X = R * np.stack([q, sl * ct, st], 1)
        d_l = R * np.stack([q1 * xl, cl * ct, z], 1)
        d_t = R * np.stack([q1 * xt, -sl * st, ct], 1)
        d_ll = R * np.stack([q2 * xl * xl + q1 * xll, -sl * ct, z], 1)
        d_lt = R * np.stack([q2 * xl * xt + q1 * xlt, -cl * st, z], 1)
        d_tt = R * np.stack([q2 * xt * xt + q1 * xtt, -sl * ct, -st], 1)
        return SurfaceJet(X, d_l, d_t, d_ll, d_lt, d_tt)

    def positions(self, lam, theta):
        return self.jet(lam, theta).X


def tensor_grid_measure(shape, n_lam=2000, n_theta=1000):
    """Surface area and enclosed volume by tensor-product quadrature.

    Uses the periodic trapezoid rule in lam and Gauss-Legendre in theta.
    """
    xg, wg = np.polynomial.legendre.leggauss(n_theta)
    th = 0.5 * math.pi * xg
    wt = 0.5 * math.pi * wg
    lam = -math.pi + 2 * math.pi * np.arange(n_lam) / n_lam
    area = 0.0
    vol = 0.0
    for t, w in zip(th, wt):
        J = shape.jet(lam, np.full(n_lam, t))
        cr = np.cross(J.d_l, J.d_t)
        area += w * np.linalg.norm(cr, axis=1).sum()
        vol += w * np.einsum("ij,ij->i", J.X, cr).sum()
    dl = 2 * math.pi / n_lam
    return area * dl, vol * dl / 3.0


def make_shape(name, **kw):
    """Shape factory used by the CLI and scenario configs."""
    name = name.lower()
    if name == "sphere":
        return Sphere(kw.get("r", 1.0))
    if name == "ellipsoid":
        return Ellipsoid(kw.get("a", 1.1), kw.get("b"), kw.get("c"))
    if name in ("perturbed", "perturbed_ellipsoid"):
        return PerturbedEllipsoid(
            kw.get("a", 0.1), kw.get("b", 0.2), kw.get("c", 0.2), kw.get("B", 0.25), kw.get("Vf")
        )
    if name == "rbc":
        return RBCShape(kw.get("R", RBC_RADIUS))
    raise ValueError(f"unknown shape {name!r}")
