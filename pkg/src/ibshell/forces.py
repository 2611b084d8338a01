"""Variational force densities on elastic shells.

The elastic energy is ``E = int W(I1, I2) dA0`` over the reference surface.
Its force density per unit reference area is

    F = g0^{-1/2} [ d_lam( g0^{1/2} (S11 X_lam + S12 X_theta) )
                  + d_theta( g0^{1/2} (S21 X_lam + S22 X_theta) ) ]

with the second Piola-Kirchhoff tensor ``S = 2 W1 G0^{-1} + 2 W2 det(C) G^{-1}``.
Here the outer derivatives are expanded exactly by the chain rule using
second-order jets of the current map X and the reference map Z, so an
exactly represented surface yields exact densities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DegenerateMetricError, curvature, laplacian_of_mean_curvature
from .harmonics import fit_interpolant

__all__ = [
    "CollapsedElementError",
    "ElasticMaterial",
    "ForceField",
    "ShellForceModel",
    "bending_energy_density",
    "bending_force",
    "density_to_force",
    "elastic_energy_density",
    "elastic_force_density",
    "neo_hookean_partials",
    "neo_hookean_second_partials",
    "second_pk",
    "surface_tension_curvature_force",
    "surface_tension_partials",
    "surface_tension_second_partials",
]


class CollapsedElementError(ValueError):
    """Raised when I2 <= -1, i.e. the local area has collapsed."""


@dataclass(frozen=True)
class ElasticMaterial:
    """Moduli and switches for the three energy terms.

    ``K = A * Gs`` is the area dilation modulus of the neo-Hookean law.
    """

    Gs: float = 0.0
    A: float = 0.0
    sigma: float = 0.0
    k_bend: float = 0.0
    neo_hookean: bool = True
    surface_tension: bool = True
    bending: bool = True

    def __post_init__(self):
        for name in ("Gs", "A", "sigma", "k_bend"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be a nonnegative number, got {v}")

    @property
    def K(self):
        return self.A * self.Gs

    @property
    def use_nh(self):
        return self.neo_hookean and self.Gs > 0

    @property
    def use_st(self):
        return self.surface_tension and self.sigma > 0

    @property
    def use_bend(self):
        return self.bending and self.k_bend > 0


def _root(I2):
    I2 = np.asarray(I2, dtype=float)
    if np.any(~(I2 > -1.0)):
        raise CollapsedElementError("I2 <= -1: element area collapsed")
    return np.sqrt(I2 + 1.0)


def neo_hookean_partials(I1, I2, Gs, A):
    """Evans-Skalak neo-Hookean energy density and its first partials.

    ``W = Gs ((I1+2)/(2s) - 1 + A/2 (I2 + 2 - 2s))`` with ``s = sqrt(I2+1)``.
    """
    s = _root(I2)
    I1 = np.asarray(I1, dtype=float)
    W = Gs * ((I1 + 2.0) / (2.0 * s) - 1.0 + 0.5 * A * (I2 + 2.0 - 2.0 * s))
    W1 = Gs / (2.0 * s) + 0.0 * I1
    W2 = Gs * (-(I1 + 2.0) / (4.0 * s**3) + 0.5 * A * (1.0 - 1.0 / s))
    return W, W1, W2


def neo_hookean_second_partials(I1, I2, Gs, A):
    """``(W11, W12, W22)`` of the neo-Hookean law."""
    s = _root(I2)
    I1 = np.asarray(I1, dtype=float)
    W11 = np.zeros_like(s + I1)
    W12 = -Gs / (4.0 * s**3) + 0.0 * I1
    W22 = Gs * (3.0 * (I1 + 2.0) / (8.0 * s**5) + A / (4.0 * s**3))
    return W11, W12, W22


def surface_tension_partials(I2, sigma):
    """``W = sigma sqrt(I2 + 1)`` and its partials."""
    s = _root(I2)
    return sigma * s, np.zeros_like(s), sigma / (2.0 * s)


def surface_tension_second_partials(I2, sigma):
    s = _root(I2)
    z = np.zeros_like(s)
    return z, z, -sigma / (4.0 * s**3)


def _material_partials(material, I1, I2):
    n = np.shape(I1)
    W = np.zeros(n)
    d = [np.zeros(n) for _ in range(5)]
    if material.use_nh:
        w, w1, w2 = neo_hookean_partials(I1, I2, material.Gs, material.A)
        s11, s12, s22 = neo_hookean_second_partials(I1, I2, material.Gs, material.A)
        W = W + w
        for i, v in enumerate((w1, w2, s11, s12, s22)):
            d[i] = d[i] + v
    if material.use_st:
        w, w1, w2 = surface_tension_partials(I2, material.sigma)
        s11, s12, s22 = surface_tension_second_partials(I2, material.sigma)
        W = W + w
        for i, v in enumerate((w1, w2, s11, s12, s22)):
            d[i] = d[i] + v
    return (W, *d)


# 2x2 helpers on arrays of shape (n, 2, 2)
def _sym(a, b, c):
    return np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2)


def _det(M):
    return M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]


def _adj(M):
    out = np.empty_like(M)
    out[:, 0, 0] = M[:, 1, 1]
    out[:, 1, 1] = M[:, 0, 0]
    out[:, 0, 1] = -M[:, 0, 1]
    out[:, 1, 0] = -M[:, 1, 0]
    return out


def _tr(M):
    return M[:, 0, 0] + M[:, 1, 1]


def _dot(a, b):
    return np.einsum("ij,ij->i", a, b)


def _metric_with_derivs(j):
    """Metric tensor and its lam- and theta-derivatives from a jet."""
    G = _sym(_dot(j.d_l, j.d_l), _dot(j.d_l, j.d_t), _dot(j.d_t, j.d_t))
    G_l = _sym(2 * _dot(j.d_ll, j.d_l), _dot(j.d_ll, j.d_t) + _dot(j.d_l, j.d_lt), 2 * _dot(j.d_lt, j.d_t))
    G_t = _sym(2 * _dot(j.d_lt, j.d_l), _dot(j.d_lt, j.d_t) + _dot(j.d_l, j.d_tt), 2 * _dot(j.d_tt, j.d_t))
    return G, G_l, G_t


def second_pk(metrics, partials):
    """``S = 2 W1 G0^{-1} + 2 W2 det(C) G^{-1}`` from a MetricPair."""
    W1, W2 = (np.asarray(p, dtype=float) for p in partials)
    G, G0 = metrics.G, metrics.G0
    g, g0 = _det(G), _det(G0)
    if np.any(~(g0 > 0)) or np.any(~(g > 0)):
        raise DegenerateMetricError("singular metric in second_pk")
    S = 2 * W1[:, None, None] * _adj(G0) / g0[:, None, None] + 2 * W2[:, None, None] * _adj(G) / g0[:, None, None]
    return S


def elastic_energy_density(jX, jZ, material):
    """Energy density W per unit reference area (neo-Hookean + tension)."""
    G, _, _ = _metric_with_derivs(jX)
    G0, _, _ = _metric_with_derivs(jZ)
    g, g0 = _det(G), _det(G0)
    I1 = _tr(G @ _adj(G0)) / g0 - 2.0
    I2 = g / g0 - 1.0
    return _material_partials(material, I1, I2)[0]


def elastic_force_density(jX, jZ, material, return_stress=False):
    """Neo-Hookean plus surface-tension force density by exact chain rule.

    Parameters
    ----------
    jX, jZ : SurfaceJet
        Current and reference jets at the same n nodes.
    material : ElasticMaterial

    Returns
    -------
    ndarray, shape (n, 3)
        Force per unit reference area.
    """
    Xl, Xt, Xll, Xlt, Xtt = jX.d_l, jX.d_t, jX.d_ll, jX.d_lt, jX.d_tt
    G, G_l, G_t = _metric_with_derivs(jX)
    G0, G0_l, G0_t = _metric_with_derivs(jZ)
    g0 = _det(G0)
    bad = np.flatnonzero(~(g0 > 1e-14))
    if bad.size:
        raise DegenerateMetricError(f"reference metric degenerate at node {bad[0]}")
    g = _det(G)
    bad = np.flatnonzero(~(g > 1e-14))
    if bad.size:
        raise DegenerateMetricError(f"current metric degenerate at node {bad[0]}")
    A0 = _adj(G0)
    Hm = A0 / g0[:, None, None]
    Hm_l = -Hm @ G0_l @ Hm
    Hm_t = -Hm @ G0_t @ Hm
    AG = _adj(G)
    g_l, g_t = _tr(AG @ G_l), _tr(AG @ G_t)
    g0_l, g0_t = _tr(A0 @ G0_l), _tr(A0 @ G0_t)

    I1 = _tr(G @ Hm) - 2.0
    I1_l = _tr(G_l @ Hm) + _tr(G @ Hm_l)
    I1_t = _tr(G_t @ Hm) + _tr(G @ Hm_t)
    I2 = g / g0 - 1.0
    I2_l = (g_l * g0 - g * g0_l) / g0**2
    I2_t = (g_t * g0 - g * g0_t) / g0**2

    _, W1, W2, W11, W12, W22 = _material_partials(material, I1, I2)
    W1_l = W11 * I1_l + W12 * I2_l
    W1_t = W11 * I1_t + W12 * I2_t
    W2_l = W12 * I1_l + W22 * I2_l
    W2_t = W12 * I1_t + W22 * I2_t

    e = (slice(None), None, None)
    S = 2 * W1[e] * Hm + 2 * W2[e] * AG / g0[e]
    S_l = (2 * W1_l[e] * Hm + 2 * W1[e] * Hm_l + 2 * W2_l[e] * AG / g0[e]
           + 2 * W2[e] * (_adj(G_l) / g0[e] - AG * (g0_l / g0**2)[e]))
    S_t = (2 * W1_t[e] * Hm + 2 * W1[e] * Hm_t + 2 * W2_t[e] * AG / g0[e]
           + 2 * W2[e] * (_adj(G_t) / g0[e] - AG * (g0_t / g0**2)[e]))

    c = lambda a: a[:, None]  # noqa: E731
    S11, S12, S21, S22 = S[:, 0, 0], S[:, 0, 1], S[:, 1, 0], S[:, 1, 1]
    rl = g0_l / (2 * g0)
    rt = g0_t / (2 * g0)
    F = (c(S_l[:, 0, 0]) * Xl + c(S11) * Xll + c(S_l[:, 0, 1]) * Xt + c(S12) * Xlt
         + c(S_t[:, 1, 0]) * Xl + c(S21) * Xlt + c(S_t[:, 1, 1]) * Xt + c(S22) * Xtt
         + c(rl) * (c(S11) * Xl + c(S12) * Xt) + c(rt) * (c(S21) * Xl + c(S22) * Xt))
    if return_stress:
        return F, S
    return F


def _area_ratio(jX, jZ):
    G, _, _ = _metric_with_derivs(jX)
    G0, _, _ = _metric_with_derivs(jZ)
    g0 = _det(G0)
    bad = np.flatnonzero(~(g0 > 1e-14))
    if bad.size:
        raise DegenerateMetricError(f"reference metric degenerate at node {bad[0]}")
    return np.sqrt(_det(G) / g0)


def surface_tension_curvature_force(jX, jZ, sigma):
    """``sigma (2H) n sqrt(det G / det G0)`` per unit reference area."""
    cd = curvature(jX)
    return (sigma * 2.0 * cd.H * _area_ratio(jX, jZ))[:, None] * cd.n_hat


def bending_force(jX, jZ, k_bend, lap_H, cd=None):
    """``-k sqrt(g/g0) (4 lap H + 8 H^3 - 4 H R) n`` per unit reference area.

    ``lap_H`` is the surface Laplacian of the mean curvature at the same
    nodes (see :func:`ibshell.geometry.laplacian_of_mean_curvature`).
    """
    if cd is None:
        cd = curvature(jX)
    H, R = cd.H, cd.R
    mag = -k_bend * _area_ratio(jX, jZ) * (4.0 * lap_H + 8.0 * H**3 - 4.0 * H * R)
    return mag[:, None] * cd.n_hat


def bending_energy_density(jX, jZ, k_bend):
    """``k (2H)^2 sqrt(g/g0)`` per unit reference area."""
    H = curvature(jX).H
    return k_bend * 4.0 * H * H * _area_ratio(jX, jZ)


@dataclass(frozen=True)
class ForceField:
    density: np.ndarray
    force: np.ndarray

    @property
    def total(self):
        return self.force.sum(axis=0)


def density_to_force(density, weights):
    w = getattr(weights, "w", weights)
    density = np.asarray(density, dtype=float)
    w = np.asarray(w, dtype=float)
    if density.shape[0] != w.shape[0]:
        raise ValueError(f"{density.shape[0]} densities for {w.shape[0]} weights")
    return ForceField(density=density, force=density * w[:, None])


class ShellForceModel:
    """SHVD force evaluation for one membrane.

    Holds the interpolation basis, harmonic jet matrices at the evaluation
    nodes, reference jets and reference weights, so that each call costs
    a refit plus O(mn) matrix products.

    Parameters
    ----------
    basis : HarmonicBasis
        Interpolation system on the m interpolation nodes.
    eval_points : SpherePointSet
        The n evaluation nodes.
    ref_jet_eval : SurfaceJet
        Reference map jets at the evaluation nodes.
    weights : QuadratureWeights
        Reference-configuration weights at the evaluation nodes.
    material : ElasticMaterial
        Bending adds fourth-order derivative matrices at the evaluation
        nodes for the exact surface Laplacian of the mean curvature.
    """

    def __init__(self, basis, eval_points, ref_jet_eval, weights, material):
        self.basis = basis
        self.eval_points = eval_points
        self.Z = ref_jet_eval
        self.weights = weights
        self.material = material
        self.evaluator = basis.evaluator(
            eval_points.lam, eval_points.theta, key=("eval", eval_points.checksum()),
            order=4 if material.use_bend else 2,
        )

    def fit(self, X_interp):
        return fit_interpolant(self.basis, X_interp)

    def jets(self, interp):
        return self.evaluator.jet(interp.coeffs)

    def density(self, interp, jX=None):
        if jX is None:
            jX = self.jets(interp)
        mat = self.material
        dens = np.zeros((jX.n, 3))
        if mat.use_nh or mat.use_st:
            dens += elastic_force_density(jX, self.Z, mat)
        if mat.use_bend:
            dens += self.bending_density(interp, jX)
        return dens

    def bending_density(self, interp, jX=None):
        if jX is None:
            jX = self.jets(interp)
        if self.evaluator.order < 4:
            raise ValueError("bending needs fourth-order derivative matrices")
        _, lap = laplacian_of_mean_curvature(self.evaluator.partials(interp.coeffs))
        return bending_force(jX, self.Z, self.material.k_bend, lap)

    def forces(self, X_interp):
        interp = self.fit(X_interp)
        jX = self.jets(interp)
        return density_to_force(self.density(interp, jX), self.weights), jX

    def energy(self, X_interp):
        """Discrete energy ``sum_i W_i w_i`` including bending."""
        interp = self.fit(X_interp)
        jX = self.jets(interp)
        w = self.weights.w
        E = 0.0
        if self.material.use_nh or self.material.use_st:
            E += float(np.dot(elastic_energy_density(jX, self.Z, self.material), w))
        if self.material.use_bend:
            E += float(np.dot(bending_energy_density(jX, self.Z, self.material.k_bend), w))
        return E
