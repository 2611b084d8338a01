"""Linear discrete surface method on triangulated shells.

Each triangle carries a constant metric built from its edge vectors
``a = X1 - X3`` and ``b = X2 - X3``; the discrete energy is
``sum_t (1/2) W(I1, I2) sqrt(det G0)`` and vertex forces are its exact
negative gradient. Forces therefore sum to zero to rounding error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from .forces import _material_partials

__all__ = [
    "DegenerateTriangleError",
    "TriMesh",
    "TriangulationError",
    "ldsm_area_weights",
    "ldsm_energy",
    "ldsm_forces",
    "mesh_edges",
    "triangulate",
]

AREA_MIN = 1e-14


class TriangulationError(ValueError):
    pass


class DegenerateTriangleError(ValueError):
    pass


@dataclass
class TriMesh:
    """Current vertices, reference vertices and outward triangles."""

    verts: np.ndarray
    ref_verts: np.ndarray
    tris: np.ndarray

    @property
    def n(self):
        return len(self.verts)

    def with_verts(self, verts):
        return TriMesh(np.asarray(verts, dtype=float), self.ref_verts, self.tris)


def triangulate(points, ref_points=None, center=None):
    """Closed triangulation from the convex hull of spherical projections.

    Parameters
    ----------
    points : ndarray, shape (n, 3)
        Vertices of a surface that is star-shaped about ``center``.
    ref_points : ndarray, optional
        Reference vertices (default: ``points``).
    center : ndarray, optional
        Projection center (default: the vertex centroid).
    """
    P = np.asarray(points, dtype=float)
    if center is None:
        center = P.mean(axis=0)
    D = P - center
    r = np.linalg.norm(D, axis=1)
    if np.any(r == 0):
        raise TriangulationError("a vertex coincides with the projection center")
    U = D / r[:, None]
    hull = ConvexHull(U)
    tris = hull.simplices.copy()
    if len(np.unique(tris)) != len(P):
        raise TriangulationError("not all vertices lie on the hull; surface is not star-shaped")
    # orient outward on the sphere
    nrm = np.cross(U[tris[:, 1]] - U[tris[:, 0]], U[tris[:, 2]] - U[tris[:, 0]])
    flip = np.einsum("ij,ij->i", nrm, U[tris].mean(axis=1)) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    _check_closed(tris, len(P))
    ref = P.copy() if ref_points is None else np.asarray(ref_points, dtype=float)
    mesh = TriMesh(P.copy(), ref, tris)
    # outward orientation must also hold on the actual surface
    cr = np.cross(P[tris[:, 1]] - P[tris[:, 0]], P[tris[:, 2]] - P[tris[:, 0]])
    if np.any(np.einsum("ij,ij->i", cr, U[tris].mean(axis=1)) <= 0):
        raise TriangulationError("projection is not injective; surface is not star-shaped")
    return mesh


def _check_closed(tris, n):
    e = np.sort(np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    if np.any(counts != 2):
        raise TriangulationError("mesh is not closed")
    valence = np.bincount(tris.ravel(), minlength=n)
    if np.any(valence < 3):
        raise TriangulationError("vertex with fewer than 3 triangles")


def mesh_edges(tris):
    """Unique undirected edges as an (E, 2) array with i < j."""
    e = np.sort(np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
    return np.unique(e, axis=0)


def _tri_areas(V, tris):
    a = V[tris[:, 0]] - V[tris[:, 2]]
    b = V[tris[:, 1]] - V[tris[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(a, b), axis=1)


def ldsm_area_weights(mesh):
    """One third of the adjacent reference-triangle areas at each vertex."""
    A = _tri_areas(mesh.ref_verts, mesh.tris)
    return np.bincount(mesh.tris.ravel(), weights=np.repeat(A / 3.0, 3), minlength=mesh.n)


def _tri_state(mesh, verts):
    V = mesh.verts if verts is None else np.asarray(verts, dtype=float)
    t = mesh.tris
    Z = mesh.ref_verts
    a0 = Z[t[:, 0]] - Z[t[:, 2]]
    b0 = Z[t[:, 1]] - Z[t[:, 2]]
    E0 = np.einsum("ij,ij->i", a0, a0)
    F0 = np.einsum("ij,ij->i", a0, b0)
    G0 = np.einsum("ij,ij->i", b0, b0)
    g0 = E0 * G0 - F0 * F0
    a = V[t[:, 0]] - V[t[:, 2]]
    b = V[t[:, 1]] - V[t[:, 2]]
    aa = np.einsum("ij,ij->i", a, a)
    ab = np.einsum("ij,ij->i", a, b)
    bb = np.einsum("ij,ij->i", b, b)
    g = aa * bb - ab * ab
    bad = np.flatnonzero(~(0.5 * np.sqrt(np.maximum(g, 0.0)) > AREA_MIN))
    if bad.size:
        raise DegenerateTriangleError(f"triangle {bad[0]} {tuple(t[bad[0]])} has collapsed")
    # H = G0^{-1}
    H11, H12, H22 = G0 / g0, -F0 / g0, E0 / g0
    I1 = H11 * aa + 2 * H12 * ab + H22 * bb - 2.0
    I2 = g / g0 - 1.0
    return V, a, b, aa, ab, bb, g0, H11, H12, H22, I1, I2


def ldsm_energy(mesh, material, verts=None):
    *_, g0, _, _, _, I1, I2 = _tri_state(mesh, verts)
    W = _material_partials(material, I1, I2)[0]
    return float(np.sum(0.5 * W * np.sqrt(g0)))


def ldsm_forces(mesh, material, verts=None):
    """Vertex forces ``-dE/dX_i`` of the discrete neo-Hookean/tension energy."""
    if material.use_bend:
        raise ValueError("bending is not available for the triangulated method")
    V, a, b, aa, ab, bb, g0, H11, H12, H22, I1, I2 = _tri_state(mesh, verts)
    _, W1, W2, *_ = _material_partials(material, I1, I2)
    c = 0.5 * np.sqrt(g0)
    col = lambda x: x[:, None]  # noqa: E731
    dI1_da = 2 * col(H11) * a + 2 * col(H12) * b
    dI1_db = 2 * col(H12) * a + 2 * col(H22) * b
    dI2_da = (2 * col(bb) * a - 2 * col(ab) * b) / col(g0)
    dI2_db = (2 * col(aa) * b - 2 * col(ab) * a) / col(g0)
    F1 = -col(c) * (col(W1) * dI1_da + col(W2) * dI2_da)
    F2 = -col(c) * (col(W1) * dI1_db + col(W2) * dI2_db)
    F3 = -(F1 + F2)
    t = mesh.tris
    idx = np.concatenate([t[:, 0], t[:, 1], t[:, 2]])
    Fall = np.concatenate([F1, F2, F3])
    out = np.empty((len(V), 3))
    for k in range(3):
        out[:, k] = np.bincount(idx, weights=Fall[:, k], minlength=len(V))
    return out
