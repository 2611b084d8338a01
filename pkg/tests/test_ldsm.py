import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from conftest import TETRA
from ibshell.forces import ElasticMaterial
from ibshell.ldsm import (
    DegenerateTriangleError,
    TriangulationError,
    ldsm_area_weights,
    ldsm_energy,
    ldsm_forces,
    mesh_edges,
    triangulate,
)
from ibshell.shapes import Ellipsoid
from ibshell.sphere_points import shipped_point_set

NH_ST = ElasticMaterial(Gs=1.0, A=2.0, sigma=0.5)


def _perturbed(mesh, rng, eps=0.05):
    return mesh.verts * (1 + eps * rng.normal(size=(mesh.n, 1))) + eps * rng.normal(size=mesh.verts.shape)


def test_tetrahedron():
    mesh = triangulate(TETRA)
    assert mesh.tris.shape == (4, 3)
    V, E, F = mesh.n, len(mesh_edges(mesh.tris)), len(mesh.tris)
    assert V - E + F == 2


def test_tetrahedron_weights():
    w = ldsm_area_weights(triangulate(TETRA))
    # each vertex touches three congruent faces of area 2 sqrt(3)/3
    assert_allclose(w, 2 * math.sqrt(3) / 3, rtol=1e-14)


def test_529_triangle_count():
    mesh = triangulate(shipped_point_set(529).xyz)
    assert len(mesh.tris) == 2 * 529 - 4


def test_outward_orientation():
    mesh = triangulate(Ellipsoid(1.1).positions(*_lt(shipped_point_set(225))))
    V = mesh.verts
    t = mesh.tris
    nrm = np.cross(V[t[:, 1]] - V[t[:, 0]], V[t[:, 2]] - V[t[:, 0]])
    assert np.all(np.einsum("ij,ij->i", nrm, V[t].mean(axis=1)) > 0)


def _lt(p):
    return p.lam, p.theta


def test_sphere_mesh_area():
    n = 8281
    mesh = triangulate(shipped_point_set(n).xyz)
    w = ldsm_area_weights(mesh)
    assert_allclose(w.sum(), 4 * math.pi, rtol=1e-3)
    assert np.all(w > 0)


def test_weights_sum_is_mesh_area():
    mesh = triangulate(shipped_point_set(400).xyz)
    V, t = mesh.ref_verts, mesh.tris
    area = 0.5 * np.linalg.norm(np.cross(V[t[:, 1]] - V[t[:, 0]], V[t[:, 2]] - V[t[:, 0]]), axis=1).sum()
    assert_allclose(ldsm_area_weights(mesh).sum(), area, rtol=1e-14)


def test_not_star_shaped():
    # a point at the centroid cannot be projected
    pts = np.vstack([TETRA, np.zeros(3)])
    with pytest.raises(TriangulationError):
        triangulate(pts, center=np.zeros(3))


def test_forces_zero_at_reference():
    mesh = triangulate(shipped_point_set(529).xyz)
    assert np.abs(ldsm_forces(mesh, ElasticMaterial(Gs=1.0, A=3.0))).max() < 1e-12


def test_force_balance(rng):
    mesh = triangulate(shipped_point_set(529).xyz)
    F = ldsm_forces(mesh, NH_ST, _perturbed(mesh, rng))
    assert np.abs(F.sum(axis=0)).max() <= 1e-12


def test_forces_are_energy_gradient(rng):
    mesh = triangulate(shipped_point_set(64).xyz)
    V = _perturbed(mesh, rng)
    F = ldsm_forces(mesh, NH_ST, V)
    h = 1e-6
    fd = np.zeros_like(V)
    for i in range(len(V)):
        for k in range(3):
            Vp, Vm = V.copy(), V.copy()
            Vp[i, k] += h
            Vm[i, k] -= h
            fd[i, k] = -(ldsm_energy(mesh, NH_ST, Vp) - ldsm_energy(mesh, NH_ST, Vm)) / (2 * h)
    assert_allclose(F, fd, rtol=1e-5, atol=1e-5 * np.abs(fd).max())


@settings(max_examples=20, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10), st.integers(0, 2**31 - 1))
def test_translation_invariance(dx, dy, dz, seed):
    mesh = _MESH
    V = _perturbed(mesh, np.random.default_rng(seed))
    F1 = ldsm_forces(mesh, NH_ST, V)
    F2 = ldsm_forces(mesh, NH_ST, V + np.array([dx, dy, dz]))
    assert_allclose(F2, F1, atol=1e-10 * max(1.0, abs(dx) + abs(dy) + abs(dz)))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.01, 0.3))
def test_force_balance_property(seed, eps):
    mesh = _MESH
    F = ldsm_forces(mesh, NH_ST, _perturbed(mesh, np.random.default_rng(seed), eps))
    assert np.abs(F.sum(axis=0)).max() <= 1e-12


_MESH = triangulate(shipped_point_set(225).xyz)


def test_degenerate_triangle():
    mesh = triangulate(shipped_point_set(81).xyz)
    V = mesh.verts.copy()
    i, j, _ = mesh.tris[5]
    V[j] = V[i]
    with pytest.raises(DegenerateTriangleError, match="triangle"):
        ldsm_forces(mesh, NH_ST, V)


def test_bending_rejected():
    mesh = triangulate(TETRA)
    with pytest.raises(ValueError):
        ldsm_forces(mesh, ElasticMaterial(k_bend=1.0))


def test_edges():
    e = mesh_edges(triangulate(TETRA).tris)
    assert len(e) == 6 and np.all(e[:, 0] < e[:, 1])
