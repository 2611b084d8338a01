import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from ibshell.harmonics import build_basis
from ibshell.sphere_points import (
    SHIPPED_SIZES,
    PointSetError,
    SpherePointSet,
    cartesian_to_spherical,
    generate_fallback_points,
    load_point_set,
    read_point_file,
    shipped_point_set,
    spherical_to_cartesian,
)


@pytest.mark.parametrize(
    "p, expected",
    [((1, 0, 0), (0, 0)), ((0, 1, 0), (math.pi / 2, 0)), ((0, 0, 1), (0, math.pi / 2)),
     ((0, 0, -1), (0, -math.pi / 2)), ((-1, 0, 0), (math.pi, 0))],
)
def test_cartesian_to_spherical_axes(p, expected):
    lam, theta = cartesian_to_spherical(np.array(p, dtype=float))
    assert_allclose([lam, theta], expected, atol=1e-15)


def test_cartesian_to_spherical_zero_vector():
    with pytest.raises(PointSetError):
        cartesian_to_spherical(np.zeros(3))


def test_cartesian_to_spherical_normalizes_with_flag():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        lam, theta, flag = cartesian_to_spherical(np.array([[2.0, 0, 0], [0, 1.0, 0]]), return_flag=True)
    assert rec
    assert_allclose(lam, [0, math.pi / 2], atol=1e-15)
    assert list(flag) == [True, False]


@settings(max_examples=200, deadline=None)
@given(st.floats(-math.pi + 1e-9, math.pi), st.floats(-math.pi / 2 + 1e-6, math.pi / 2 - 1e-6))
def test_round_trip(lam, theta):
    p = spherical_to_cartesian(lam, theta)
    l2, t2 = cartesian_to_spherical(p)
    assert_allclose(spherical_to_cartesian(l2, t2), p, atol=1e-12)
    assert -math.pi < l2 <= math.pi
    assert -math.pi / 2 < t2 <= math.pi / 2


def test_load_axis_nodes():
    ps = load_point_set("1 0 0\n0 1 0\n\n# comment\n0 0 1\n")
    assert ps.n == 3
    assert ps.degree is None


def test_load_tetrahedron(tetra):
    text = "\n".join(" ".join(repr(float(v)) for v in row) for row in tetra)
    ps = load_point_set(text)
    assert ps.n == 4 and ps.degree == 1


def test_load_malformed_line_reports_number():
    with pytest.raises(PointSetError, match="line 2"):
        load_point_set("1 0 0\n0 1\n0 0 1\n")
    with pytest.raises(PointSetError, match="line 3"):
        load_point_set("1 0 0\n0 1 0\n0 x 1\n")


def test_load_off_sphere_rejected():
    with pytest.raises(PointSetError):
        load_point_set("1 0 0\n0 1 0\n0 0 1.001\n")


def test_duplicates_rejected():
    with pytest.raises(PointSetError):
        SpherePointSet.from_xyz(np.array([[1.0, 0, 0], [1.0, 0, 0], [0, 1.0, 0]]))


def test_shipped_529_degree():
    ps = shipped_point_set(529)
    assert ps.n == 529 and ps.degree == 22


@pytest.mark.parametrize("n", SHIPPED_SIZES)
def test_shipped_sets_valid(n):
    ps = shipped_point_set(n)
    assert ps.n == n
    assert (ps.degree + 1) ** 2 == n
    assert_allclose(np.linalg.norm(ps.xyz, axis=1), 1.0, atol=1e-12)
    assert_allclose(spherical_to_cartesian(ps.lam, ps.theta), ps.xyz, atol=1e-12)
    assert ps.min_separation() > 0
    assert np.all(ps.lam > -math.pi) and np.all(ps.lam <= math.pi)


def test_shipped_unknown_size():
    with pytest.raises(PointSetError):
        shipped_point_set(7)


def test_read_point_file(tmp_path, tetra):
    path = tmp_path / "pts.txt"
    np.savetxt(path, tetra, fmt="%.17g")
    ps = read_point_file(path)
    assert_allclose(ps.xyz, tetra, atol=1e-15)
    assert ps.checksum() == read_point_file(path).checksum()


def test_fallback_four_nodes():
    ps = generate_fallback_points(4)
    assert ps.min_separation() > 1.5


def test_fallback_unit_norm_and_no_pole():
    ps = generate_fallback_points(100)
    assert_allclose(np.linalg.norm(ps.xyz, axis=1), 1.0, atol=1e-12)
    assert np.all(np.abs(ps.xyz[:, 2]) < 1.0)


def test_fallback_full_rank_basis():
    ps = generate_fallback_points(529)
    b = build_basis(ps, 22)
    assert np.linalg.matrix_rank(b.matrix) == 529


def test_fallback_too_few():
    with pytest.raises(PointSetError):
        generate_fallback_points(3)
