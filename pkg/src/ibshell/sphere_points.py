"""Node sets on the unit sphere.

Coordinates follow the longitude/latitude convention used throughout the
package: ``lam`` in (-pi, pi], ``theta`` in (-pi/2, pi/2], and

    (x, y, z) = (cos lam cos theta, sin lam cos theta, sin theta).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "SHIPPED_SIZES",
    "PointSetError",
    "SpherePointSet",
    "cartesian_to_spherical",
    "generate_fallback_points",
    "load_point_set",
    "read_point_file",
    "shipped_point_set",
    "spherical_to_cartesian",
]

# counts of the point-set files bundled under ibshell/data/
SHIPPED_SIZES = (
    4, 9, 16, 25, 36, 49, 64, 81, 100, 121, 144, 169, 196, 225,
    400, 529, 625, 1024, 2025, 4624, 4761, 8281,
)

UNIT_TOL = 1e-6


class PointSetError(ValueError):
    """Raised for malformed or invalid point-set input."""


def spherical_to_cartesian(lam, theta):
    lam = np.asarray(lam, dtype=float)
    theta = np.asarray(theta, dtype=float)
    ct = np.cos(theta)
    return np.stack([np.cos(lam) * ct, np.sin(lam) * ct, np.sin(theta)], axis=-1)


def cartesian_to_spherical(p, return_flag=False):
    """Map Cartesian points on the unit sphere to (lam, theta).

    Parameters
    ----------
    p : array_like, shape (3,) or (n, 3)
    return_flag : bool
        Also return a boolean array marking inputs that had to be
        normalized (``|p| - 1`` larger than 1e-9).

    At the poles ``lam`` is defined as 0. A zero vector raises
    :class:`PointSetError`.
    """
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    norms = np.linalg.norm(p, axis=1)
    if np.any(norms == 0.0):
        raise PointSetError("cannot map the zero vector to the sphere")
    normalized = np.abs(norms - 1.0) > 1e-9
    if np.any(normalized):
        warnings.warn("non-unit input normalized onto the sphere", stacklevel=2)
        p = p / norms[:, None]
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    theta = np.arctan2(z, np.hypot(x, y))
    lam = np.arctan2(y, x)
    # arctan2 returns -pi on the negative x axis with y = -0.0
    lam = np.where(lam <= -np.pi, lam + 2 * np.pi, lam)
    pole = np.hypot(x, y) == 0.0
    lam = np.where(pole, 0.0, lam)
    if single:
        lam, theta, normalized = lam[0], theta[0], normalized[0]
    if return_flag:
        return lam, theta, normalized
    return lam, theta


@dataclass(frozen=True)
class SpherePointSet:
    """Immutable node set on the unit sphere.

    ``degree`` is set to N when the node count is a perfect square
    ``(N+1)**2``; such sets can carry a square interpolation system.
    """

    xyz: np.ndarray
    lam: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    degree: int | None = None
    name: str = ""

    @classmethod
    def from_xyz(cls, xyz, name="", tol=UNIT_TOL):
        xyz = np.array(xyz, dtype=float, copy=True)
        if xyz.ndim != 2 or xyz.shape[1] != 3 or len(xyz) == 0:
            raise PointSetError("expected an (n, 3) array of Cartesian nodes")
        norms = np.linalg.norm(xyz, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > tol)
        if bad.size:
            i = int(bad[0])
            raise PointSetError(
                f"node {i} lies {abs(norms[i] - 1.0):.3e} from the unit sphere"
            )
        xyz /= norms[:, None]
        lam, theta = cartesian_to_spherical(xyz)
        # store the exact image of (lam, theta) so both views agree to rounding
        xyz = spherical_to_cartesian(lam, theta)
        n = len(xyz)
        r = math.isqrt(n)
        degree = r - 1 if r * r == n and r >= 1 else None
        for arr in (xyz, lam, theta):
            arr.setflags(write=False)
        pts = cls(xyz=xyz, lam=lam, theta=theta, degree=degree, name=name)
        if pts.min_separation() <= 0.0:
            raise PointSetError("point set contains duplicated nodes")
        return pts

    @property
    def n(self):
        return len(self.xyz)

    def min_separation(self):
        """Minimum pairwise chord distance."""
        from scipy.spatial import cKDTree

        if self.n < 2:
            return math.inf
        d, _ = cKDTree(self.xyz).query(self.xyz, k=2)
        return float(d[:, 1].min())

    def checksum(self):
        import hashlib

        return hashlib.sha256(np.ascontiguousarray(self.xyz).tobytes()).hexdigest()[:16]


def load_point_set(text, name=""):
    """Parse a point-set file body: one ``x y z`` triple per line.

    Blank lines and ``#`` comments are skipped. Extra columns (for
    instance published weights) are ignored.
    """
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.replace(",", " ").split()
        if len(parts) < 3:
            raise PointSetError(f"line {lineno}: expected three coordinates")
        try:
            rows.append([float(v) for v in parts[:3]])
        except ValueError:
            raise PointSetError(f"line {lineno}: could not parse {s!r}") from None
    if not rows:
        raise PointSetError("no nodes found")
    return SpherePointSet.from_xyz(np.array(rows), name=name)


def read_point_file(path):
    path = Path(path)
    return load_point_set(path.read_text(), name=path.name)


def shipped_point_set(n):
    """Load one of the bundled point sets by node count."""
    if n not in SHIPPED_SIZES:
        raise PointSetError(
            f"no bundled point set with {n} nodes; available: {SHIPPED_SIZES}"
        )
    fname = f"md{n:05d}.txt"
    text = resources.files("ibshell.data").joinpath(fname).read_text()
    return load_point_set(text, name=fname)


def generate_fallback_points(n):
    """Quasi-uniform spiral nodes, used when no point file is supplied.

    Heights are offset by half a step so no node falls on a pole.
    """
    if n < 4:
        raise PointSetError("need at least 4 nodes")
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    golden = math.pi * (3.0 - math.sqrt(5.0))
    phi = golden * np.arange(n)
    rho = np.sqrt(1.0 - z * z)
    xyz = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    return SpherePointSet.from_xyz(xyz, name=f"spiral{n}")
