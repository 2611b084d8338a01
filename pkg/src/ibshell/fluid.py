"""Periodic spectral Stokes solver and regularized-delta coupling.

The domain is the periodic box [-L, L)^3 with ``eta`` collocated nodes per
axis at ``x_j = -L + j h``. Fields are stored as arrays of shape
(3, eta, eta, eta) indexed (component, x, y, z).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EulerianGrid",
    "FluidState",
    "NetForceError",
    "delta4",
    "divergence",
    "interpolate",
    "spread",
    "stokes_solve",
]


class NetForceError(ValueError):
    pass


@dataclass(frozen=True)
class EulerianGrid:
    """Periodic grid of ``eta`` nodes per axis on [-L, L)^3."""

    L: float
    eta: int
    mu: float = 1.0

    def __post_init__(self):
        if not (self.L > 0):
            raise ValueError(f"L must be positive, got {self.L}")
        if self.eta < 8 or self.eta % 2:
            raise ValueError(f"eta must be even and >= 8, got {self.eta}")
        if not (self.mu > 0):
            raise ValueError(f"mu must be positive, got {self.mu}")

    @property
    def h(self):
        return 2.0 * self.L / self.eta

    @property
    def shape(self):
        return (self.eta,) * 3

    def coords(self):
        return -self.L + self.h * np.arange(self.eta)

    def mesh(self):
        x = self.coords()
        return np.meshgrid(x, x, x, indexing="ij")

    def wavenumbers(self, derivative=False):
        """Angular wavenumbers for an rfftn layout, each broadcastable.

        With ``derivative`` the Nyquist entries are zeroed, since i k at the
        Nyquist frequency does not map a real field to a real field.
        """
        k = 2.0 * np.pi * np.fft.fftfreq(self.eta, d=self.h)
        kz = 2.0 * np.pi * np.fft.rfftfreq(self.eta, d=self.h)
        if derivative:
            k[self.eta // 2] = 0.0
            kz[-1] = 0.0
        return k[:, None, None], k[None, :, None], kz[None, None, :]

    def wrap(self, X):
        """Map positions into [-L, L)."""
        return (np.asarray(X, dtype=float) + self.L) % (2.0 * self.L) - self.L


@dataclass
class FluidState:
    u: np.ndarray
    p: np.ndarray
    f: np.ndarray = field(default=None)


def delta4(r):
    """Standard 4-point regularized delta kernel (grid-normalized)."""
    r = np.abs(np.asarray(r, dtype=float))
    out = np.zeros_like(r)
    a = r <= 1.0
    b = (r > 1.0) & (r < 2.0)
    ra, rb = r[a], r[b]
    out[a] = (3.0 - 2.0 * ra + np.sqrt(1.0 + 4.0 * ra - 4.0 * ra * ra)) / 8.0
    out[b] = (5.0 - 2.0 * rb - np.sqrt(np.maximum(-7.0 + 12.0 * rb - 4.0 * rb * rb, 0.0))) / 8.0
    return out


def _stencil(X, grid):
    """Flat grid indices (n, 64) and tensor weights (n, 64) of the kernel."""
    X = grid.wrap(np.atleast_2d(X))
    s = (X + grid.L) / grid.h
    base = np.floor(s).astype(np.int64) - 1
    offs = np.arange(4)
    idx = (base[:, :, None] + offs) % grid.eta  # (n, 3, 4)
    w = delta4(s[:, :, None] - (base[:, :, None] + offs))  # (n, 3, 4)
    e = grid.eta
    flat = (idx[:, 0, :, None, None] * e + idx[:, 1, None, :, None]) * e + idx[:, 2, None, None, :]
    wt = w[:, 0, :, None, None] * w[:, 1, None, :, None] * w[:, 2, None, None, :]
    n = len(X)
    return flat.reshape(n, 64), wt.reshape(n, 64)


def spread(forces, positions, grid):
    """Force density on the grid: ``f = sum_i F_i delta_h(x - X_i)``.

    Parameters
    ----------
    forces : ndarray, shape (n, 3)
        Lagrangian forces (not densities).
    positions : ndarray, shape (n, 3)
    grid : EulerianGrid

    Returns
    -------
    f : ndarray, shape (3, eta, eta, eta)
    """
    F = np.atleast_2d(np.asarray(forces, dtype=float))
    if not np.all(np.isfinite(F)):
        raise ValueError("non-finite Lagrangian force")
    flat, wt = _stencil(positions, grid)
    scale = wt / grid.h**3
    size = grid.eta**3
    out = np.empty((3, size))
    fi = flat.ravel()
    for c in range(3):
        out[c] = np.bincount(fi, weights=(scale * F[:, c : c + 1]).ravel(), minlength=size)
    return out.reshape((3,) + grid.shape)


def interpolate(u, positions, grid):
    """Velocities ``U_i = sum_x u(x) delta_h(x - X_i) h^3``."""
    flat, wt = _stencil(positions, grid)
    uf = np.asarray(u).reshape(3, -1)
    return np.stack([np.einsum("ij,ij->i", uf[c][flat], wt) for c in range(3)], 1)


def stokes_solve(f, grid, net_tol=1e-8):
    """Periodic Stokes solution ``mu lap u - grad p + f = 0, div u = 0``.

    Parameters
    ----------
    f : ndarray, shape (3, eta, eta, eta)
    grid : EulerianGrid
    net_tol : float
        Allowed magnitude of ``sum f h^3``; the mean force has no periodic
        solution and is discarded once the check passes.

    Returns
    -------
    u : ndarray, shape (3, eta, eta, eta)
    p : ndarray, shape (eta, eta, eta)
    """
    f = np.asarray(f, dtype=float)
    net = f.reshape(3, -1).sum(axis=1) * grid.h**3
    if np.abs(net).max() > net_tol:
        raise NetForceError(f"net force {np.abs(net).max():.3e} exceeds tolerance {net_tol:.3e}")
    qx, qy, qz = grid.wavenumbers()
    k2 = qx * qx + qy * qy + qz * qz
    k2[0, 0, 0] = 1.0
    kx, ky, kz = grid.wavenumbers(derivative=True)
    d2 = kx * kx + ky * ky + kz * kz
    # modes with no derivative symbol carry no pressure
    d2 = np.where(d2 > 0, d2, np.inf)
    fh = np.fft.rfftn(f, axes=(1, 2, 3))
    kdotf = kx * fh[0] + ky * fh[1] + kz * fh[2]
    ph = -1j * kdotf / d2
    inv = 1.0 / (grid.mu * k2)
    uh = np.empty_like(fh)
    for c, kc in enumerate((kx, ky, kz)):
        uh[c] = (fh[c] - kc * kdotf / d2) * inv
    uh[:, 0, 0, 0] = 0.0
    ph[0, 0, 0] = 0.0
    u = np.fft.irfftn(uh, s=grid.shape, axes=(1, 2, 3))
    p = np.fft.irfftn(ph, s=grid.shape, axes=(0, 1, 2))
    return u, p


def divergence(u, grid):
    """Spectral divergence of a velocity field."""
    kx, ky, kz = grid.wavenumbers(derivative=True)
    uh = np.fft.rfftn(u, axes=(1, 2, 3))
    return np.fft.irfftn(1j * (kx * uh[0] + ky * uh[1] + kz * uh[2]), s=grid.shape, axes=(0, 1, 2))
