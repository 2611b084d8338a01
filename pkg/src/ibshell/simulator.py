"""Immersed boundary time stepping for elastic shells.

A :class:`Simulation` owns one Eulerian grid and any of: a membrane
(SHVD or LDSM), a tethered capillary, a drag-bearing cortex with adhesion
links to the membrane, and a fixed Eulerian body force. Each step

1. refits the SHVD interpolant from the interpolation positions,
2. evaluates Lagrangian forces,
3. spreads them with the 4-point kernel,
4. solves periodic Stokes flow,
5. interpolates velocities at the moving nodes,
6. advances positions by forward Euler

and, when a capillary is present, shifts every structure by the constant
correction velocity that keeps the tether forces balanced.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .fluid import interpolate, spread, stokes_solve
from .forces import density_to_force
from .geometry import curvature
from .harmonics import evaluate_jet, fit_interpolant
from .ldsm import TriMesh, ldsm_area_weights, ldsm_forces, mesh_edges

__all__ = [
    "Adhesion",
    "Capillary",
    "Cortex",
    "LdsmMembrane",
    "ShvdMembrane",
    "Simulation",
    "SimulationError",
    "StepInfo",
    "adhesion_forces",
    "capillary_mesh",
    "cortex_spring_forces",
    "tether_forces",
    "velocity_correction",
]

NET_FORCE_ATOL = 1e-8
STAGES = ("fit", "force", "spread", "solve", "interpolate", "update")


class SimulationError(RuntimeError):
    """A step failed; ``step`` is the index of the failing step."""

    def __init__(self, msg, step):
        super().__init__(f"step {step}: {msg}")
        self.step = step


def _jet_area_factor(jX, jZ):
    c = np.linalg.norm(np.cross(jX.d_l, jX.d_t), axis=1)
    c0 = np.linalg.norm(np.cross(jZ.d_l, jZ.d_t), axis=1)
    return c / c0


class ShvdMembrane:
    """Spherical-harmonic membrane moved through its m interpolation nodes.

    Parameters
    ----------
    model : ShellForceModel
    X : ndarray, shape (m, 3)
        Initial interpolation positions.
    """

    kind = "shvd"

    def __init__(self, model, X):
        self.model = model
        self.X = np.array(X, dtype=float)
        if self.X.shape != (model.basis.m, 3):
            raise ValueError(f"expected ({model.basis.m}, 3) positions, got {self.X.shape}")
        self._state = None

    @property
    def points(self):
        return self.model.eval_points

    @property
    def weights(self):
        return self.model.weights.w

    def _current(self):
        if self._state is None:
            interp = fit_interpolant(self.model.basis, self.X)
            self._state = (interp, self.model.jets(interp))
        return self._state

    @property
    def interpolant(self):
        return self._current()[0]

    @property
    def jet(self):
        return self._current()[1]

    def forces(self):
        """Forces and positions at the evaluation nodes."""
        interp, jX = self._current()
        ff = density_to_force(self.model.density(interp, jX), self.model.weights)
        return ff.force, jX.X

    def eval_positions(self):
        return self.jet.X

    def velocity_positions(self):
        return self.X

    def advance(self, U, dt):
        self.X = self.X + dt * U
        self._state = None

    def translate(self, d):
        self.X = self.X + d
        self._state = None

    def area_factor(self):
        return _jet_area_factor(self.jet, self.model.Z)

    def area(self):
        return float(np.dot(self.area_factor(), self.weights))

    def volume(self):
        """``(1/3) int X . n dA`` by the evaluation-node quadrature."""
        jX, jZ = self.jet, self.model.Z
        cr = np.cross(jX.d_l, jX.d_t)
        c0 = np.linalg.norm(np.cross(jZ.d_l, jZ.d_t), axis=1)
        Xc = jX.X - self.center_of_mass()
        return float(np.dot(np.einsum("ij,ij->i", Xc, cr) / c0, self.weights) / 3.0)

    def center_of_mass(self):
        w = self.weights
        return w @ self.jet.X / w.sum()

    def mean_curvature(self):
        return curvature(self.jet).H

    def material_points(self, lam, theta):
        """Current positions of material points given by sphere coordinates."""
        return self.interpolant.positions(lam, theta)

    def material_jet(self, lam, theta):
        return evaluate_jet(self.interpolant, lam, theta)


class LdsmMembrane:
    """Triangulated membrane moved through its vertices."""

    kind = "ldsm"

    def __init__(self, mesh, material, points=None):
        self.mesh = mesh
        self.material = material
        self.X = np.array(mesh.verts, dtype=float)
        self._points = points
        self._w = ldsm_area_weights(mesh)

    @property
    def points(self):
        return self._points

    @property
    def weights(self):
        return self._w

    def forces(self):
        return ldsm_forces(self.mesh, self.material, self.X), self.X

    def eval_positions(self):
        return self.X

    def velocity_positions(self):
        return self.X

    def advance(self, U, dt):
        self.X = self.X + dt * U

    def translate(self, d):
        self.X = self.X + d

    def _tri_vectors(self):
        t = self.mesh.tris
        return self.X[t[:, 0]], self.X[t[:, 1]], self.X[t[:, 2]]

    def area(self):
        a, b, c = self._tri_vectors()
        return float(0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1).sum())

    def volume(self):
        a, b, c = self._tri_vectors()
        o = self.center_of_mass()
        return float(np.einsum("ij,ij->i", a - o, np.cross(b - o, c - o)).sum() / 6.0)

    def center_of_mass(self):
        return self._w @ self.X / self._w.sum()


# ---------------------------------------------------------------------------
# capillary


def capillary_mesh(radius, half_length, spacing):
    """Structured cylinder along x: nodes, area weights and triangles.

    Rings sit at the midpoints of equal axial intervals covering
    ``[-half_length, half_length]``, so every node carries the same weight
    and area-weighted sums of displacements are plain sums.
    """
    n_ring = max(8, int(math.ceil(2 * math.pi * radius / spacing)))
    n_st = max(2, int(math.ceil(2 * half_length / spacing)))
    dx = 2 * half_length / n_st
    xs = -half_length + dx * (np.arange(n_st) + 0.5)
    phi = 2 * math.pi * np.arange(n_ring) / n_ring
    X, P = np.meshgrid(xs, phi, indexing="ij")
    nodes = np.stack([X.ravel(), radius * np.cos(P.ravel()), radius * np.sin(P.ravel())], 1)
    w = np.full(len(nodes), dx * 2 * math.pi * radius / n_ring)
    i, j = np.meshgrid(np.arange(n_st - 1), np.arange(n_ring), indexing="ij")
    a = (i * n_ring + j).ravel()
    b = (i * n_ring + (j + 1) % n_ring).ravel()
    c = a + n_ring
    d = b + n_ring
    tris = np.concatenate([np.stack([a, b, d], 1), np.stack([a, d, c], 1)])
    return nodes, w, tris


def tether_forces(X, Z, k_teth):
    """Linear tether forces ``-k (X - Z)`` (forces, not densities)."""
    return -k_teth * (np.asarray(X) - np.asarray(Z))


def velocity_correction(Z, X_hat, weights, dt):
    """Constant velocity ``(1 / (A dt)) sum (Z - X_hat) w`` with ``A = sum w``."""
    w = np.asarray(weights, dtype=float)
    A = w.sum()
    if not A > 0:
        raise ValueError("capillary area must be positive")
    return w @ (np.asarray(Z) - np.asarray(X_hat)) / (A * dt)


class Capillary:
    def __init__(self, Z, weights, k_teth, tris=None):
        self.Z = np.array(Z, dtype=float)
        self.X = self.Z.copy()
        self.w = np.asarray(weights, dtype=float)
        self.k_teth = float(k_teth)
        self.tris = tris

    def forces(self):
        return tether_forces(self.X, self.Z, self.k_teth), self.X


# ---------------------------------------------------------------------------
# cortex and adhesion


def cortex_spring_forces(X, edges, k_edge, dl):
    """Forces of the lattice springs, ``F_i dA_i = sum_j k_ij (|d|/dl) d_hat``.

    ``d`` points from node i to node j, so each spring pulls its ends
    together with a magnitude proportional to its current length.
    """
    i, j = edges[:, 0], edges[:, 1]
    d = X[j] - X[i]
    ln = np.linalg.norm(d, axis=1)
    bad = np.flatnonzero(~(ln > 0))
    if bad.size:
        e = bad[0]
        raise ValueError(f"cortex edge ({i[e]}, {j[e]}) has coincident nodes")
    f = (k_edge / dl)[:, None] * d
    out = np.empty_like(X)
    for c in range(3):
        out[:, c] = np.bincount(i, weights=f[:, c], minlength=len(X)) - np.bincount(
            j, weights=f[:, c], minlength=len(X))
    return out


class Cortex:
    """Lattice-spring cortex on a closed triangulation.

    ``dA`` are one-third-of-adjacent-area weights of the reference mesh and
    the spring constants are ``k_ij = 8 k / (3 dl_ij) (dA_i + dA_j) / 2``.
    """

    def __init__(self, Z, tris, k_cortex, xi):
        self.Z = np.array(Z, dtype=float)
        self.X = self.Z.copy()
        self.tris = np.asarray(tris)
        self.edges = mesh_edges(self.tris)
        self.dA = ldsm_area_weights(TriMesh(self.Z, self.Z, self.tris))
        i, j = self.edges[:, 0], self.edges[:, 1]
        self.dl = np.linalg.norm(self.Z[j] - self.Z[i], axis=1)
        self.k_edge = 8.0 * k_cortex / (3.0 * self.dl) * 0.5 * (self.dA[i] + self.dA[j])
        self.xi = float(xi)

    def spring_forces(self):
        return cortex_spring_forces(self.X, self.edges, self.k_edge, self.dl)


def adhesion_forces(X_mem, X_cortex, links, k_adh, dA_mem, dA_cortex, alive=None):
    """Force densities of membrane-cortex adhesion springs.

    Each live link (membrane node ``links[l, 0]``, cortex node
    ``links[l, 1]``) is a zero-rest-length spring. The cortex density is
    ``k_adh (X_mem - X_cortex)`` and the membrane density uses the scaled
    stiffness ``k_adh dA_cortex / dA_mem`` toward the cortex, so the area
    weighted pair sums to zero.

    Returns
    -------
    dens_mem : ndarray, shape (n_mem, 3)
    dens_cortex : ndarray, shape (n_cortex, 3)
    """
    links = np.asarray(links)
    if alive is not None:
        links = links[np.asarray(alive, dtype=bool)]
    mi, ci = links[:, 0], links[:, 1]
    d = X_cortex[ci] - X_mem[mi]
    dens_m = np.zeros_like(X_mem)
    dens_c = np.zeros_like(X_cortex)
    dens_c[ci] = -k_adh * d
    dens_m[mi] = (k_adh * dA_cortex[ci] / dA_mem[mi])[:, None] * d
    return dens_m, dens_c


class Adhesion:
    def __init__(self, links, k_adh):
        self.links = np.asarray(links)
        self.alive = np.ones(len(self.links), dtype=bool)
        self.k_adh = float(k_adh)

    def kill(self, mask):
        self.alive &= ~np.asarray(mask, dtype=bool)


# ---------------------------------------------------------------------------
# time loop


@dataclass
class StepInfo:
    t: float
    net_force: float
    max_speed: float


class Simulation:
    """Forward-Euler immersed boundary integrator.

    Parameters
    ----------
    grid : EulerianGrid
    dt : float
    membrane : ShvdMembrane or LdsmMembrane, optional
    capillary : Capillary, optional
    cortex : Cortex, optional
    adhesion : Adhesion, optional
        Requires both a membrane and a cortex.
    body_force : ndarray, shape (3, eta, eta, eta), optional
        Fixed Eulerian force density added every step.
    net_force_rtol : float
        Relative tolerance of the spread-force balance check, scaled by
        the total force magnitude.
    """

    def __init__(self, grid, dt, membrane=None, capillary=None, cortex=None, adhesion=None,
                 body_force=None, net_force_rtol=1e-3):
        if not dt > 0:
            raise ValueError("dt must be positive")
        if adhesion is not None and (membrane is None or cortex is None):
            raise ValueError("adhesion needs a membrane and a cortex")
        self.grid = grid
        self.dt = float(dt)
        self.membrane = membrane
        self.capillary = capillary
        self.cortex = cortex
        self.adhesion = adhesion
        self.body_force = body_force
        self.net_force_rtol = float(net_force_rtol)
        self.t = 0.0
        self.step_index = 0
        self.u = None
        self.membrane_force = None
        self.last_correction = np.zeros(3)
        self.cortex_velocity = None
        self.timings = dict.fromkeys(STAGES, 0.0)

    def _tick(self, stage, t0):
        t1 = time.perf_counter()
        self.timings[stage] += t1 - t0
        return t1

    def _lagrangian_forces(self):
        Fs, Ps = [], []
        mem = self.membrane
        if mem is not None:
            F, P = mem.forces()
            F = np.array(F)
            if self.adhesion is not None:
                Pm = mem.eval_positions()
                dm, dc = adhesion_forces(Pm, self.cortex.X, self.adhesion.links, self.adhesion.k_adh,
                                         mem.weights, self.cortex.dA, self.adhesion.alive)
                F += dm * mem.weights[:, None]
                self._cortex_adh = dc * self.cortex.dA[:, None]
            self.membrane_force = F
            Fs.append(F)
            Ps.append(P)
        if self.cortex is not None:
            Fc = self.cortex.spring_forces()
            if self.adhesion is not None:
                Fc = Fc + self._cortex_adh
            self._cortex_force = Fc
            Fs.append(Fc)
            Ps.append(self.cortex.X)
        if self.capillary is not None:
            F, P = self.capillary.forces()
            Fs.append(F)
            Ps.append(P)
        return Fs, Ps

    def step(self):
        try:
            return self._step()
        except SimulationError:
            raise
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            raise SimulationError(str(exc), self.step_index) from exc

    def _step(self):
        grid, dt = self.grid, self.dt
        t0 = time.perf_counter()
        if self.membrane is not None and self.membrane.kind == "shvd":
            self.membrane.interpolant
            t0 = self._tick("fit", t0)
        Fs, Ps = self._lagrangian_forces()
        t0 = self._tick("force", t0)
        f = np.zeros((3,) + grid.shape)
        scale = 0.0
        if Fs:
            F = np.concatenate(Fs)
            f += spread(F, np.concatenate(Ps), grid)
            scale += np.abs(F).sum()
        if self.body_force is not None:
            f += self.body_force
            scale += np.abs(self.body_force).sum() * grid.h**3
        net = f.reshape(3, -1).sum(axis=1) * grid.h**3
        t0 = self._tick("spread", t0)
        u, _ = stokes_solve(f, grid, net_tol=max(NET_FORCE_ATOL, self.net_force_rtol * scale))
        self.u = u
        t0 = self._tick("solve", t0)
        max_speed = 0.0
        if self.membrane is not None:
            U = interpolate(u, self.membrane.velocity_positions(), grid)
            max_speed = float(np.linalg.norm(U, axis=1).max())
        if self.cortex is not None:
            Uc = interpolate(u, self.cortex.X, grid) + self._cortex_force / (self.cortex.xi * self.cortex.dA[:, None])
        if self.capillary is not None:
            Ucap = interpolate(u, self.capillary.X, grid)
        t0 = self._tick("interpolate", t0)
        if self.membrane is not None:
            self.membrane.advance(U, dt)
        if self.cortex is not None:
            self.cortex.X = self.cortex.X + dt * Uc
            self.cortex_velocity = Uc
        if self.capillary is not None:
            cap = self.capillary
            cap.X = cap.X + dt * Ucap
            uc = velocity_correction(cap.Z, cap.X, cap.w, dt)
            self.last_correction = uc
            shift = dt * uc
            cap.X = cap.X + shift
            if self.membrane is not None:
                self.membrane.translate(shift)
            if self.cortex is not None:
                self.cortex.X = self.cortex.X + shift
        self._tick("update", t0)
        self.t += dt
        self.step_index += 1
        return StepInfo(t=self.t, net_force=float(np.abs(net).max()), max_speed=max_speed)

    def fluid_velocity(self, points):
        """Velocity at arbitrary points from the last solve, in the frame of
        the capillary when one is present."""
        if self.u is None:
            raise RuntimeError("no step taken yet")
        return interpolate(self.u, points, self.grid) + self.last_correction

