"""Nonnegative quadrature weights on the unit sphere and on reference shapes.

Weights solve ``Y^T w = sqrt(4 pi) e_1`` in the nonnegative least-squares
sense, so that every harmonic of degree 1..N integrates to zero and the
constant integrates to 4 pi. Forces built as density times weight then sum
to zero up to the quadrature error.
"""

from __future__ import annotations

import hashlib
import math
import os
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .harmonics import harmonic_matrices

__all__ = [
    "DegenerateSurfaceError",
    "NNLSConvergenceError",
    "QuadratureWeights",
    "integrate",
    "nnls_solve",
    "reference_weights",
    "unit_sphere_weights",
]

POOR_RESIDUAL = 1e-6


class NNLSConvergenceError(RuntimeError):
    """Iteration cap exceeded; ``best`` holds the last feasible iterate."""

    def __init__(self, msg, best):
        super().__init__(msg)
        self.best = best


class DegenerateSurfaceError(ValueError):
    pass


def _lstsq(A, b):
    return scipy.linalg.lstsq(A, b, lapack_driver="gelsy", check_finite=False)[0]


def nnls_solve(A, b, tol=None, init_passive=None, maxiter=None):
    """Lawson-Hanson active-set solution of min |Ax - b| s.t. x >= 0.

    Parameters
    ----------
    A : ndarray, shape (p, q)
    b : ndarray, shape (p,)
    tol : float, optional
        Dual-feasibility tolerance. Defaults to a multiple of machine
        precision scaled by the problem size.
    init_passive : array_like of bool, optional
        Starting guess for the set of positive variables. When omitted the
        variables that are positive in the unconstrained least-squares
        solution are used, which makes well-posed square systems with a
        positive solution terminate after one solve.
    maxiter : int, optional
        Outer iteration cap, ``3 q`` by default.

    Returns
    -------
    x : ndarray, shape (q,)
    residual : float
        Euclidean norm of ``A x - b``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.shape != (A.shape[0],):
        raise ValueError("A must be (p, q) and b must be (p,)")
    p, q = A.shape
    if p < 1 or q < 1:
        raise ValueError("empty system")
    if maxiter is None:
        maxiter = 3 * q
    if tol is None:
        tol = 10.0 * max(p, q) * np.finfo(float).eps * max(1.0, np.abs(A).max()) * max(1.0, np.abs(b).max())

    # Warm start: shrink a guessed passive set until its least-squares
    # solution is strictly positive. The result is a valid Lawson-Hanson
    # state (x_P > 0 optimal on P, x_Z = 0).
    if init_passive is None:
        z = _lstsq(A, b)
        passive = z > 0
    else:
        passive = np.asarray(init_passive, dtype=bool).copy()
    x = np.zeros(q)
    while passive.any():
        zp = _lstsq(A[:, passive], b)
        if np.all(zp > 0):
            x[passive] = zp
            break
        idx = np.flatnonzero(passive)
        passive[idx[zp <= 0]] = False

    for _ in range(maxiter):
        w = A.T @ (b - A @ x)
        cand = np.flatnonzero(~passive & (w > tol))
        if cand.size == 0:
            return x, float(np.linalg.norm(A @ x - b))
        passive[cand[np.argmax(w[cand])]] = True
        while True:
            idx = np.flatnonzero(passive)
            z = np.zeros(q)
            z[idx] = _lstsq(A[:, idx], b)
            if np.all(z[idx] > 0):
                x = z
                break
            neg = idx[z[idx] <= 0]
            ratios = x[neg] / (x[neg] - z[neg])
            alpha = ratios.min()
            x = x + alpha * (z - x)
            # the blocking variable leaves exactly, others if rounded to zero
            x[neg[np.argmin(ratios)]] = 0.0
            passive &= x > 0
            x[~passive] = 0.0
    raise NNLSConvergenceError(f"NNLS exceeded {maxiter} outer iterations", x)


@dataclass(frozen=True)
class QuadratureWeights:
    """Area weights with their NNLS residual and exactness degree.

    ``theta`` records the node latitudes so the weights can be transferred
    to other reference shapes.
    """

    w: np.ndarray
    residual: float
    degree: int | None
    theta: np.ndarray | None = None
    warning: str | None = None

    @property
    def total(self):
        return float(self.w.sum())

    def __len__(self):
        return len(self.w)


_MEMO = {}


def _cache_dir():
    d = os.environ.get("IBSHELL_CACHE")
    if d == "":
        return None
    return Path(d) if d else Path.home() / ".cache" / "ibshell"


def unit_sphere_weights(points, N=None, use_cache=True):
    """Nonnegative weights integrating harmonics of degree <= N exactly.

    Parameters
    ----------
    points : SpherePointSet
    N : int, optional
        Exactness degree; defaults to ``points.degree``.
    use_cache : bool
        Reuse weights computed earlier for the same nodes and degree, from
        memory or from the on-disk cache (``$IBSHELL_CACHE``, empty string
        disables it).
    """
    if N is None:
        N = points.degree
        if N is None:
            raise ValueError("exactness degree required for a non-square node count")
    if points.n < (N + 1) ** 2:
        raise ValueError(f"degree {N} needs at least {(N + 1) ** 2} nodes, got {points.n}")
    key = hashlib.sha256(np.ascontiguousarray(points.xyz).tobytes() + str(N).encode()).hexdigest()[:24]
    if use_cache and key in _MEMO:
        return _MEMO[key]
    cdir = _cache_dir() if use_cache else None
    cfile = cdir / f"w_{key}.npz" if cdir else None
    if cfile is not None and cfile.exists():
        d = np.load(cfile)
        w, res = d["w"], float(d["residual"])
    else:
        Y = harmonic_matrices(N, points.lam, points.theta)["v"]
        b = np.zeros(Y.shape[1])
        b[0] = math.sqrt(4.0 * math.pi)
        w, res = nnls_solve(Y.T, b)
        del Y
        if cfile is not None:
            try:
                cdir.mkdir(parents=True, exist_ok=True)
                tmp = cfile.with_suffix(f".{os.getpid()}.tmp.npz")
                np.savez(tmp, w=w, residual=res)
                os.replace(tmp, cfile)
            except OSError:
                pass
    note = None
    if res > POOR_RESIDUAL:
        note = f"NNLS residual {res:.3e} exceeds {POOR_RESIDUAL:g}; point set is poor for degree {N}"
        warnings.warn(note, stacklevel=2)
    w.setflags(write=False)
    out = QuadratureWeights(w=w, residual=res, degree=N, theta=np.asarray(points.theta), warning=note)
    if use_cache:
        _MEMO[key] = out
    return out


def _det_metric(jet):
    E = np.einsum("ij,ij->i", jet.d_l, jet.d_l)
    F = np.einsum("ij,ij->i", jet.d_l, jet.d_t)
    G = np.einsum("ij,ij->i", jet.d_t, jet.d_t)
    return E * G - F * F


def reference_weights(w_sphere, Z, sphere_det=None):
    """Transfer unit-sphere weights to a reference surface.

    ``w_L = sqrt(det G0(Z) / det G0(sphere)) w``, with the unit-sphere
    metric determinant ``cos(theta)**2`` taken from the weights' node
    latitudes unless ``sphere_det`` is given.
    """
    if Z.n != len(w_sphere):
        raise ValueError(f"{Z.n} jets for {len(w_sphere)} weights")
    if sphere_det is None:
        if w_sphere.theta is None:
            raise ValueError("weights carry no node latitudes; pass sphere_det")
        sphere_det = np.cos(w_sphere.theta) ** 2
    dZ = _det_metric(Z)
    bad = np.flatnonzero(~(dZ > 0))
    if bad.size:
        raise DegenerateSurfaceError(f"reference metric determinant nonpositive at node {bad[0]}")
    bad = np.flatnonzero(~(sphere_det > 0))
    if bad.size:
        raise DegenerateSurfaceError(f"sphere metric determinant nonpositive at node {bad[0]}")
    w = np.sqrt(dZ / sphere_det) * w_sphere.w
    w.setflags(write=False)
    return QuadratureWeights(
        w=w, residual=w_sphere.residual, degree=w_sphere.degree,
        theta=w_sphere.theta, warning=w_sphere.warning,
    )


def integrate(values, weights):
    """Weighted sum of scalar (n,) or vector (n, d) samples."""
    w = weights.w if isinstance(weights, QuadratureWeights) else np.asarray(weights)
    values = np.asarray(values, dtype=float)
    if values.shape[0] != len(w):
        raise ValueError(f"{values.shape[0]} samples for {len(w)} weights")
    return np.tensordot(w, values, axes=(0, 0))
