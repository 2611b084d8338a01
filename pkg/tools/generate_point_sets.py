"""Generate the bundled unit-sphere node sets.

Starts from a spiral set and increases log|det Y| (the interpolation
matrix of degree N on (N+1)**2 nodes) by bounded gradient steps followed
by L-BFGS for the smaller sets. The result is rotated by a fixed generic
rotation so that no node lies near a pole; |det Y| is rotation invariant.

Usage: python tools/generate_point_sets.py [N ...]
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.optimize
from scipy.spatial.transform import Rotation

from ibshell.harmonics import harmonic_matrices
from ibshell.sphere_points import SHIPPED_SIZES, generate_fallback_points

OUT = Path(__file__).resolve().parents[1] / "src" / "ibshell" / "data"
CHUNK = 1024


def _angles(U):
    return np.arctan2(U[:, 1], U[:, 0]), np.arcsin(np.clip(U[:, 2], -1.0, 1.0))


def neg_logdet(x, N):
    P = x.reshape(-1, 3)
    r = np.linalg.norm(P, axis=1)
    U = P / r[:, None]
    lam, th = _angles(U)
    Y = harmonic_matrices(N, lam, th)["v"]
    lu, piv = scipy.linalg.lu_factor(Y, overwrite_a=True, check_finite=False)
    del Y
    val = np.sum(np.log(np.abs(np.diag(lu))))
    Yinv = scipy.linalg.lu_solve((lu, piv), np.eye(len(lu)), check_finite=False)
    del lu
    n = len(U)
    gl = np.empty(n)
    gt = np.empty(n)
    for s in range(0, n, CHUNK):
        sl = slice(s, min(s + CHUNK, n))
        D = harmonic_matrices(N, lam[sl], th[sl], derivs=1)
        gl[sl] = np.einsum("ij,ji->i", D["l"], Yinv[:, sl])
        gt[sl] = np.einsum("ij,ji->i", D["t"], Yinv[:, sl])
    ct = np.cos(th)
    el = np.stack([-np.sin(lam), np.cos(lam), np.zeros(n)], axis=1)
    et = np.stack([-np.sin(th) * np.cos(lam), -np.sin(th) * np.sin(lam), ct], axis=1)
    g = (gl / ct)[:, None] * el + gt[:, None] * et
    return -val, -(g / r[:, None]).ravel()


def warm_steps(x, N, steps, h):
    f, g = neg_logdet(x, N)
    a = 1.0
    for _ in range(steps):
        G = g.reshape(-1, 3)
        gm = np.linalg.norm(G, axis=1).max()
        while True:
            xn = x.reshape(-1, 3) - a * h * G / gm
            xn = (xn / np.linalg.norm(xn, axis=1)[:, None]).ravel()
            fn, gn = neg_logdet(xn, N)
            if fn < f:
                x, f, g = xn, fn, gn
                a = min(1.0, 1.5 * a)
                break
            a *= 0.5
            if a < 1e-6:
                return x
    return x


def generate(N):
    n = (N + 1) ** 2
    x = generate_fallback_points(n).xyz.ravel()
    h = 0.1 * math.sqrt(4 * math.pi / n)
    x = warm_steps(x, N, 40, h)
    maxiter = 400 if n <= 2025 else 0
    if maxiter:
        res = scipy.optimize.minimize(
            neg_logdet, x, args=(N,), jac=True, method="L-BFGS-B",
            options=dict(maxiter=maxiter, gtol=1e-10, ftol=1e-15),
        )
        x = res.x
    U = x.reshape(-1, 3)
    U = U / np.linalg.norm(U, axis=1)[:, None]
    Q = Rotation.from_euler("zyx", [0.3141592, 0.5772156, 0.2718281]).as_matrix()
    return U @ Q.T


def main(argv):
    degrees = [int(a) for a in argv] or [math.isqrt(n) - 1 for n in SHIPPED_SIZES]
    for N in degrees:
        t0 = time.time()
        U = generate(N)
        n = len(U)
        fname = OUT / f"md{n:05d}.txt"
        with open(fname, "w") as fh:
            fh.write(f"# {n} nodes, degree {N}, log-determinant ascent from a spiral start\n")
            for p in U:
                fh.write(f"{p[0]:.17e} {p[1]:.17e} {p[2]:.17e}\n")
        print(f"N={N} n={n} {time.time() - t0:.1f}s -> {fname.name}", flush=True)


if __name__ == "__main__":
    main(sys.argv[1:])
