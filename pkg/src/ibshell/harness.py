"""Accuracy and convergence studies written as CSV tables."""

from __future__ import annotations

import csv
import dataclasses
import math
from pathlib import Path

import numpy as np

from .analysis import fit_power_law, force_error, richardson_order
from .forces import ElasticMaterial, ShellForceModel, elastic_force_density
from .harmonics import build_basis
from .ldsm import ldsm_forces, triangulate
from .quadrature import reference_weights, unit_sphere_weights
from .scenarios import run_relax
from .shapes import Sphere, make_shape
from .sphere_points import read_point_file, shipped_point_set

__all__ = [
    "ForceErrorRow",
    "convergence_study",
    "exact_forces",
    "force_error_rows",
    "point_set",
    "run_convergence_harness",
    "write_rows",
]

SHAPE_PARAMS = {
    "ellipsoid": dict(a=1.1),
    "perturbed": dict(a=0.1, b=0.2, c=0.2, B=0.25),
}


@dataclasses.dataclass
class ForceErrorRow:
    method: str
    m: int
    n: int
    error: float
    exponent: float = math.nan


def point_set(n, points_dir=None):
    """Point set ``md<n>.txt`` from ``points_dir`` or the bundled data."""
    if points_dir is None:
        return shipped_point_set(n)
    path = Path(points_dir) / f"md{n:05d}.txt"
    if not path.exists():
        raise FileNotFoundError(f"point-set file not found: {path}")
    return read_point_file(path)


def _material(material):
    return material if material is not None else ElasticMaterial(Gs=1.0, A=1.0, sigma=1.0)


def exact_forces(shape, points, weights, material):
    """Analytic force density of ``shape`` over the unit sphere, times weights."""
    S = Sphere(1.0)
    dens = elastic_force_density(shape.jet(points.lam, points.theta), S.jet(points.lam, points.theta), material)
    return dens * weights[:, None]


def _shvd_forces(shape, ip, ev, w_ref, material):
    basis = build_basis(ip, ip.degree)
    Zj = Sphere(1.0).jet(ev.lam, ev.theta)
    model = ShellForceModel(basis, ev, Zj, w_ref, material)
    ff, _ = model.forces(shape.positions(ip.lam, ip.theta))
    return ff.force


def force_error_rows(shape_name, methods=("shvd", "ldsm"), sizes=(529, 2025, 4624, 8281),
                     m_values=(4, 81, 225), material=None, points_dir=None, shape_params=None):
    """l-infinity force errors against the analytic map.

    SHVD rows cover every (m, n) pair, LDSM rows every n. The exponent
    column holds the fitted order in the length scale ``1/sqrt(n)``
    (LDSM) or the fitted exponent of error against ``sqrt(m)`` (SHVD, per
    n), on the last row of each group.
    """
    if shape_name not in SHAPE_PARAMS:
        raise ValueError(f"shape must be one of {sorted(SHAPE_PARAMS)}, got {shape_name!r}")
    shape = make_shape(shape_name, **{**SHAPE_PARAMS[shape_name], **(shape_params or {})})
    material = _material(material)
    rows = []
    for n in sizes:
        ev = point_set(n, points_dir)
        ws = unit_sphere_weights(ev)
        Fe = exact_forces(shape, ev, ws.w, material)
        if "shvd" in methods:
            w_ref = reference_weights(ws, Sphere(1.0).jet(ev.lam, ev.theta))
            group = []
            for m in m_values:
                ip = point_set(m, points_dir)
                group.append(ForceErrorRow("shvd", m, n, force_error(_shvd_forces(shape, ip, ev, w_ref, material), Fe)))
            if len(group) > 1:
                group[-1].exponent = fit_power_law([math.sqrt(r.m) for r in group], [r.error for r in group])
            rows += group
        if "ldsm" in methods:
            mesh = triangulate(ev.xyz)
            F = ldsm_forces(mesh, material, shape.positions(ev.lam, ev.theta))
            rows.append(ForceErrorRow("ldsm", 0, n, force_error(F, Fe)))
    ld = [r for r in rows if r.method == "ldsm"]
    if len(ld) > 1:
        ld[-1].exponent = fit_power_law([1.0 / math.sqrt(r.n) for r in ld], [r.error for r in ld])
    return rows


def write_rows(path, rows):
    fields = [f.name for f in dataclasses.fields(ForceErrorRow)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for r in rows:
            w.writerow([r.method, r.m, r.n, f"{r.error:.17g}", f"{r.exponent:.17g}"])


def run_convergence_harness(shape, methods=("shvd", "ldsm"), sizes=(529, 2025, 4624, 8281), out=None, **kw):
    """Force-error table for ``shape``; written to ``out`` when given."""
    rows = force_error_rows(shape, methods, sizes, **kw)
    if out is not None:
        write_rows(out, rows)
    return rows


def convergence_study(cfg, methods=("shvd", "ldsm"), observer=None):
    """Final ``d_max`` of the relaxation on successively finer grids.

    Grid ``i`` uses ``eta = cfg.etas[i]``, ``n = cfg.sizes[i]`` and
    ``dt = 1/(2 eta)``. Returns one dict per method with the values, the
    successive differences and the Richardson order in ``h``.
    """
    if len(cfg.etas) != len(cfg.sizes):
        raise ValueError("etas and sizes differ in length")
    out = []
    for method in methods:
        d, h = [], []
        for eta, n in zip(cfg.etas, cfg.sizes):
            c = dataclasses.replace(cfg, method=method, eta=eta, n=n, dt=1.0 / (2.0 * eta), output_every=10**9)
            traj = run_relax(c, observer=observer)
            d.append(traj.series["d_max"][-1])
            h.append(2.0 * cfg.L / eta)
        diffs = np.abs(np.diff(d))
        order = richardson_order(h, d) if len(d) == 3 else math.nan
        out.append(dict(method=method, eta=list(cfg.etas), n=list(cfg.sizes), h=h, d_max=d,
                        differences=diffs.tolist(), order=order))
    return out
