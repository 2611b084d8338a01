"""Scenario assembly: ellipsoid relaxation, red blood cell in a capillary,
and membrane blebbing."""

from __future__ import annotations

import logging
import math
import time

import numpy as np
from scipy.spatial.transform import Rotation

from .analysis import Trajectory, bleb_size, face_sign_changes, radial_extremes
from .fluid import EulerianGrid
from .forces import ElasticMaterial, ShellForceModel
from .harmonics import build_basis
from .ldsm import TriMesh, triangulate
from .quadrature import reference_weights, unit_sphere_weights
from .shapes import RBCShape, Sphere, make_shape
from .simulator import (
    Adhesion,
    Capillary,
    Cortex,
    LdsmMembrane,
    ShvdMembrane,
    Simulation,
    capillary_mesh,
)
from .sphere_points import SHIPPED_SIZES, SpherePointSet, generate_fallback_points, read_point_file, shipped_point_set

__all__ = [
    "aligned_points",
    "background_force",
    "build_membrane",
    "load_points",
    "material_from_config",
    "run_bleb",
    "run_relax",
    "run_rbc",
]

log = logging.getLogger(__name__)


def load_points(n, path=None):
    """Point set from a file, the bundled sets, or the spiral fallback."""
    if path is not None:
        return read_point_file(path)
    if n in SHIPPED_SIZES:
        return shipped_point_set(n)
    log.warning("no bundled set with %d nodes; using the spiral fallback", n)
    return generate_fallback_points(n)


def aligned_points(points, target=(1.0, 0.0, 0.0)):
    """Rigidly rotate a point set so that its node nearest ``target`` lies on it.

    Returns the rotated set and the index of that node.
    """
    t = np.asarray(target, dtype=float)
    t = t / np.linalg.norm(t)
    k = int(np.argmax(points.xyz @ t))
    rot, _ = Rotation.align_vectors([t], [points.xyz[k]])
    xyz = rot.apply(points.xyz)
    xyz[k] = t
    return SpherePointSet.from_xyz(xyz, name=f"{points.name}-aligned"), k


def material_from_config(cfg):
    return ElasticMaterial(Gs=cfg.Gs, A=cfg.A, sigma=cfg.sigma, k_bend=cfg.k_bend)


def build_membrane(method, material, ref_shape, init_shape, m, n, center=(0.0, 0.0, 0.0),
                   interp_points=None, eval_points=None):
    """SHVD or LDSM membrane with reference map ``ref_shape``.

    The initial configuration is ``init_shape`` translated by ``center``.
    For LDSM the evaluation set is rotated so a vertex sits at the material
    point (lam, theta) = (0, 0); its index is stored as ``tracked``.
    """
    center = np.asarray(center, dtype=float)
    ev = eval_points if eval_points is not None else load_points(n)
    if method == "shvd":
        ip = interp_points if interp_points is not None else load_points(m)
        if ip.degree is None:
            raise ValueError(f"interpolation set of {ip.n} nodes is not (N+1)^2")
        basis = build_basis(ip, ip.degree)
        Zj = ref_shape.jet(ev.lam, ev.theta)
        w = reference_weights(unit_sphere_weights(ev), Zj)
        model = ShellForceModel(basis, ev, Zj, w, material)
        mem = ShvdMembrane(model, init_shape.positions(ip.lam, ip.theta) + center)
        mem.tracked = None
        return mem
    if method == "ldsm":
        ev, k = aligned_points(ev)
        Z = ref_shape.positions(ev.lam, ev.theta)
        tris = triangulate(ev.xyz).tris
        X0 = init_shape.positions(ev.lam, ev.theta) + center
        mem = LdsmMembrane(TriMesh(X0, Z, tris), material, ev)
        mem.tracked = k
        return mem
    raise ValueError(f"unknown method {method!r}")


def tracked_point(mem):
    """Current position of the material point (lam, theta) = (0, 0)."""
    if mem.kind == "shvd":
        return mem.material_points(np.zeros(1), np.zeros(1))[0]
    return mem.X[mem.tracked]


def _timed_loop(sim, steps, on_output, every, observer=None):
    t0 = time.perf_counter()
    for k in range(steps):
        info = sim.step()
        if (k + 1) % every == 0 or k + 1 == steps:
            on_output(info)
        if observer is not None:
            observer(sim, info)
    return time.perf_counter() - t0


def _membrane_row(mem, info=None):
    X = mem.eval_positions()
    r_max, r_min = radial_extremes(X, mem.weights)
    row = dict(r_max=r_max, r_min=r_min, volume=mem.volume(), area=mem.area())
    if info is not None:
        row.update(max_speed=info.max_speed, net_force=info.net_force)
    return row


# ---------------------------------------------------------------------------
# ellipsoid relaxation


def run_relax(cfg, observer=None, eval_points=None, interp_points=None):
    """Relaxation of a prestretched shell toward its reference sphere.

    Records the largest and smallest distance from the center of mass, the
    enclosed volume and ``d_max``, the x-displacement of the material point
    initially at the largest x relative to the center of mass.
    """
    grid = EulerianGrid(cfg.L, cfg.eta, cfg.mu)
    init = make_shape(cfg.shape, a=cfg.a, b=cfg.b, c=cfg.c, B=cfg.B, Vf=cfg.Vf)
    mem = build_membrane(cfg.method, material_from_config(cfg), Sphere(1.0), init, cfg.m, cfg.n,
                         interp_points=interp_points, eval_points=eval_points)
    sim = Simulation(grid, cfg.time_step, membrane=mem, net_force_rtol=cfg.net_force_rtol)
    traj = Trajectory(meta=dict(scenario="relax", method=cfg.method))

    def d_rel():
        return tracked_point(mem)[0] - mem.center_of_mass()[0]

    d0 = d_rel()
    traj.record(0.0, d_max=0.0, **_membrane_row(mem), max_speed=0.0, net_force=0.0)

    def out(info):
        traj.record(sim.t, d_max=d_rel() - d0, **_membrane_row(mem, info))

    traj.summary["wall_time"] = _timed_loop(sim, cfg.steps, out, cfg.output_every, observer)
    traj.final_state = mem
    traj.simulation = sim
    return traj


# ---------------------------------------------------------------------------
# red blood cell in a capillary


def background_force(grid, f0, radius, half_length):
    """Axial force density ``f0`` inside the capillary and a uniform
    opposite density outside, with exactly zero grid integral."""
    X, Y, Z = grid.mesh()
    inside = (Y * Y + Z * Z < radius * radius) & (np.abs(X) <= half_length)
    n_in = int(inside.sum())
    n_out = inside.size - n_in
    f = np.zeros((3,) + grid.shape)
    f[0] = np.where(inside, f0, -f0 * n_in / n_out)
    f[0] -= f[0].mean()
    return f


def centerline_speed(sim, half_length, samples=65):
    xs = np.linspace(-half_length, half_length, samples)
    P = np.stack([xs, np.zeros_like(xs), np.zeros_like(xs)], 1)
    return float(sim.fluid_velocity(P)[:, 0].max())


def run_rbc(cfg, observer=None, eval_points=None, interp_points=None):
    """Red blood cell driven through a tethered capillary by a body force."""
    grid = EulerianGrid(cfg.L, cfg.eta, cfg.mu)
    spacing = cfg.capillary_spacing or 0.5 * grid.h
    nodes, w, tris = capillary_mesh(cfg.capillary_radius, cfg.capillary_half_length, spacing)
    cap = Capillary(nodes, w, cfg.k_teth, tris)
    mem = None
    if cfg.cell:
        rbc = RBCShape(cfg.R_rbc)
        mem = build_membrane(cfg.method, material_from_config(cfg), rbc, rbc, cfg.m, cfg.n,
                             center=(cfg.cell_x, 0.0, 0.0), interp_points=interp_points,
                             eval_points=eval_points)
    body = background_force(grid, cfg.background_force, cfg.capillary_radius, cfg.capillary_half_length)
    sim = Simulation(grid, cfg.time_step, membrane=mem, capillary=cap, body_force=body,
                     net_force_rtol=cfg.net_force_rtol)
    traj = Trajectory(meta=dict(scenario="rbc", method=cfg.method, cell=cfg.cell))
    area0 = mem.area() if mem is not None else None
    faces = ("trailing", "leading") if mem is not None and mem.kind == "shvd" else ()
    for face in faces:
        traj.summary[f"{face}_sign_changes_initial"] = face_sign_changes(mem, face)

    def out(info):
        row = dict(max_speed=info.max_speed, net_force=info.net_force,
                   centerline_speed=centerline_speed(sim, cfg.capillary_half_length),
                   capillary_drift=float(np.abs(cap.X - cap.Z).max()))
        if mem is not None:
            row.update(_membrane_row(mem, info))
            row["area_change"] = row["area"] / area0 - 1.0
            row["com_x"] = float(mem.center_of_mass()[0])
            for face in faces:
                row[f"{face}_sign_changes"] = face_sign_changes(mem, face)
        traj.record(sim.t, **row)

    traj.summary["wall_time"] = _timed_loop(sim, cfg.steps, out, cfg.output_every, observer)
    traj.summary["centerline_speed"] = traj.series["centerline_speed"][-1]
    if mem is not None:
        traj.summary["area_drift"] = float(np.abs(traj.array("area_change")).max())
        for face in faces:
            traj.summary[f"{face}_sign_changes"] = int(traj.series[f"{face}_sign_changes"][-1])
    traj.final_state = mem
    traj.simulation = sim
    return traj


# ---------------------------------------------------------------------------
# bleb


def build_bleb(cfg, eval_points=None):
    """Membrane, cortex and adhesion links of the blebbing cell."""
    grid = EulerianGrid(cfg.L, cfg.eta, cfg.mu)
    ev = eval_points if eval_points is not None else load_points(cfg.n)
    ip = ev if cfg.m == cfg.n else load_points(cfg.m)
    if cfg.method != "shvd":
        raise ValueError("the bleb model uses the SHVD membrane")
    sphere = Sphere(cfg.r_mem)
    mem = build_membrane("shvd", material_from_config(cfg), sphere, sphere, cfg.m, cfg.n,
                         interp_points=ip, eval_points=ev)
    tris = triangulate(ev.xyz).tris
    cortex = Cortex(cfg.r_cortex * ev.xyz, tris, cfg.k_cortex, cfg.xi)
    links = np.stack([np.arange(ev.n), np.arange(ev.n)], 1)
    adhesion = Adhesion(links, cfg.k_adh)
    sim = Simulation(grid, cfg.time_step, membrane=mem, cortex=cortex, adhesion=adhesion,
                     net_force_rtol=cfg.net_force_rtol)
    return sim, ev


def bleb_region(points, angle):
    """Nodes whose polar angle from +z is at most ``angle``."""
    return (0.5 * math.pi - points.theta) <= angle


def run_bleb(cfg, observer=None, eval_points=None):
    """Equilibrate with all links, then detach the polar cap and expand.

    Equilibration ends once the largest membrane speed is at most
    ``cfg.equil_speed``, or after ``cfg.t_equil`` at the latest. Time is
    measured from bleb initiation; equilibration rows have t <= 0. With
    ``cfg.bleb`` false no links are removed (control run).
    """
    sim, ev = build_bleb(cfg, eval_points)
    mem = sim.membrane
    traj = Trajectory(meta=dict(scenario="bleb", bleb=cfg.bleb))
    V0 = mem.volume()
    rows = []

    def out(info):
        H = mem.mean_curvature()
        top = int(np.argmax(mem.eval_positions()[:, 2]))
        rows.append((sim.t, dict(
            bleb_size=bleb_size(mem, cfg.bleb_angle),
            rel_volume=100.0 * (mem.volume() - V0) / V0,
            max_speed=info.max_speed,
            cortex_speed=float(np.linalg.norm(sim.cortex_velocity, axis=1).max()),
            net_force=info.net_force,
            H_top=float(H[top]),
            links_alive=int(sim.adhesion.alive.sum()),
        )))

    t0 = time.perf_counter()
    n_max = int(round(cfg.t_equil / cfg.time_step))
    info = None
    for k in range(n_max):
        info = sim.step()
        if observer is not None:
            observer(sim, info)
        settled = info.max_speed <= cfg.equil_speed
        if (k + 1) % cfg.output_every == 0 or settled or k + 1 == n_max:
            out(info)
        if settled:
            break
    t_init = sim.t
    traj.summary["equilibration_time"] = t_init
    traj.summary["equilibration_speed"] = info.max_speed if info is not None else math.nan
    if info is not None and info.max_speed > cfg.equil_speed:
        log.warning("equilibration stopped at t=%.3g with speed %.3g above %.3g", t_init, info.max_speed,
                    cfg.equil_speed)
    # bleb size is measured from its value at initiation
    b_init = bleb_size(mem, cfg.bleb_angle)
    if cfg.bleb:
        sim.adhesion.kill(bleb_region(ev, cfg.bleb_angle))
    traj.summary["links_removed"] = int((~sim.adhesion.alive).sum())
    _timed_loop(sim, cfg.steps, out, cfg.output_every, observer)
    traj.summary["wall_time"] = time.perf_counter() - t0
    for t, row in rows:
        row["bleb_size"] -= b_init
        traj.record(t - t_init, **row)
    after = np.asarray(traj.t) > 0
    traj.summary["max_speed_after_equilibration"] = float(traj.array("max_speed")[after].max())
    traj.summary["volume_drift_pct"] = float(np.abs(traj.array("rel_volume")[after]).max())
    traj.summary["bleb_size_final"] = traj.series["bleb_size"][-1]
    traj.final_state = mem
    traj.simulation = sim
    return traj
