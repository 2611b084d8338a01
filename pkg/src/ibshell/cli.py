"""Command-line front end.

Heavy modules are imported inside the subcommands so that ``--threads``
can set the thread-count environment variables before numpy loads.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__

__all__ = ["RunManifest", "build_parser", "main"]

SUBCOMMANDS = ("weights", "forces", "relax", "rbc", "bleb", "converge")
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


@dataclass
class RunManifest:
    """Record of one CLI run, written at start and rewritten when done."""

    command: str
    config: dict
    version: str = __version__
    status: str = "running"
    seed: int | None = None
    threads: int | None = None
    python: str = field(default_factory=platform.python_version)
    point_sets: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    error: str | None = None

    def write(self, out_dir):
        path = Path(out_dir) / "manifest.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default) + "\n")
        os.replace(tmp, path)
        return path


def _json_default(obj):
    try:
        return obj.item()
    except AttributeError:
        return str(obj)


def build_parser():
    parser = argparse.ArgumentParser(prog="ibshell", description="Immersed boundary simulations of elastic shells.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "weights": "quadrature weights of a point set",
        "forces": "force-error table against the analytic maps",
        "relax": "ellipsoid relaxation",
        "rbc": "red blood cell in a capillary",
        "bleb": "membrane bleb expansion",
        "converge": "d_max grid convergence study",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", type=Path, help="key = value configuration file")
        p.add_argument("--points", type=Path,
                       help="point-set file (a directory of md<n>.txt files for forces)")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--threads", type=int, help="thread count for numerical libraries")
        p.add_argument("--seed", type=int, help="seed for randomized self-tests")
    return parser


def _set_threads(k):
    if k is None:
        return
    if k < 1:
        raise SystemExit("--threads must be at least 1")
    for var in THREAD_VARS:
        os.environ[var] = str(k)


def _load_config(args):
    from .config import parse_config

    text = args.config.read_text() if args.config else ""
    return parse_config(text, scenario=args.command)


class _Stage:
    def __init__(self, timings, name):
        self.timings, self.name = timings, name

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.timings[self.name] = self.timings.get(self.name, 0.0) + time.perf_counter() - self.t0


def _used_sizes(command, cfg):
    if command == "forces":
        return {*cfg.sizes, *cfg.m_values}
    if command == "converge":
        return {cfg.m, *cfg.sizes}
    if command == "weights":
        return {cfg.n}
    return {cfg.m, cfg.n}


def _point_checksums(command, cfg, points_path):
    from .sphere_points import SHIPPED_SIZES, shipped_point_set

    out = {}
    if points_path is not None and points_path.is_file():
        from .io import file_checksum

        out[points_path.name] = file_checksum(points_path)
    for n in sorted(_used_sizes(command, cfg)):
        if n in SHIPPED_SIZES:
            try:
                out[f"md{n:05d}.txt"] = shipped_point_set(n).checksum()
            except FileNotFoundError:
                pass
    return out


def _membrane_snapshot(sim):
    import numpy as np

    mem = sim.membrane
    F = sim.membrane_force
    if F is None:
        F = np.asarray(mem.forces()[0])
    dens = F / mem.weights[:, None]
    H = mem.mean_curvature() if mem.kind == "shvd" else np.full(len(dens), np.nan)
    return mem.points.lam, mem.points.theta, mem.eval_positions(), dens, H


def _snapshot_observer(cfg, out_dir, written):
    from .io import write_snapshot

    snap_dir = Path(out_dir) / "snapshots"

    def observe(sim, info):
        if cfg.snapshot_every and sim.step_index % cfg.snapshot_every == 0 and sim.membrane is not None:
            snap_dir.mkdir(exist_ok=True)
            path = snap_dir / f"snap_{sim.step_index:07d}.txt"
            write_snapshot(path, *_membrane_snapshot(sim), t=sim.t)
            written.append(path)

    return observe


def _write_trajectory(traj, out_dir, manifest, prefix=""):
    from .analysis import analyze
    from .io import write_snapshot, write_timeseries

    out_dir = Path(out_dir)
    ts = write_timeseries(out_dir / f"{prefix}timeseries.csv", traj.t, traj.series)
    paths = [ts]
    sim = getattr(traj, "simulation", None)
    if sim is not None and sim.membrane is not None and sim.step_index > 0:
        paths.append(write_snapshot(out_dir / f"{prefix}final_snapshot.txt", *_membrane_snapshot(sim), t=sim.t))
    if sim is not None:
        for k, v in sim.timings.items():
            manifest.timings[f"{prefix}step.{k}"] = manifest.timings.get(f"{prefix}step.{k}", 0.0) + v
    summary = analyze(traj)
    manifest.summary.update({f"{prefix}{k}": v for k, v in summary.items()})
    return paths


def _read_points(path):
    if path is None:
        return None
    from .sphere_points import read_point_file

    return read_point_file(path)


def cmd_weights(cfg, args, manifest, out_dir):
    import numpy as np

    from .quadrature import unit_sphere_weights
    from .scenarios import load_points

    pts = _read_points(args.points) or load_points(cfg.n)
    N = pts.degree if pts.degree is not None else int(np.sqrt(pts.n)) - 1
    with _Stage(manifest.timings, "weights"):
        w = unit_sphere_weights(pts, N)
    path = out_dir / "weights.csv"
    np.savetxt(path, np.column_stack([pts.lam, pts.theta, w.w]), fmt="%.17g", delimiter=",",
               header="lam,theta,w", comments="")
    manifest.summary.update(n=pts.n, degree=N, residual=w.residual, min_weight=float(w.w.min()),
                            total=w.total)
    return [path]


def cmd_forces(cfg, args, manifest, out_dir):
    from .forces import ElasticMaterial
    from .harness import run_convergence_harness

    params = dict(a=cfg.a, b=cfg.b, c=cfg.c) if cfg.shape == "ellipsoid" else {}
    material = ElasticMaterial(Gs=cfg.Gs, A=cfg.A, sigma=cfg.sigma)
    path = out_dir / "forces.csv"
    with _Stage(manifest.timings, "forces"):
        rows = run_convergence_harness(cfg.shape, sizes=cfg.sizes, out=path, m_values=cfg.m_values,
                                       material=material, points_dir=args.points, shape_params=params)
    for r in rows:
        if r.exponent == r.exponent:
            manifest.summary[f"{r.method}_n{r.n}_exponent"] = r.exponent
    return [path]


def cmd_relax(cfg, args, manifest, out_dir):
    from .scenarios import run_relax

    snaps = []
    with _Stage(manifest.timings, "run"):
        traj = run_relax(cfg, observer=_snapshot_observer(cfg, out_dir, snaps), eval_points=_read_points(args.points))
    with _Stage(manifest.timings, "write"):
        return _write_trajectory(traj, out_dir, manifest) + snaps


def cmd_rbc(cfg, args, manifest, out_dir):
    from .scenarios import run_rbc

    snaps = []
    with _Stage(manifest.timings, "run"):
        traj = run_rbc(cfg, observer=_snapshot_observer(cfg, out_dir, snaps), eval_points=_read_points(args.points))
    with _Stage(manifest.timings, "write"):
        return _write_trajectory(traj, out_dir, manifest) + snaps


def cmd_bleb(cfg, args, manifest, out_dir):
    from .scenarios import run_bleb

    snaps = []
    with _Stage(manifest.timings, "run"):
        traj = run_bleb(cfg, observer=_snapshot_observer(cfg, out_dir, snaps), eval_points=_read_points(args.points))
    with _Stage(manifest.timings, "write"):
        return _write_trajectory(traj, out_dir, manifest) + snaps


def cmd_converge(cfg, args, manifest, out_dir):
    import csv

    from .harness import convergence_study

    with _Stage(manifest.timings, "run"):
        results = convergence_study(cfg, methods=_methods(args.config, cfg))
    path = out_dir / "converge.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "eta", "n", "h", "d_max", "order"])
        for r in results:
            for i in range(len(r["eta"])):
                w.writerow([r["method"], r["eta"][i], r["n"][i], f"{r['h'][i]:.17g}", f"{r['d_max'][i]:.17g}",
                            f"{r['order']:.17g}"])
            manifest.summary[f"{r['method']}_order"] = r["order"]
    return [path]


def _methods(config_path, cfg):
    """Both methods unless the config file names one."""
    if config_path is not None:
        keys = (line.split("=", 1)[0].strip() for line in config_path.read_text().splitlines() if "=" in line)
        if "method" in keys:
            return (cfg.method,)
    return ("shvd", "ldsm")


COMMANDS = {
    "weights": cmd_weights,
    "forces": cmd_forces,
    "relax": cmd_relax,
    "rbc": cmd_rbc,
    "bleb": cmd_bleb,
    "converge": cmd_converge,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    _set_threads(args.threads)
    from .config import ConfigError

    try:
        cfg = _load_config(args)
    except (ConfigError, OSError) as exc:
        print(f"ibshell: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(command=args.command, config=cfg.to_dict(), seed=args.seed, threads=args.threads)
    manifest.point_sets = _point_checksums(args.command, cfg, args.points)
    manifest.write(out_dir)
    t0 = time.perf_counter()
    try:
        paths = COMMANDS[args.command](cfg, args, manifest, out_dir)
    except Exception as exc:
        manifest.status = "failed"
        manifest.error = f"{type(exc).__name__}: {exc}"
        manifest.timings["total"] = time.perf_counter() - t0
        manifest.write(out_dir)
        print(f"ibshell: {manifest.error}", file=sys.stderr)
        return 1
    from .io import file_checksum

    manifest.outputs = {str(Path(p).relative_to(out_dir)): file_checksum(p) for p in paths}
    manifest.timings["total"] = time.perf_counter() - t0
    manifest.status = "complete"
    manifest.write(out_dir)
    print(json.dumps(manifest.summary, indent=2, sort_keys=True, default=_json_default))
    return 0


if __name__ == "__main__":
    sys.exit(main())
