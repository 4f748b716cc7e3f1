"""Command-line entry point.

    lvsurgery simulate     one trajectory -> CSV
    lvsurgery classify     trajectory -> JSON report (+ CSV)
    lvsurgery fixed-points parameters -> JSON list of equilibria
    lvsurgery sweep        (C, B/A) grid -> CSV
    lvsurgery morph        surgery meshes -> OBJ files
    lvsurgery figures      reference sphere / torus runs -> CSV + SVG

Every option may also come from a JSON file given with ``--config``; flags
on the command line win over file values.  Exit status is 0 on success, 1
for invalid input and 2 for numerical failure.  Data goes to files only,
diagnostics to stderr, and files written by a failing command are removed.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Callable, Optional, Sequence

from . import io
from .dynamics import State, SystemParams, fixed_points
from .integrator import IntegrationError, IntegratorConfig, integrate
from .surgery import MorphParams, TwistSpec, euler_characteristic, solid_layers, write_obj, obj_filename
from .sweep import REFERENCE_ICS, SweepSpec, boundary_estimate, run_sweep
from .topology import ClassifierThresholds, classify

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2

# reference runs regenerated by ``figures``
SPHERE_PARAMS = SystemParams(3.0, 3.0, 3.0)
TORUS_PARAMS = SystemParams(2.9851, 3.0, 3.0)
SPHERE_ICS = REFERENCE_ICS[:5]
TORUS_ICS = (State(1.1075, 1.0, 1.0), State(1.0, 1.0, 0.95), State(1.0, 1.0, 0.9), State(1.45, 1.0, 1.45))


class UsageError(ValueError):
    pass


def _triple(text) -> tuple[float, float, float]:
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        vals = [float(v) for v in str(text).split(",")]
    if len(vals) != 3:
        raise UsageError(f"expected three comma-separated numbers, got {text!r}")
    return tuple(vals)


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _range(text):
    lo, hi, n = _triple(text)
    if n != int(n):
        raise UsageError(f"range count must be an integer, got {n!r}")
    return (lo, hi, int(n))


def _add_system(p):
    p.add_argument("--A", type=float, help="parameter A (default 3)")
    p.add_argument("--B", type=float, help="parameter B (default 3)")
    p.add_argument("--C", type=float, help="parameter C (default 3)")


def _add_integrator(p):
    p.add_argument("--t-end", type=float, help="end time (default 500)")
    p.add_argument("--sample-dt", type=float, help="output spacing (default 0.01)")
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--h-max", type=float)
    p.add_argument("--fixed-step", type=float, help="use a constant step instead of adaptive control")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lvsurgery", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def new(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file with option values (flags override it)")
        return p

    p = new("simulate", "integrate one trajectory and write it as CSV")
    _add_system(p)
    _add_integrator(p)
    p.add_argument("--ic", help="initial state x,y,z (default 1,1.59,0.81)")
    p.add_argument("--out", help="CSV path (default trajectory.csv)")

    p = new("classify", "integrate and classify the orbit topology")
    _add_system(p)
    _add_integrator(p)
    p.add_argument("--ic", help="initial state x,y,z (default 1,1.59,0.81)")
    p.add_argument("--out", help="trajectory CSV path (default trajectory.csv)")
    p.add_argument("--report", help="JSON report path (default report.json)")

    p = new("fixed-points", "list equilibria with eigenvalues and stability")
    _add_system(p)
    p.add_argument("--out", help="JSON path (default fixed_points.json)")

    p = new("sweep", "classify orbits over a (C, B/A) grid")
    _add_integrator(p)
    p.add_argument("--c-range", help="lo,hi,n (default 3,3,1)")
    p.add_argument("--ratio-range", help="lo,hi,n for B/A (default 0.95,1.05,11)")
    p.add_argument("--fixed-A", type=float, help="A held fixed, B = ratio*A (default 3)")
    p.add_argument("--workers", type=int, help="parallel processes (default 1)")
    p.add_argument("--out", help="CSV path (default sweep.csv)")

    p = new("morph", "write surgery meshes as OBJ files")
    p.add_argument("--s", type=float, help="morph parameter in [0, 1], not 0.5 (default 1)")
    p.add_argument("--layers", help="comma-separated decreasing radii (default 1.0)")
    p.add_argument("--theta-top", type=float, help="top twist in radians (default 4*pi/3)")
    p.add_argument("--theta-bottom", type=float, help="bottom twist in radians (default -4*pi/3)")
    p.add_argument("--n-theta", type=int)
    p.add_argument("--n-phi", type=int)
    p.add_argument("--pole-disc-angle", type=float)
    p.add_argument("--outdir", help="output directory (default .)")

    p = new("figures", "regenerate the reference sphere and torus runs")
    _add_integrator(p)
    p.add_argument("--outdir", help="output directory (default figures)")
    p.add_argument("--axes", help="projection axis pair, e.g. XZ (default XZ)")
    return parser


DEFAULTS = {
    "A": 3.0, "B": 3.0, "C": 3.0,
    "ic": "1,1.59,0.81",
    "c_range": "3,3,1", "ratio_range": "0.95,1.05,11", "fixed_A": 3.0, "workers": 1,
    "s": 1.0, "layers": "1.0",
    "theta_top": 4.0 * math.pi / 3.0, "theta_bottom": -4.0 * math.pi / 3.0,
    "n_theta": 32, "n_phi": 32, "pole_disc_angle": math.pi / 8.0,
    "axes": "XZ",
}
OUT_DEFAULTS = {
    "simulate": {"out": "trajectory.csv"},
    "classify": {"out": "trajectory.csv", "report": "report.json"},
    "fixed-points": {"out": "fixed_points.json"},
    "sweep": {"out": "sweep.csv"},
    "morph": {"outdir": "."},
    "figures": {"outdir": "figures"},
}
_INTEGRATOR_KEYS = ("t_end", "sample_dt", "rtol", "atol", "h_max", "fixed_step")


def merge_options(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    opts = dict(DEFAULTS)
    opts.update(OUT_DEFAULTS[args.command])
    known = set(vars(args)) - {"command", "config"}
    if args.config:
        cfg = io.read_json(args.config)
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        for key, val in cfg.items():
            k = key.replace("-", "_")
            if k not in known:
                raise UsageError(f"unknown option {key!r} in config file for '{args.command}'")
            opts[k] = val
    for k in known:
        v = getattr(args, k)
        if v is not None:
            opts[k] = v
    return opts


def _integrator(opts) -> IntegratorConfig:
    kw = {k: float(opts[k]) for k in _INTEGRATOR_KEYS if opts.get(k) is not None}
    return IntegratorConfig(**kw)


def _params(opts) -> SystemParams:
    return SystemParams(float(opts["A"]), float(opts["B"]), float(opts["C"]))


def _ic(opts) -> State:
    ic = State(*_triple(opts["ic"]))
    if not ic.in_octant:
        raise UsageError(f"initial state must be nonnegative, got {opts['ic']!r}")
    return ic


def _check_writable(path):
    d = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(d):
        raise UsageError(f"output directory {d!r} does not exist")
    if not os.access(d, os.W_OK):
        raise UsageError(f"output directory {d!r} is not writable")


def _ensure_dir(d):
    if os.path.exists(d) and not os.path.isdir(d):
        raise UsageError(f"{d!r} exists and is not a directory")
    parent = os.path.dirname(os.path.abspath(d))
    if not os.path.isdir(d) and not os.access(parent, os.W_OK):
        raise UsageError(f"cannot create output directory {d!r}")


class _Outputs:
    """Tracks written files so they can be removed if the command fails."""

    def __init__(self):
        self.paths: list[str] = []
        self.made_dirs: list[str] = []

    def add(self, path: str) -> str:
        self.paths.append(path)
        return path

    def mkdir(self, d: str):
        if not os.path.isdir(d):
            os.makedirs(d)
            self.made_dirs.append(d)

    def rollback(self):
        for p in self.paths:
            try:
                os.remove(p)
            except OSError:
                pass
        for d in reversed(self.made_dirs):
            try:
                os.rmdir(d)
            except OSError:
                pass


def _log(msg: str):
    print(msg, file=sys.stderr)


# ------------------------------------------------------------------ commands
# Each command validates everything first and returns a zero-argument job.

def cmd_simulate(opts) -> Callable:
    params, ic, cfg = _params(opts), _ic(opts), _integrator(opts)
    _check_writable(opts["out"])

    def job(out: _Outputs):
        traj = integrate(params, ic, cfg)
        io.export_trajectory_csv(traj, out.add(opts["out"]))
        _log(f"wrote {len(traj)} samples to {opts['out']}")
    return job


def cmd_classify(opts) -> Callable:
    params, ic, cfg = _params(opts), _ic(opts), _integrator(opts)
    th = ClassifierThresholds()
    if cfg.t_end < th.min_duration:
        raise UsageError(f"classify needs --t-end >= {th.min_duration:g}, got {cfg.t_end:g}")
    _check_writable(opts["out"])
    _check_writable(opts["report"])

    def job(out: _Outputs):
        traj = integrate(params, ic, cfg)
        rep = classify(traj, th)
        io.export_trajectory_csv(traj, out.add(opts["out"]))
        io.write_json(io.report_record(rep, params, ic), out.add(opts["report"]))
        _log(f"verdict: {rep.verdict.value} ({rep.evidence_notes})")
    return job


def cmd_fixed_points(opts) -> Callable:
    params = _params(opts)
    _check_writable(opts["out"])

    def job(out: _Outputs):
        fps = fixed_points(params)
        rec = {"params": {"A": params.A, "B": params.B, "C": params.C},
               "fixed_points": [io.fixed_point_record(fp) for fp in fps]}
        io.write_json(rec, out.add(opts["out"]))
        for fp in fps:
            _log(f"{fp.state.xyz}: {fp.classification.value}")
    return job


def cmd_sweep(opts) -> Callable:
    workers = int(opts["workers"])
    if workers < 1:
        raise UsageError("workers must be >= 1")
    spec = SweepSpec(
        c_range=_range(opts["c_range"]),
        ratio_range=_range(opts["ratio_range"]),
        fixed_A=float(opts["fixed_A"]),
        integrator=_integrator(opts),
    )
    _check_writable(opts["out"])

    def job(out: _Outputs):
        res = run_sweep(spec, workers=workers)
        io.export_sweep_csv(res, out.add(opts["out"]))
        for c in res.cells:
            _log(f"C={c.C:g} B/A={c.ratio:.6g}: {c.majority.value}")
        _log(f"boundary estimate: {boundary_estimate(res)}")
    return job


def _morph_params(opts) -> MorphParams:
    return MorphParams(
        s=float(opts["s"]),
        twist=TwistSpec(float(opts["theta_top"]), float(opts["theta_bottom"])),
        resolution=(int(opts["n_theta"]), int(opts["n_phi"])),
        pole_disc_angle=float(opts["pole_disc_angle"]),
    )


def cmd_morph(opts) -> Callable:
    mp = _morph_params(opts)
    radii = _floats(opts["layers"])
    outdir = opts["outdir"]
    _ensure_dir(outdir)
    # surface construction is cheap; building here surfaces every geometric
    # precondition (singular s, coarse resolution, bad radii) as a usage error
    meshes = solid_layers(mp, radii)

    def job(out: _Outputs):
        out.mkdir(outdir)
        for m in meshes:
            path = out.add(os.path.join(outdir, obj_filename(m.morph_s, m.layer_r)))
            write_obj(m, outdir)
            _log(f"{path}: V={m.n_vertices} F={m.n_faces} chi={euler_characteristic(m)}")
    return job


def cmd_figures(opts) -> Callable:
    cfg = _integrator(opts)
    axes = opts["axes"]
    io._axis_pair(axes)
    outdir = opts["outdir"]
    _ensure_dir(outdir)

    runs = [("sphere", SPHERE_PARAMS, k, ic) for k, ic in enumerate(SPHERE_ICS)]
    runs += [("torus", TORUS_PARAMS, k, ic) for k, ic in enumerate(TORUS_ICS)]

    def job(out: _Outputs):
        out.mkdir(outdir)
        for family, params, k, ic in runs:
            traj = integrate(params, ic, cfg)
            stem = os.path.join(outdir, f"{family}_ic{k}")
            io.export_trajectory_csv(traj, out.add(stem + ".csv"))
            title = f"A={params.A:g} B={params.B:g} C={params.C:g} ic=({ic.X:g}, {ic.Y:g}, {ic.Z:g})"
            io.export_projection_svg(traj, out.add(stem + ".svg"), axes=axes, title=title)
            _log(f"{stem}: {len(traj)} samples")
    return job


COMMANDS = {
    "simulate": cmd_simulate,
    "classify": cmd_classify,
    "fixed-points": cmd_fixed_points,
    "sweep": cmd_sweep,
    "morph": cmd_morph,
    "figures": cmd_figures,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage problems with status 2
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        opts = merge_options(args)
        job = COMMANDS[args.command](opts)
    except (ValueError, TypeError, OSError) as exc:
        _log(f"error: {exc}")
        return EXIT_INVALID
    out = _Outputs()
    try:
        job(out)
    except IntegrationError as exc:
        out.rollback()
        where = f" near {exc.last_state}" if exc.last_state is not None else ""
        _log(f"numerical failure: {exc}{where}")
        return EXIT_NUMERICAL
    except (ArithmeticError, FloatingPointError) as exc:
        out.rollback()
        _log(f"numerical failure: {exc}")
        return EXIT_NUMERICAL
    except OSError as exc:
        out.rollback()
        _log(f"error: {exc}")
        return EXIT_INVALID
    except BaseException:
        out.rollback()
        raise
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
