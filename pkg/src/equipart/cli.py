"""Command-line interface: ``equipart run | batch | baseline | check-1d | metrics``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .baselines import (
    OneDDensity,
    figure4_density,
    oned_equitable_voronoi_check,
    slice_partition,
    sweep_partition,
    unimodal_voronoi,
)
from .density import region_measure
from .errors import EquipartError
from .geometry import PowerGeneratorSet, power_diagram
from .sim import SimConfig, batch, format_summary, recompute_metrics, run


def _config(args) -> SimConfig:
    cfg = SimConfig.load(args.config) if args.config else SimConfig()
    changes = {"seed": args.seed, "law": getattr(args, "law", None), "steps": getattr(args, "steps", None), "dt": getattr(args, "dt", None)}
    cfg = cfg.with_(**changes)
    if getattr(args, "snapshots", None) is not None:
        cfg = cfg.with_(outputs={**cfg.outputs, "snapshot_every": args.snapshots})
    return cfg


def _common(p, sim=True):
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--out-dir", default="out", help="directory for CSV and SVG output")
    if sim:
        p.add_argument("--law", choices=["weights", "beta", "centroidal", "voronoi", "combined"])
        p.add_argument("--steps", type=int)
        p.add_argument("--dt", type=float)
        p.add_argument("--snapshots", type=int, help="snapshot every N steps (0 disables)")


def cmd_run(args):
    cfg = _config(args)
    rec = run(cfg, args.out_dir, snapshots=cfg.snapshot_every > 0)
    f = rec.final
    print(
        f"step {f['step']} t {f['t']:.4f} area_error {f['area_error']:.3e} "
        f"voronoi_defect {f['voronoi_defect']:.4f} Q {f['Q_mean']:.4f} ({rec.wall_time:.1f} s)"
    )
    if not rec.ok:
        print(f"run stopped early: {rec.error}", file=sys.stderr)
        return 1
    return 0


def cmd_batch(args):
    cfg = _config(args)
    summary, per_seed = batch(cfg, args.runs, args.out_dir, workers=args.workers, per_run_outputs=args.per_run)
    label = cfg.density.get("type", "")
    print(format_summary(summary, label))
    failed = [r for r in per_seed if r["status"] != "ok"]
    for r in failed:
        print(f"seed {r['seed']}: {r['status']}", file=sys.stderr)
    return 1 if failed else 0


def _write_cells_csv(path, cells, density):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["cell", "measure"])
        for k, cell in enumerate(cells):
            pieces = (cell,) if hasattr(cell, "vertices") else cell
            w.writerow([k, repr(sum(region_measure(p, density) for p in pieces))])


def cmd_baseline(args):
    from .plotting import save_partition

    cfg = SimConfig.load(args.config) if args.config else SimConfig()
    A = cfg.polygon()
    density = cfg.density_field()
    m = args.m or cfg.m
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gens = None
    if args.kind == "slice":
        part = slice_partition(A, density, m, _angle_dir(args.angle))
        cells = part.cells
        print("offsets", " ".join(repr(float(s)) for s in part.offsets))
    elif args.kind == "sweep":
        pivot = args.pivot if args.pivot else A.vertices.mean(axis=0).tolist()
        angles, cells = sweep_partition(A, density, m, pivot, args.angle or 0.0)
        print("angles", " ".join(repr(float(a)) for a in angles))
    else:
        direction = None if args.angle is None else _angle_dir(args.angle)
        res = unimodal_voronoi(A, m, direction, density)
        gens = res.positions
        cells = power_diagram(A, PowerGeneratorSet.voronoi(gens)).cells
        print("t", " ".join(repr(float(t)) for t in res.t))
    _write_cells_csv(out / f"{args.kind}_cells.csv", cells, density)
    save_partition(out / f"{args.kind}.svg", A, cells, gens, title=f"{args.kind}, m = {m}")
    return 0


def _angle_dir(angle):
    a = 0.0 if angle is None else float(angle)
    return (math.cos(a), math.sin(a))


def cmd_check_1d(args):
    if args.breaks:
        rho = OneDDensity(tuple(args.breaks), tuple(args.values))
    elif args.uniform:
        rho = OneDDensity.uniform()
    else:
        rho = figure4_density()
    res = oned_equitable_voronoi_check(rho, args.m)
    print("boundaries", " ".join(f"{b:.6g}" for b in res.b))
    if res.feasible:
        print("feasible; generators", " ".join(f"{g:.6g}" for g in res.g))
    else:
        print("infeasible")
        for c in res.conflicts:
            print("  " + c.describe())
    if res.degenerate:
        print("ambiguous boundaries at", list(res.degenerate))
    return 0


def cmd_metrics(args):
    # a run directory keeps its config next to the snapshots folder
    guess = Path(args.state).resolve().parent.parent / "config.json"
    path = args.config or (guess if guess.exists() else None)
    cfg = SimConfig.load(path) if path else SimConfig()
    with open(args.state) as f:
        state = json.load(f)
    row = recompute_metrics(state, cfg)
    for k, v in row.items():
        if k != "dt_effective":
            print(f"{k} {v!r}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="equipart", description="Equitable power-diagram partitions.")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="simulate one seed and write metrics, history and snapshots")
    _common(r)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("batch", help="simulate seeds seed..seed+runs-1 and summarise")
    _common(b)
    b.add_argument("--runs", type=int, default=50)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--per-run", action="store_true", help="also write each run's outputs")
    b.set_defaults(func=cmd_batch, snapshots=0)

    bl = sub.add_parser("baseline", help="centralised slice, sweep or unimodal Voronoi partition")
    bl.add_argument("kind", choices=["slice", "sweep", "unimodal"])
    _common(bl, sim=False)
    bl.add_argument("--m", type=int)
    bl.add_argument("--angle", type=float, help="slice normal, sweep start ray or unimodal direction (radians)")
    bl.add_argument("--pivot", type=float, nargs=2, help="sweep pivot (default: vertex mean)")
    bl.set_defaults(func=cmd_baseline)

    c = sub.add_parser("check-1d", help="existence of an equitable Voronoi partition of [0, 1]")
    c.add_argument("--m", type=int, default=5)
    c.add_argument("--breaks", type=float, nargs="+")
    c.add_argument("--values", type=float, nargs="+")
    c.add_argument("--uniform", action="store_true")
    c.set_defaults(func=cmd_check_1d)

    mt = sub.add_parser("metrics", help="recompute a CSV row from a JSON state snapshot")
    mt.add_argument("state")
    mt.add_argument("--config")
    mt.set_defaults(func=cmd_metrics)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    np.seterr(all="ignore")
    try:
        return args.func(args)
    except EquipartError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
