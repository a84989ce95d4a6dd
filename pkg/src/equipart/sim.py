"""Simulation engine: configuration, seeded initialisation, runs and batches.

Random numbers come from numpy's PCG64 generator seeded directly with the
configured integer, ``numpy.random.Generator(numpy.random.PCG64(seed))``.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .density import density_from_spec, region_measure
from .dynamics import (
    LawParams,
    Snapshot,
    euler_step,
    evaluate,
    get_law,
    simulation_control,
)
from .errors import EquipartError, InitFailed, InvalidParams
from .geometry import ConvexPolygon, PowerGeneratorSet, point_in, polygon_diameter
from .metrics import partition_Q, voronoi_defect

CONFIG_KEYS = ("region", "density", "m", "law", "dt", "steps", "seed", "params", "outputs")
CSV_COLUMNS = (
    "step",
    "t",
    "HV",
    "area_error",
    "voronoi_defect",
    "Q_mean",
    "min_cell_measure",
    "max_cell_measure",
    "sum_weights",
    "dt_effective",
)
MAX_INIT_DRAWS = 100_000
UNIT_SQUARE = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass
class SimConfig:
    region: list = field(default_factory=lambda: [list(p) for p in UNIT_SQUARE])
    density: dict = field(default_factory=lambda: {"type": "uniform", "value": 1.0})
    m: int = 10
    law: str = "combined"
    dt: float = 0.01
    steps: int = 800
    seed: int = 0
    params: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=lambda: {"csv": "metrics.csv", "snapshot_every": 100})

    def __post_init__(self):
        self.check()

    def check(self):
        if not self.dt > 0:
            raise InvalidParams("dt must be positive")
        if self.steps < 1:
            raise InvalidParams("steps must be at least 1")
        if self.m < 1:
            raise InvalidParams("m must be at least 1")
        get_law(self.law)
        unknown = set(self.params) - set(LawParams.__dataclass_fields__)
        if unknown:
            raise InvalidParams(f"unknown law parameters {sorted(unknown)}")
        if self.law == "beta" and not self.params.get("target_fractions"):
            raise InvalidParams("the beta law needs params.target_fractions")

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        extra = set(d) - set(CONFIG_KEYS)
        if extra:
            raise InvalidParams(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "SimConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return asdict(self)

    def with_(self, **changes) -> "SimConfig":
        d = self.to_dict()
        d.update({k: v for k, v in changes.items() if v is not None})
        return SimConfig.from_dict(d)

    # derived objects
    def polygon(self) -> ConvexPolygon:
        return ConvexPolygon.from_points(self.region)

    def density_field(self):
        return density_from_spec(self.density)

    def law_params(self, region: ConvexPolygon) -> LawParams:
        return LawParams(**self.params).resolved(region)

    @property
    def snapshot_every(self) -> int:
        return int(self.outputs.get("snapshot_every", 100))


def init_state(config: SimConfig) -> PowerGeneratorSet:
    """Uniform positions in the region by rejection sampling, all weights zero."""
    A = config.polygon()
    rng = make_rng(config.seed)
    lo = A.vertices.min(axis=0)
    hi = A.vertices.max(axis=0)
    min_gap = 1e-6 * polygon_diameter(A)

    pts = []
    draws = 0
    while len(pts) < config.m:
        if draws >= MAX_INIT_DRAWS:
            raise InitFailed(f"placed {len(pts)} of {config.m} agents in {MAX_INIT_DRAWS} draws")
        x = lo + (hi - lo) * rng.random(2)
        draws += 1
        if not point_in(A, x, tol=0.0):
            continue
        if pts and np.min(np.hypot(*(np.array(pts) - x).T)) <= min_gap:
            continue
        pts.append(x)
    return PowerGeneratorSet.voronoi(np.array(pts))


def metrics_row(snap: Snapshot, step: int, t: float, dt_effective: float) -> dict:
    return {
        "step": step,
        "t": t,
        "HV": snap.value,
        "area_error": float(snap.measures.max() - snap.measures.min()),
        "voronoi_defect": voronoi_defect(snap.diagram),
        "Q_mean": partition_Q(snap.diagram),
        "min_cell_measure": float(snap.measures.min()),
        "max_cell_measure": float(snap.measures.max()),
        "sum_weights": float(np.sum(snap.gens.weights)),
        "dt_effective": dt_effective,
    }


def state_dump(snap: Snapshot, step: int, t: float) -> dict:
    return {
        "step": step,
        "t": t,
        "positions": snap.gens.positions.tolist(),
        "weights": snap.gens.weights.tolist(),
        "cells": [c.vertices.tolist() for c in snap.diagram.cells],
    }


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_csv(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])


def read_csv(path) -> list[dict]:
    with open(path) as f:
        return [{k: (int(v) if k == "step" else float(v)) for k, v in r.items()} for r in csv.DictReader(f)]


@dataclass
class RunRecord:
    config: SimConfig
    rows: list
    snapshot: Snapshot | None
    wall_time: float
    error: str | None = None

    @property
    def final(self) -> dict:
        return self.rows[-1]

    @property
    def ok(self) -> bool:
        return self.error is None


def _write_snapshot(out: Path, snap: Snapshot, step: int, t: float):
    from .plotting import save_partition

    snapdir = out / "snapshots"
    snapdir.mkdir(parents=True, exist_ok=True)
    stem = snapdir / f"step_{step:06d}"
    with open(stem.with_suffix(".json"), "w") as f:
        json.dump(state_dump(snap, step, t), f)
    save_partition(
        stem.with_suffix(".svg"),
        snap.region,
        snap.diagram.cells,
        snap.gens.positions,
        snap.centroids,
        title=f"step {step}, t = {t:.2f}",
    )


def run(config: SimConfig, out_dir=None, snapshots: bool = True) -> RunRecord:
    """Integrate the configured law for ``config.steps`` accepted steps.

    With ``out_dir`` the metrics CSV, a history figure, the configuration and
    (if ``snapshots``) SVG and JSON state snapshots are written there. A
    failing step stops the run; whatever was recorded is still written.
    """
    t0 = time.perf_counter()
    A = config.polygon()
    density = config.density_field()
    params = config.law_params(A)
    law = get_law(config.law)
    control = simulation_control(config.law)
    total = region_measure(A, density)
    gens = init_state(config)
    snap = evaluate(A, gens, density, fractions=params.target_fractions, total_measure=total)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "config.json", "w") as f:
            json.dump(config.to_dict(), f, indent=2)
    every = config.snapshot_every if snapshots else 0
    rows = [metrics_row(snap, 0, 0.0, 0.0)]
    if out is not None and every:
        _write_snapshot(out, snap, 0, 0.0)
    t = 0.0
    error = None
    try:
        for step in range(1, config.steps + 1):
            res = euler_step(snap, law, params, config.dt, control)
            snap = res.snapshot
            t += res.dt
            rows.append(metrics_row(snap, step, t, res.dt))
            if out is not None and every and (step % every == 0 or step == config.steps):
                _write_snapshot(out, snap, step, t)
    except EquipartError as exc:
        error = f"{type(exc).__name__}: {exc}"
        if out is not None and every:
            _write_snapshot(out, snap, rows[-1]["step"], t)
    record = RunRecord(config, rows, snap, time.perf_counter() - t0, error)
    if out is not None:
        write_csv(out / config.outputs.get("csv", "metrics.csv"), rows)
        from .plotting import save_history

        save_history(out / "history.svg", rows)
    return record


def recompute_metrics(state: dict, config: SimConfig) -> dict:
    """Rebuild the diagram from a JSON state dump and recompute its CSV row."""
    A = config.polygon()
    density = config.density_field()
    params = config.law_params(A)
    gens = PowerGeneratorSet(np.array(state["positions"]), np.array(state["weights"]))
    total = region_measure(A, density)
    snap = evaluate(A, gens, density, fractions=params.target_fractions, total_measure=total)
    return metrics_row(snap, state["step"], state["t"], math.nan)


# -- batches -----------------------------------------------------------------

SUMMARY_COLUMNS = ("runs", "failed", "mean_area_error", "max_area_error", "mean_voronoi_defect", "max_voronoi_defect", "mean_Q", "min_Q")


def _run_seed(args):
    config, out = args
    rec = run(config, out, snapshots=out is not None)
    return rec.config.seed, rec.final, rec.error, rec.wall_time


def batch(config: SimConfig, n_runs: int, out_dir=None, workers: int = 1, per_run_outputs: bool = False):
    """Run seeds ``seed + k`` for ``k < n_runs`` and aggregate their final metrics.

    Returns ``(summary, per_seed)``. Failed runs are listed in ``per_seed``
    with their error and left out of the aggregates.
    """
    if n_runs < 1:
        raise InvalidParams("n_runs must be at least 1")
    out = Path(out_dir) if out_dir is not None else None
    jobs = []
    for k in range(n_runs):
        cfg = config.with_(seed=config.seed + k)
        sub = out / f"seed_{cfg.seed}" if (out is not None and per_run_outputs) else None
        jobs.append((cfg, sub))
    if workers > 1:
        from multiprocessing import Pool

        with Pool(workers) as pool:
            results = pool.map(_run_seed, jobs)
    else:
        results = [_run_seed(j) for j in jobs]
    per_seed = [
        {"seed": seed, "status": "ok" if err is None else err, "wall_time": wt, **final}
        for seed, final, err, wt in results
    ]
    good = [r for r in per_seed if r["status"] == "ok"]
    summary = {"runs": len(good), "failed": len(per_seed) - len(good)}
    if good:
        e = np.array([r["area_error"] for r in good])
        h = np.array([r["voronoi_defect"] for r in good])
        q = np.array([r["Q_mean"] for r in good])
        summary.update(
            mean_area_error=float(e.mean()),
            max_area_error=float(e.max()),
            mean_voronoi_defect=float(h.mean()),
            max_voronoi_defect=float(h.max()),
            mean_Q=float(q.mean()),
            min_Q=float(q.min()),
        )
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "summary.csv", "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            w.writerow([_fmt(summary.get(c, math.nan)) for c in SUMMARY_COLUMNS])
        with open(out / "runs.csv", "w", newline="") as f:
            cols = ("seed", "status") + CSV_COLUMNS[1:]
            w = csv.writer(f, lineterminator="\n")
            w.writerow(cols)
            for r in per_seed:
                w.writerow([_fmt(r[c]) for c in cols])
        if good:
            from .plotting import save_batch_summary

            save_batch_summary(out / "summary.svg", good, title=f"{config.law} law, {len(good)} runs")
    return summary, per_seed


def format_summary(summary: dict, label: str = "") -> str:
    """One Table I style row."""
    if not summary.get("runs"):
        return f"{label}: no successful runs"
    return (
        f"{label:>8} | runs {summary['runs']:3d} | eps mean {summary['mean_area_error']:.2e} "
        f"max {summary['max_area_error']:.2e} | eta mean {summary['mean_voronoi_defect']:.3f} "
        f"max {summary['max_voronoi_defect']:.3f} | Q mean {summary['mean_Q']:.3f} min {summary['min_Q']:.3f}"
    )
