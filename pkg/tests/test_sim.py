import json

import numpy as np
import pytest

from equipart import sim
from equipart.density import GaussianDensity, region_measure
from equipart.errors import InitFailed, InvalidParams, StepFailed
from equipart.geometry import ConvexPolygon, point_in, polygon_diameter
from equipart.sim import (
    CSV_COLUMNS,
    SimConfig,
    batch,
    format_summary,
    init_state,
    make_rng,
    read_csv,
    recompute_metrics,
    run,
)

GAUSS_SPEC = {"type": "gaussian", "center": [0.8, 0.8], "rate": 5.0, "amplitude": 1.0}


def short(**kw):
    return SimConfig(steps=kw.pop("steps", 12), **kw)


# -- configuration -----------------------------------------------------------


def test_config_round_trip(tmp_path):
    cfg = SimConfig(m=7, law="voronoi", seed=42, params={"alpha": 0.01})
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert SimConfig.load(path) == cfg
    assert sorted(cfg.to_dict()) == sorted(sim.CONFIG_KEYS)


@pytest.mark.parametrize(
    "bad",
    [
        {"dt": 0.0},
        {"steps": 0},
        {"m": 0},
        {"law": "lloyd"},
        {"params": {"gamma": 1.0}},
        {"law": "beta"},
    ],
)
def test_config_rejects_invalid(bad):
    with pytest.raises(InvalidParams):
        SimConfig(**bad)


def test_config_rejects_unknown_keys():
    with pytest.raises(InvalidParams):
        SimConfig.from_dict({"m": 3, "colour": "red"})


def test_rng_is_pcg64():
    a = make_rng(5).random(4)
    b = np.random.Generator(np.random.PCG64(5)).random(4)
    np.testing.assert_array_equal(a, b)


# -- initialisation ----------------------------------------------------------


def test_init_is_deterministic():
    a = init_state(SimConfig(seed=3))
    b = init_state(SimConfig(seed=3))
    np.testing.assert_array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, init_state(SimConfig(seed=4)).positions)


def test_init_single_agent():
    g = init_state(SimConfig(m=1, seed=9))
    assert g.m == 1 and g.weights[0] == 0.0
    assert point_in(ConvexPolygon.box(), g.positions[0])


@pytest.mark.parametrize("seed", range(5))
def test_init_property(seed):
    tri = [[0, 0], [2, 0], [0.5, 1.5]]
    cfg = SimConfig(region=tri, m=10, seed=seed)
    g = init_state(cfg)
    A = cfg.polygon()
    assert all(point_in(A, p, tol=0.0) for p in g.positions)
    assert g.min_distance() > 1e-6 * polygon_diameter(A)
    np.testing.assert_array_equal(g.weights, 0.0)


def test_init_failure(monkeypatch):
    monkeypatch.setattr(sim, "MAX_INIT_DRAWS", 5)
    with pytest.raises(InitFailed):
        init_state(SimConfig(m=10))


# -- runs --------------------------------------------------------------------


def test_run_rows_and_files(tmp_path):
    cfg = short(outputs={"csv": "metrics.csv", "snapshot_every": 5})
    rec = run(cfg, tmp_path)
    assert rec.ok
    assert [r["step"] for r in rec.rows] == list(range(13))
    rows = read_csv(tmp_path / "metrics.csv")
    assert list(rows[0]) == list(CSV_COLUMNS)
    assert len(rows) == 13
    names = sorted(p.name for p in (tmp_path / "snapshots").iterdir())
    assert names == [f"step_{s:06d}.{ext}" for s in (0, 5, 10, 12) for ext in ("json", "svg")]
    assert (tmp_path / "history.svg").exists() and (tmp_path / "config.json").exists()
    assert SimConfig.load(tmp_path / "config.json") == cfg
    svg = (tmp_path / "snapshots" / "step_000012.svg").read_text()
    assert svg.startswith("<?xml") and "<path" in svg


def test_run_is_byte_reproducible(tmp_path):
    cfg = short(law="combined", seed=11)
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    for name in ("metrics.csv", "snapshots/step_000012.json", "snapshots/step_000012.svg", "history.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_snapshot_rows_recompute_exactly(tmp_path):
    cfg = short(density=GAUSS_SPEC, outputs={"csv": "metrics.csv", "snapshot_every": 4})
    rec = run(cfg, tmp_path)
    for step in (0, 4, 8, 12):
        state = json.loads((tmp_path / "snapshots" / f"step_{step:06d}.json").read_text())
        again = recompute_metrics(state, cfg)
        row = rec.rows[step]
        for k in CSV_COLUMNS:
            if k != "dt_effective":
                assert again[k] == row[k], k


def test_gaussian_target_measure():
    cfg = short(density=GAUSS_SPEC, steps=40)
    rec = run(cfg, snapshots=False)
    total = region_measure(cfg.polygon(), GaussianDensity())
    assert total / 10 == pytest.approx(0.0336, abs=1e-4)
    f = rec.final
    assert f["min_cell_measure"] <= total / 10 <= f["max_cell_measure"]
    assert f["area_error"] < rec.rows[0]["area_error"]


def test_weights_only_run_conserves_sum():
    rec = run(short(law="weights", steps=100), snapshots=False)
    sums = np.array([r["sum_weights"] for r in rec.rows])
    assert np.abs(sums - sums[0]).max() <= 1e-8


def test_lyapunov_along_run():
    rec = run(short(law="centroidal", steps=30), snapshots=False)
    hv = np.array([r["HV"] for r in rec.rows])
    assert np.all(np.diff(hv) <= 1e-12 * hv[:-1])


def test_beta_run():
    cfg = short(law="beta", m=4, steps=400, params={"target_fractions": [0.1, 0.2, 0.3, 0.4]})
    rec = run(cfg, snapshots=False)
    b = np.array([0.1, 0.2, 0.3, 0.4])
    fr = rec.snapshot.measures / rec.snapshot.total_measure
    np.testing.assert_allclose(fr, b, rtol=1e-3)


def test_step_failure_keeps_partial_record(tmp_path, monkeypatch):
    real = sim.euler_step
    calls = {"n": 0}

    def flaky(*a, **kw):
        calls["n"] += 1
        if calls["n"] > 3:
            raise StepFailed("forced")
        return real(*a, **kw)

    monkeypatch.setattr(sim, "euler_step", flaky)
    rec = run(short(), tmp_path)
    assert not rec.ok and "StepFailed" in rec.error
    assert len(rec.rows) == 4
    assert len(read_csv(tmp_path / "metrics.csv")) == 4
    assert (tmp_path / "snapshots" / "step_000003.json").exists()


# -- batches -----------------------------------------------------------------


def test_batch_of_one_equals_run(tmp_path):
    cfg = short(seed=5)
    summary, per_seed = batch(cfg, 1, tmp_path)
    f = run(cfg, snapshots=False).final
    assert summary["runs"] == 1 and summary["failed"] == 0
    assert summary["mean_area_error"] == summary["max_area_error"] == f["area_error"]
    assert summary["mean_voronoi_defect"] == summary["max_voronoi_defect"] == f["voronoi_defect"]
    assert summary["mean_Q"] == summary["min_Q"] == f["Q_mean"]
    assert per_seed[0]["seed"] == 5
    for name in ("summary.csv", "runs.csv", "summary.svg"):
        assert (tmp_path / name).exists()
    assert "runs   1" in format_summary(summary, "unif")


def test_batch_seeds_and_failures(monkeypatch):
    real = sim.run

    def picky(config, *a, **kw):
        rec = real(config, *a, **kw)
        if config.seed == 8:
            rec.error = "StepFailed: forced"
        return rec

    monkeypatch.setattr(sim, "run", picky)
    summary, per_seed = batch(short(seed=7, steps=3), 3)
    assert [r["seed"] for r in per_seed] == [7, 8, 9]
    assert [r["status"] for r in per_seed] == ["ok", "StepFailed: forced", "ok"]
    assert summary["runs"] == 2 and summary["failed"] == 1


def test_batch_rejects_zero_runs():
    with pytest.raises(InvalidParams):
        batch(short(), 0)
