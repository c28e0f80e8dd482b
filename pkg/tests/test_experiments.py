import csv
import io
from pathlib import Path

import numpy as np
import pytest
import yaml

from graphbss import experiments as ex

DATA = Path(__file__).parent / "data"


def read_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def small(experiment, **scenario):
    over = {"n_values": [60]} if experiment != "fig2" else {"n_values": [40]}
    if scenario:
        over["scenario"] = scenario
    return over


class TestConfig:
    def test_defaults_and_overrides(self):
        cfg = ex.make_config("fig3", {"scenario": {"graph": {"mean_degree": 5}}}, seed=1)
        assert cfg.reps == 200 and cfg.n_values == [250, 500, 1000]
        assert cfg.scenario["graph"] == {"kind": "er", "mean_degree": 5}
        assert set(cfg.scenario["models"]) == {"M1", "M2", "M3", "M4"}
        est = {e["name"]: e for e in cfg.estimators}
        assert est["graph_jade"]["lam"] == 0.8 and est["graph_fastica"]["lam"] == 0.001

    def test_selected_models_replace_defaults(self):
        m4 = ex.FIG3_DEFAULTS["scenario"]["models"]["M4"]
        cfg = ex.make_config("fig3", {"scenario": {"models": {"M4": m4}}}, seed=1)
        assert list(cfg.scenario["models"]) == ["M4"]

    @pytest.mark.parametrize("over, kw", [
        ({}, {}),                                   # no seed
        ({"seed": -1}, {}),
        ({"seed": 1, "reps": 0}, {}),
        ({"seed": 1, "reps": 2.5}, {}),
        ({"seed": 1, "estimators": [{"name": "pca"}]}, {}),
        ({"seed": 1, "estimators": [{"name": "graph_jade", "lam": 2}]}, {}),
        ({"seed": 1, "n_values": []}, {}),
        ({"seed": 1, "colour": "red"}, {}),
        ({"seed": 1}, {"jobs": 0}),
    ])
    def test_rejects(self, over, kw):
        with pytest.raises(ex.ConfigError):
            ex.make_config("fig3", over, **kw)

    def test_unknown_experiment(self):
        with pytest.raises(ex.ConfigError):
            ex.make_config("fig9", {}, seed=1)

    def test_load_config(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text(yaml.safe_dump({"experiment": "fig1", "seed": 4, "reps": 3}))
        cfg = ex.load_config(p, "fig1")
        assert (cfg.seed, cfg.reps) == (4, 3)
        with pytest.raises(ex.ConfigError):
            ex.load_config(p, "fig2")
        with pytest.raises(ex.ConfigError):
            ex.load_config(tmp_path / "missing.yaml", "fig1")

    def test_graph_specs(self, rng):
        assert ex.make_graph({"kind": "er", "mean_degree": 1e6}, 5, rng).edge_count() == 10
        with pytest.raises(ex.ConfigError):
            ex.make_graph({"kind": "sbm", "p_in": 0.1}, 10, rng)
        with pytest.raises(ex.ConfigError):
            ex.make_graph({"kind": "lattice"}, 10, rng)


class TestRunners:
    def test_fig1_rows(self):
        cfg = ex.make_config("fig1", small("fig1", extra_graphs=2), seed=3, reps=3)
        rows = ex.run_experiment(cfg)
        assert len(rows) == 4 * 3
        for r in rows:
            assert r["status"] == "ok" and r["reps"] == 3 and r["mean_nmd2"] >= 0
            assert r["scenario"].startswith("model")

    def test_fig2_rows_and_sentinels(self):
        cfg = ex.make_config(
            "fig2", small("fig2", theta2=[0.05, 0.1], combos={"C4": ["community", "community"]}),
            seed=3, reps=2)
        rows = ex.run_experiment(cfg)
        assert len(rows) == 2 * 3
        by_point = {}
        for r in rows:
            by_point.setdefault(r["point"], []).append(r)
        assert all(r["status"] == "non-identifiable" and r["crb_trace"] is None
                   for r in by_point[0.1])
        assert all(r["status"] == "ok" and r["crb_trace"] > 0 and r["var_off"] >= 0
                   for r in by_point[0.05])

    def test_fig3_rows(self):
        m4 = ex.FIG3_DEFAULTS["scenario"]["models"]["M4"]
        cfg = ex.make_config("fig3", small("fig3", models={"M4": m4}), seed=3, reps=2)
        rows = ex.run_experiment(cfg)
        assert [r["estimator"] for r in rows] == [
            "fastica_sq", "jade", "grade", "graph_jade", "graph_fastica"]
        assert "lam=0.8" in rows[3]["hyperparameters"]

    def test_crb_point_shared_graph(self, rng):
        w = ex.make_graph({"kind": "sbm", "p_in": 0.13, "p_out": 0.01}, 60, rng)
        assert ex.crb_point(w, w, 0.1, 0.1) is None
        tr, off = ex.crb_point(w, w, 0.1, 0.3)
        assert tr > off > 0

    def test_failed_estimator_counted(self, monkeypatch):
        def boom(*a, **k):
            raise np.linalg.LinAlgError("synthetic")
        monkeypatch.setattr(ex, "grade", boom)
        cfg = ex.make_config("fig1", small("fig1", extra_graphs=0), seed=3, reps=2,
                             estimators=[{"name": "gamma1"}])
        rows = ex.run_experiment(cfg)
        assert all(r["status"] == "failed" and r["failures"] == 2 for r in rows)


class TestCrbSweepGolden:
    def test_matches_recorded_file(self):
        cfg = ex.make_config("crb-sweep",
                             {"scenario": {"combos": {"C2": ["community", "er"]}}},
                             seed=7, reps=3)
        got = read_rows(ex.rows_to_csv(ex.run_experiment(cfg)))
        ref = read_rows((DATA / "crb_sweep_c2.csv").read_text())
        assert len(got) == len(ref) == 40
        for a, b in zip(got, ref):
            assert float(a["point"]) == float(b["point"])
            assert float(a["crb_trace"]) == pytest.approx(float(b["crb_trace"]), rel=1e-9)
            assert float(a["crb_off"]) == pytest.approx(float(b["crb_off"]), rel=1e-9)

    def test_distinct_graphs_decrease_through_theta1(self):
        ref = read_rows((DATA / "crb_sweep_c2.csv").read_text())
        tr = [float(r["crb_trace"]) for r in ref if float(r["point"]) <= 0.13]
        assert np.all(np.diff(tr) < 0)

    def test_shared_graph_monotone_in_distance(self):
        cfg = ex.make_config("crb-sweep",
                             {"scenario": {"combos": {"C4": ["community", "community"]},
                                           "theta2": [0.06, 0.07, 0.08, 0.09, 0.1,
                                                      0.11, 0.12, 0.13]}},
                             seed=7, reps=3)
        rows = {r["point"]: r for r in ex.run_experiment(cfg)}
        assert rows[0.1]["status"] == "non-identifiable"
        below = [rows[t]["crb_trace"] for t in (0.06, 0.07, 0.08, 0.09)]
        above = [rows[t]["crb_trace"] for t in (0.11, 0.12, 0.13)]
        assert np.all(np.diff(below) > 0) and np.all(np.diff(above) < 0)


class TestDeterminism:
    @pytest.mark.parametrize("experiment", ["fig1", "fig2", "fig3", "crb-sweep"])
    def test_byte_identical(self, experiment, tmp_path):
        over = small(experiment)
        if experiment == "fig2":
            over["scenario"] = {"theta2": [0.05, 0.2]}
        if experiment == "fig1":
            over["scenario"] = {"extra_graphs": 1}
        cfg = ex.make_config(experiment, over, seed=11, reps=2)
        a = ex.run_experiment(cfg, tmp_path / "a").read_bytes()
        b = ex.run_experiment(cfg, tmp_path / "b").read_bytes()
        assert a == b
        assert a.startswith(b"experiment,scenario,seed,") and b"\r\n" in a

    def test_parallel_matches_serial(self, tmp_path):
        over = {"n_values": [60], "scenario": {"extra_graphs": 1}}
        serial = ex.make_config("fig1", over, seed=5, reps=3)
        par = ex.make_config("fig1", over, seed=5, reps=3, jobs=2)
        a = ex.run_experiment(serial, tmp_path / "s").read_bytes()
        b = ex.run_experiment(par, tmp_path / "p").read_bytes()
        assert a == b

    def test_seed_changes_output(self, tmp_path):
        over = {"n_values": [60], "scenario": {"extra_graphs": 1}}
        a = ex.run_experiment(ex.make_config("fig1", over, seed=5, reps=2), tmp_path / "a")
        b = ex.run_experiment(ex.make_config("fig1", over, seed=6, reps=2), tmp_path / "b")
        assert a.read_bytes() != b.read_bytes()

    def test_metadata_written(self, tmp_path):
        cfg = ex.make_config("crb-sweep", {"scenario": {"theta2": [0.2]}}, seed=1, reps=1)
        ex.run_experiment(cfg, tmp_path)
        meta = yaml.safe_load((tmp_path / "crb-sweep_meta.yaml").read_text())
        assert meta["config"]["seed"] == 1 and meta["notes"]
