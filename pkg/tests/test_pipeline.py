import json
import math
from pathlib import Path

import numpy as np
import pytest

from irsdm.cli import main as cli_main
from irsdm.config import load_config
from irsdm.pipeline import (
    METHODS,
    dof_report,
    run_pipeline,
    sweep_ber,
    sweep_rate,
    sweep_users,
)


def fast_cfg(seed, **overrides):
    """Desk profile shrunk for test speed: fewer panel elements, light search."""
    base = {
        "panel_y": 4,
        "panel_z": 4,
        "ce_samples": 12,
        "ce_elites": 4,
        "ce_max_iterations": 6,
        "trials": 20000,
        "beammap_cells": 8,
        "n0_grid": [1e-5, 1e-4],
    }
    base.update(overrides)
    return load_config(seed=seed, overrides=base)


class TestRunPipeline:
    def test_all_methods_complete(self):
        cfg = fast_cfg(seed=5)
        rates = {}
        for method in METHODS:
            rep = run_pipeline(cfg, method)
            assert rep.sum_rate > 0.0
            assert rep.state.weights.shape == (4, cfg.n_antennas)
            assert len(rep.phase_indices) == cfg.m
            rates[method] = rep.sum_rate
        assert rates["ce-vt"] >= rates["ce"]
        assert rates["bcd-vt"] >= rates["bcd"]

    def test_unknown_method_rejected(self):
        from irsdm.errors import ConfigError

        with pytest.raises(ConfigError):
            run_pipeline(fast_cfg(seed=5), "annealing")

    def test_power_budget_respected(self):
        cfg = fast_cfg(seed=6)
        rep = run_pipeline(cfg, "vt")
        powers = rep.state.powers
        assert np.all(powers <= cfg.p_max * (1 + 1e-9))
        assert np.allclose(powers, cfg.p_max, rtol=1e-9)  # filled to budget

    def test_seeded_rerun_identical(self):
        cfg = fast_cfg(seed=7)
        a = run_pipeline(cfg, "ce")
        b = run_pipeline(cfg, "ce")
        assert a.phase_indices == b.phase_indices
        assert a.sum_rate == b.sum_rate
        assert np.array_equal(a.state.weights, b.state.weights)

    def test_missing_seed_generated_and_recorded(self):
        cfg = fast_cfg(seed=None)
        assert cfg.seed is None
        rep = run_pipeline(cfg, "vt")
        assert rep.seed is not None

    def test_vt_beats_random_phases_single_user(self):
        # Alignment against a seeded random configuration on 1-user scenes.
        wins = 0
        runs = 100
        for seed in range(runs):
            cfg = fast_cfg(seed=seed, users_xy=[[6.0, 6.0]])
            rep = run_pipeline(cfg, "vt")
            rng = np.random.default_rng(900000 + seed)
            from irsdm.phase_opt import PhaseCodebook, PhaseConfig
            from irsdm.pipeline import _Objective, _rng, _STREAM_EVE, _STREAM_UAV
            from irsdm.config import budget_from_config, scene_from_config
            from irsdm.precoding import ConstellationSpec

            budget = budget_from_config(cfg)
            const = ConstellationSpec.psk(4, _rng(cfg.seed, _STREAM_EVE), cfg.eve_amplitude)
            scene = scene_from_config(cfg, _rng(cfg.seed, _STREAM_UAV))
            objective = _Objective(scene, cfg, budget, const)
            cb = PhaseCodebook(cfg.phase_bits)
            random_cfg = PhaseConfig(cb, tuple(int(i) for i in rng.integers(0, cb.size, cfg.m)))
            wins += rep.sum_rate >= objective.sum_rate(random_cfg)
        assert wins >= 95


class TestArtifacts:
    def test_csv_outputs_deterministic(self, tmp_path):
        cfg = fast_cfg(seed=9)
        rep1 = run_pipeline(cfg, "vt", out_dir=tmp_path / "a")
        rep2 = run_pipeline(cfg, "vt", out_dir=tmp_path / "b")
        for name in ("position_trace", "rate", "beammap", "ber"):
            b1 = Path(rep1.artifacts[name]).read_bytes()
            b2 = Path(rep2.artifacts[name]).read_bytes()
            assert b1 == b2

    def test_artifacts_embed_provenance(self, tmp_path):
        cfg = fast_cfg(seed=9)
        rep = run_pipeline(cfg, "vt", out_dir=tmp_path)
        text = Path(rep.artifacts["rate"]).read_text()
        assert f"# config_hash={cfg.config_hash()}" in text
        assert f"# seed={cfg.seed}" in text
        assert "# version=" in text
        header = [l for l in text.splitlines() if not l.startswith("#")][0]
        assert header == "P_max_dBm,method,sum_rate,sum_rate_thermal,status"

    def test_manifest_contents(self, tmp_path):
        cfg = fast_cfg(seed=9)
        rep = run_pipeline(cfg, "bcd", out_dir=tmp_path)
        manifest = json.loads(Path(rep.artifacts["manifest"]).read_text())
        assert manifest["method"] == "bcd"
        assert manifest["seed"] == cfg.seed
        assert manifest["config_hash"] == cfg.config_hash()
        assert len(manifest["phase_indices"]) == cfg.m
        assert manifest["p_min_trace"]

    def test_beammap_schema(self, tmp_path):
        cfg = fast_cfg(seed=9)
        rep = run_pipeline(cfg, "vt", out_dir=tmp_path)
        lines = Path(rep.artifacts["beammap"]).read_text().splitlines()
        header = [l for l in lines if not l.startswith("#")][0]
        assert header == "x,y,power_dbm"
        rows = [l for l in lines if not l.startswith("#")][1:]
        assert len(rows) == cfg.beammap_cells**2


class TestSweeps:
    def test_rate_sweep_rows_and_trend(self, tmp_path):
        # The thermal-only rate rises monotonically with the budget. The
        # bound-based rate saturates once scatter leakage dominates, so it
        # only gets a small per-step slack (near-tied configurations flip
        # between budgets at this scale).
        cfg = fast_cfg(seed=4)
        out = tmp_path / "rates.csv"
        rows = sweep_rate(cfg, [20.0, 25.0, 30.0, 35.0, 40.0], methods=("vt",), out_path=out)
        assert len(rows) == 5
        assert all(r[4] == "ok" for r in rows)
        thermal = [r[3] for r in rows]
        assert all(b >= a for a, b in zip(thermal, thermal[1:]))
        bound = [r[2] for r in rows]
        assert all(b >= a * (1 - 0.03) for a, b in zip(bound, bound[1:]))
        assert out.exists()

    def test_sweep_keeps_failed_points(self):
        cfg = fast_cfg(seed=4)
        rows = sweep_rate(cfg, [-100.0, 40.0], methods=("vt",))
        status = {round(r[0]): r[4] for r in rows}
        assert status[-100].startswith("failed")
        assert status[40] == "ok"
        failed_rate = [r[2] for r in rows if r[0] == -100.0][0]
        assert math.isnan(failed_rate)

    def test_single_point_sweep_matches_pipeline(self):
        cfg = fast_cfg(seed=4)
        rows = sweep_rate(cfg, [cfg.p_max_dbm], methods=("vt",))
        rep = run_pipeline(cfg, "vt")
        assert rows[0][2] == pytest.approx(rep.sum_rate, rel=1e-12)

    def test_user_count_sweep_feasible(self):
        cfg = fast_cfg(seed=4)
        rows = sweep_users(cfg, [1, 2, 3], methods=("vt",))
        assert [r[3] for r in rows] == [1, 2, 3]
        assert all(r[4] == "ok" for r in rows)

    def test_ber_sweep_schema(self, tmp_path):
        cfg = fast_cfg(seed=4)
        out = tmp_path / "ber.csv"
        rows = sweep_ber(cfg, method="vt", out_path=out)
        receivers = {r[1] for r in rows}
        assert receivers == {"user0", "eve"}
        header = [l for l in out.read_text().splitlines() if not l.startswith("#")][0]
        assert header == "N0,receiver,ber,ci_halfwidth,status"

    def test_dof_report_draws(self):
        cfg = fast_cfg(seed=4)
        reports = dof_report(cfg, draws=5)
        assert len(reports) == 5
        assert all(r.eve_bound_ok and r.users_bound_ok for r in reports)


class TestCli:
    def run(self, tmp_path, *args):
        return cli_main([*args, "--out", str(tmp_path), "--seed", "21"])

    def test_min_power(self, tmp_path, capsys):
        assert self.run(tmp_path, "min-power") == 0
        out = capsys.readouterr().out
        assert "P_min" in out
        assert (tmp_path / "min_power.csv").exists()

    def test_optimize_vt(self, tmp_path, capsys):
        assert self.run(tmp_path, "optimize", "vt") == 0
        assert (tmp_path / "manifest_vt.json").exists()
        assert (tmp_path / "beammap_vt.csv").exists()

    def test_dof_check(self, tmp_path, capsys):
        assert self.run(tmp_path, "dof-check", "--draws", "3") == 0
        assert "0 violations" in capsys.readouterr().out

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"mystery": 1}))
        code = cli_main(["min-power", "--config", str(bad), "--out", str(tmp_path)])
        assert code == 2

    def test_rate_sweep_cli(self, tmp_path):
        code = cli_main(
            [
                "rate-sweep",
                "--methods", "vt",
                "--values", "30", "40",
                "--out", str(tmp_path),
                "--seed", "21",
            ]
        )
        assert code == 0
        assert (tmp_path / "rate_sweep.csv").exists()
