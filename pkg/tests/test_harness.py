"""Harness tests: config parsing, determinism, resume, reports, CLI plumbing."""

import json
import os
import shutil

import numpy as np
import pytest

from rabimc.cli import main as cli_main
from rabimc.errors import CheckpointMismatchError, ConfigError
from rabimc.harness import (DEFAULT_TWO_MODE_BATH, RunConfig, cmd_bkt_fit, cmd_ed_check,
                            cmd_kernel_table, cmd_relax, cmd_sweep, grid_points,
                            read_results_csv, resistance_estimate)


def write_config(path, **over):
    base = {
        "config_version": 1,
        "delta": 1.0,
        "omega0": 0.75,
        "alpha_cav": 0.2,
        "alpha_q": 0.0,
        "omega_c": 10.0,
        "bath": "structured",
        "g_list": "0.4",
        "beta_list": "4",
        "n_therm": 50,
        "n_sweeps": 400,
        "bin_len": 20,
        "n_chains": 2,
        "seed": 777,
        "kernel_tau_points": 512,
        "kernel_tol": 1e-5,     # matched to the coarse test grid
    }
    base.update(over)
    with open(path, "w") as fh:
        fh.write("# test configuration\n")
        for k, v in base.items():
            fh.write(f"{k} = {v}\n")
    return path


class TestConfig:
    def test_roundtrip(self, tmp_path):
        cfg = RunConfig.from_file(write_config(tmp_path / "c.cfg"))
        assert cfg.seed == 777 and cfg.g_list == [0.4] and cfg.bath == "structured"
        assert cfg.echo()["seed"] == "777"

    def test_unknown_key_diagnostics(self, tmp_path):
        p = tmp_path / "c.cfg"
        write_config(p)
        with open(p, "a") as fh:
            fh.write("typo_key = 3\n")
        with pytest.raises(ConfigError) as exc:
            RunConfig.from_file(p)
        assert "typo_key" in str(exc.value) and ":" in str(exc.value)

    def test_bad_value_diagnostics(self, tmp_path):
        p = tmp_path / "c.cfg"
        write_config(p, n_sweeps="not-a-number")
        with pytest.raises(ConfigError) as exc:
            RunConfig.from_file(p)
        assert "n_sweeps" in str(exc.value)

    def test_missing_seed(self, tmp_path):
        p = tmp_path / "c.cfg"
        with open(p, "w") as fh:
            fh.write("config_version = 1\n")
        with pytest.raises(ConfigError) as exc:
            RunConfig.from_file(p)
        assert "seed" in str(exc.value)

    def test_duplicate_key(self, tmp_path):
        p = tmp_path / "c.cfg"
        with open(p, "w") as fh:
            fh.write("config_version = 1\nseed = 1\nseed = 2\n")
        with pytest.raises(ConfigError):
            RunConfig.from_file(p)

    def test_grid_points_pure_ohmic(self, tmp_path):
        cfg = RunConfig.from_file(write_config(tmp_path / "c.cfg", bath="pure_ohmic",
                                               alpha_list="0.9, 1.1", g_list=""))
        pts = grid_points(cfg)
        assert [p.alpha_q for p in pts] == [0.9, 1.1]
        assert all(p.g == 0.0 for p in pts)


class TestSweep:
    def test_deterministic_outputs(self, tmp_path):
        cfg_path = write_config(tmp_path / "c.cfg")
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        cmd_sweep(RunConfig.from_file(cfg_path), out1)
        cmd_sweep(RunConfig.from_file(cfg_path), out2)
        assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()
        assert (out1 / "results.json").read_bytes() == (out2 / "results.json").read_bytes()

    def test_worker_pool_matches_serial(self, tmp_path):
        cfg_path = write_config(tmp_path / "c.cfg", n_chains=3)
        out1, out2 = tmp_path / "serial", tmp_path / "pooled"
        cmd_sweep(RunConfig.from_file(cfg_path), out1, threads=1)
        cmd_sweep(RunConfig.from_file(cfg_path), out2, threads=2)
        assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()

    def test_row_identity_and_free_spin(self, tmp_path):
        # g = 0 row must agree with the analytic decoupled qubit
        cfg_path = write_config(tmp_path / "c.cfg", g_list="0.0", beta_list="10",
                                n_sweeps=6000, n_therm=200, bin_len=60)
        rows = cmd_sweep(RunConfig.from_file(cfg_path), tmp_path / "out")
        row = rows[0]
        assert row.hq.mean == pytest.approx(-0.5 * row.sigma_x.mean, rel=1e-12)
        assert abs(row.m2.mean - 0.199982) <= 3 * row.m2.std_error
        assert abs(row.sigma_x.mean - 0.999909) <= 3 * row.sigma_x.std_error

    def test_resume_equivalence(self, tmp_path):
        cfg_path = write_config(tmp_path / "c.cfg", checkpoint_every=100,
                                n_sweeps=600, n_therm=100)
        ref_out = tmp_path / "ref"
        cmd_sweep(RunConfig.from_file(cfg_path), ref_out)

        # simulate a kill: rerun with fewer sweeps to leave mid-run checkpoints
        partial_cfg = write_config(tmp_path / "partial.cfg", checkpoint_every=100,
                                   n_sweeps=300, n_therm=100)
        res_out = tmp_path / "resumed"
        cmd_sweep(RunConfig.from_file(partial_cfg), res_out)
        # bring the config back to the full length and resume from checkpoints
        full_cfg = write_config(tmp_path / "full.cfg", checkpoint_every=100,
                                n_sweeps=600, n_therm=100)
        with pytest.raises(CheckpointMismatchError):
            cmd_sweep(RunConfig.from_file(full_cfg), res_out, resume=True)

        # matching schedule resumes bit-exactly
        shutil.rmtree(res_out)
        cmd_sweep(RunConfig.from_file(cfg_path), res_out)
        killed = res_out / "checkpoints"
        for ck in sorted(os.listdir(killed)):
            assert ck.endswith(".ckpt")
        cmd_sweep(RunConfig.from_file(cfg_path), res_out, resume=True)
        assert (ref_out / "results.csv").read_bytes() == (res_out / "results.csv").read_bytes()

    def test_checkpoint_mismatch_lists_keys(self, tmp_path):
        cfg_path = write_config(tmp_path / "c.cfg", checkpoint_every=100)
        out = tmp_path / "out"
        cmd_sweep(RunConfig.from_file(cfg_path), out)
        other = write_config(tmp_path / "other.cfg", seed=1234, checkpoint_every=100)
        with pytest.raises(CheckpointMismatchError) as exc:
            cmd_sweep(RunConfig.from_file(other), out, resume=True)
        assert "seed" in str(exc.value)

    def test_csv_readback(self, tmp_path):
        cfg_path = write_config(tmp_path / "c.cfg")
        out = tmp_path / "out"
        rows = cmd_sweep(RunConfig.from_file(cfg_path), out)
        back = read_results_csv(out / "results.csv")
        assert len(back) == len(rows) == 1
        assert back[0]["m2_mean"] == rows[0].m2.mean
        assert back[0]["alpha_eff"] == pytest.approx(4 * 0.4**2 * 0.2 / 0.75**2)


class TestKernelTableCmd:
    def test_zero_coupling_table(self, tmp_path):
        cfg_path = write_config(tmp_path / "c.cfg", g_list="0.0")
        out = tmp_path / "kt"
        files = cmd_kernel_table(RunConfig.from_file(cfg_path), out)
        assert len(files) == 1
        from rabimc import load_kernel_table

        kt = load_kernel_table(out / files[0])
        assert np.all(kt.k_values == 0.0) and np.all(kt.w_values == 0.0)

    def test_spot_values_match_quadrature(self, tmp_path):
        from rabimc import ModelParams, SpectralDensity, kernel_value, load_kernel_table

        cfg_path = write_config(tmp_path / "c.cfg", g_list="0.5", beta_list="8")
        out = tmp_path / "kt"
        files = cmd_kernel_table(RunConfig.from_file(cfg_path), out)
        kt = load_kernel_table(out / files[0])
        p = ModelParams(delta=1.0, omega0=0.75, g=0.5, alpha_cav=0.2, omega_c=10.0, beta=8.0)
        sd = SpectralDensity.structured(p)
        for tau in (0.3, 2.2, 4.0):
            assert kt.k_at(tau) == pytest.approx(kernel_value(sd, 8.0, tau), rel=1e-6)


class TestBktFitCmd:
    def test_synthetic_pipeline(self, tmp_path):
        # fabricate a results.csv from the exact crossing family
        import math

        path = tmp_path / "results.csv"
        from rabimc.harness import CSV_COLUMNS

        lines = [",".join(CSV_COLUMNS)]
        for a in (1.15, 1.25, 1.35, 1.45, 1.55):
            for b in (25.0, 50.0, 100.0, 200.0, 400.0):
                g_val = -2.0 * math.log(0.5) + 1.5 * (a - 1.35) * math.log(b)
                psi = 1.0 + 1.0 / (g_val + 2.0 * math.log(b))
                m2 = psi / a
                lines.append(",".join(map(str, [
                    0.0, b, a, a, m2, 1e-6, 1.0, 0.1, 1e-6, 1.0, -0.05, 1e-6,
                    1.0, 1e-6, 1000])))
        path.write_text("\n".join(lines) + "\n")
        report = cmd_bkt_fit([path], tmp_path / "fit", n_boot=40, seed=2)
        assert report["alpha_c"] == pytest.approx(1.35, abs=1e-4)
        assert (tmp_path / "fit" / "g_curves.csv").exists()

    def test_insufficient_coverage(self, tmp_path):
        path = tmp_path / "results.csv"
        from rabimc.harness import CSV_COLUMNS

        lines = [",".join(CSV_COLUMNS)]
        lines.append(",".join(map(str, [0.0, 25.0, 1.2, 1.2, 0.9, 1e-3, 1.0,
                                        0.1, 1e-3, 1.0, -0.05, 1e-3, 1.0, 1e-3, 100])))
        path.write_text("\n".join(lines) + "\n")
        from rabimc.errors import BracketingError

        with pytest.raises(BracketingError):
            cmd_bkt_fit([path], tmp_path / "fit", n_boot=5)


class TestEdCheckCmd:
    def test_default_instance_passes(self, tmp_path):
        cfg_path = write_config(tmp_path / "c.cfg", bath="discrete",
                                modes="0.743:0.301, 1.337:0.452", g_list="",
                                ed_n_max="10, 8")
        report = cmd_ed_check(RunConfig.from_file(cfg_path), tmp_path / "ed")
        assert all(report["checks"].values())
        assert report["residuals"]["sum_rule"] <= 1e-8
        assert (tmp_path / "ed" / "ed_check.json").exists()

    def test_budget_overflow_instance(self, tmp_path):
        from rabimc.errors import DimensionBudgetError

        cfg_path = write_config(tmp_path / "c.cfg", bath="discrete",
                                modes="0.743:0.301, 1.337:0.452", g_list="",
                                ed_n_max="200, 200")
        with pytest.raises(DimensionBudgetError):
            cmd_ed_check(RunConfig.from_file(cfg_path), tmp_path / "ed")


class TestRelaxCmd:
    def test_traces(self, tmp_path):
        cfg_path = write_config(tmp_path / "c.cfg", g_list="0.0, 0.1",
                                ed_n_modes=1, ed_n_max="10", ed_t_points=101,
                                ed_t_max=12.0)
        out = tmp_path / "rx"
        files = cmd_relax(RunConfig.from_file(cfg_path), out)
        assert len(files) == 2
        data = np.loadtxt(out / files[0], delimiter=",", skiprows=1)
        assert data[0, 0] == 0.0 and data[0, 1] == 1.0
        # g = 0 trace is cos(delta t)
        assert np.max(np.abs(data[:, 1] - np.cos(data[:, 0]))) <= 1e-6


class TestResistance:
    def test_reference_point(self):
        assert resistance_estimate(0.2) == pytest.approx(1.2, rel=1e-12)

    def test_unit_value(self):
        assert resistance_estimate(0.24) == pytest.approx(1.0, rel=1e-12)

    def test_invalid(self):
        with pytest.raises(ValueError):
            resistance_estimate(0.0)


class TestCli:
    def test_resistance_command(self, capsys):
        assert cli_main(["resistance", "--alpha-cav", "0.2"]) == 0
        assert "1.2" in capsys.readouterr().out

    def test_sweep_and_fit_commands(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path / "c.cfg")
        out = tmp_path / "out"
        assert cli_main(["sweep", "--config", str(cfg_path), "--out", str(out)]) == 0
        assert (out / "results.csv").exists()

    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("config_version = 1\nnot_a_key = 2\nseed = 3\n")
        assert cli_main(["sweep", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2

    def test_seed_override_echoed(self, tmp_path):
        cfg_path = write_config(tmp_path / "c.cfg")
        out = tmp_path / "out"
        assert cli_main(["sweep", "--config", str(cfg_path), "--out", str(out),
                         "--seed", "4242"]) == 0
        payload = json.loads((out / "results.json").read_text())
        assert payload["overrides"]["seed_cli"] == "4242"
        assert payload["config"]["seed"] == "4242"

    def test_threads_env_override_echoed(self, tmp_path, monkeypatch):
        monkeypatch.setenv("RABIMC_THREADS", "1")
        cfg_path = write_config(tmp_path / "c.cfg")
        out = tmp_path / "out"
        assert cli_main(["sweep", "--config", str(cfg_path), "--out", str(out)]) == 0
        payload = json.loads((out / "results.json").read_text())
        assert payload["overrides"]["threads_env"] == "1"

    def test_ed_check_command(self, tmp_path):
        cfg_path = write_config(tmp_path / "c.cfg", bath="discrete",
                                modes="0.743:0.301, 1.337:0.452", g_list="",
                                ed_n_max="8, 6")
        assert cli_main(["ed-check", "--config", str(cfg_path),
                         "--out", str(tmp_path / "ed")]) == 0
